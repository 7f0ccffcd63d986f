"""Vertically rigid sub-Riemannian structures given by explicit frames.

A structure is a global frame ``X_0..X_k, T_1..T_{n-k}`` on R^{n+1}; the
metric is the one that makes this frame orthonormal.  Frame fields are
stored as coefficient expressions in the coordinate basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from .errors import ConfigError, FrameDegenerate, PartitionError
from .expr import Expression, eval_jet2, evaluate, parse

DEGENERACY_TOL = 1e-12


@dataclass(frozen=True)
class VectorFieldSpec:
    """Coordinate components of a vector field, one expression per axis."""

    coefficients: tuple

    @classmethod
    def from_strings(cls, sources: Sequence[str], coords: Sequence[str]) -> "VectorFieldSpec":
        return cls(tuple(parse(str(s), coords) for s in sources))

    @property
    def dim(self) -> int:
        return len(self.coefficients)

    def values(self, p) -> np.ndarray:
        return np.array([evaluate(c, p) for c in self.coefficients])

    def jacobian(self, p):
        """Values and coordinate Jacobian ``J[c, l] = d_l v^c`` at ``p``."""
        n = self.dim
        vals = np.empty(n)
        jac = np.zeros((n, n))
        for c, e in enumerate(self.coefficients):
            if e.is_constant:
                vals[c] = evaluate(e, p)
            else:
                j = eval_jet2(e, p)
                vals[c] = j.value
                jac[c] = j.gradient
        return vals, jac

    def __str__(self) -> str:
        return "(" + ", ".join(str(c) for c in self.coefficients) + ")"


@dataclass(frozen=True)
class CarnotData:
    """Graded nilpotent Lie algebra: layer sizes and structure constants.

    ``constants[a, b, c]`` is the coefficient of ``E_c`` in ``[E_a, E_b]``.
    """

    grading: tuple
    constants: np.ndarray = field(compare=False)

    @property
    def step(self) -> int:
        return len(self.grading) - 1

    @property
    def dim(self) -> int:
        return int(sum(self.grading))

    def layer_of(self, index: int) -> int:
        acc = 0
        for layer, size in enumerate(self.grading):
            acc += size
            if index < acc:
                return layer
        raise IndexError(index)


@dataclass(frozen=True)
class VRStructure:
    coords: tuple
    horizontal: tuple
    vertical: tuple
    partition: tuple
    name: str = "custom"
    carnot: Optional[CarnotData] = None
    flow: Any = None
    samples: tuple = ()

    def __post_init__(self):
        n = len(self.coords)
        for f in self.horizontal + self.vertical:
            if f.dim != n:
                raise ConfigError(f"vector field has {f.dim} components, expected {n}")
        if len(self.horizontal) + len(self.vertical) != n:
            raise ConfigError(
                f"{len(self.horizontal)} horizontal + {len(self.vertical)} vertical fields "
                f"do not form a frame of R^{n}"
            )
        if not 1 <= len(self.horizontal) <= n - 1:
            raise ConfigError("need 1 <= dim V0 <= n")
        if len(self.partition) != len(self.vertical):
            raise PartitionError(
                f"partition labels {len(self.partition)} vertical fields {len(self.vertical)}"
            )

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def rank(self) -> int:
        """Dimension of the horizontal distribution (k+1)."""
        return len(self.horizontal)

    @property
    def frame(self) -> tuple:
        return self.horizontal + self.vertical

    def classes(self) -> dict:
        out: dict = {}
        for j, label in enumerate(self.partition):
            out.setdefault(label, []).append(j)
        return out


def frame_matrix(s: VRStructure, p):
    """Rows are frame coefficients at ``p``; returns ``(A, A^{-1}, det A)``."""
    p = np.asarray(p, dtype=float)
    a = np.array([f.values(p) for f in s.frame])
    det = float(np.linalg.det(a))
    if not abs(det) >= DEGENERACY_TOL:
        raise FrameDegenerate(p, det)
    return a, np.linalg.inv(a), det


def frame_derivatives(s: VRStructure, p):
    """Frame matrix and ``dA[a, m, l] = d_l A[a, m]`` at ``p``."""
    p = np.asarray(p, dtype=float)
    n = s.dim
    a = np.empty((n, n))
    da = np.empty((n, n, n))
    for i, f in enumerate(s.frame):
        a[i], da[i] = f.jacobian(p)
    return a, da


def to_frame(a_inv: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Frame components ``w`` of a coordinate vector, ``v = A^T w``."""
    return a_inv.T @ v


def lie_bracket(a: VectorFieldSpec, b: VectorFieldSpec, p) -> np.ndarray:
    """Coordinate components of ``[a, b]`` at ``p``."""
    va, ja = a.jacobian(p)
    vb, jb = b.jacobian(p)
    return jb @ va - ja @ vb


def bracket_components(s: VRStructure, p) -> np.ndarray:
    """``c[a, b, c]``: frame components of ``[F_a, F_b]`` at ``p``."""
    a, da = frame_derivatives(s, p)
    det = float(np.linalg.det(a))
    if not abs(det) >= DEGENERACY_TOL:
        raise FrameDegenerate(p, det)
    a_inv = np.linalg.inv(a)
    # [F_a, F_b]^c = sum_l A[a,l] dA[b,c,l] - A[b,l] dA[a,c,l]
    directional = np.einsum("al,bcl->abc", a, da)
    coord = directional - directional.transpose(1, 0, 2)
    return np.einsum("abm,mc->abc", coord, a_inv)


@dataclass
class RigidityReport:
    max_residual: float
    worst_point: Optional[list]
    worst_triple: Optional[tuple]
    passed: bool
    tol: float
    samples: int


def check_vertical_rigidity(s: VRStructure, samples, tol: float = 1e-10) -> RigidityReport:
    """Sample ``max |g([X_a, T_j], T_i)|`` over horizontal ``a`` and ``i ~ j``."""
    samples = [np.asarray(q, dtype=float) for q in samples]
    if not samples:
        raise ValueError("no sample points")
    m = s.rank
    pairs = [(j, i) for members in s.classes().values() for j in members for i in members]
    worst, worst_p, worst_t = 0.0, None, None
    for q in samples:
        c = bracket_components(s, q)
        for a in range(m):
            for j, i in pairs:
                r = float(abs(c[a, m + j, m + i]))
                if worst_p is None or r > worst:
                    worst, worst_p, worst_t = r, q.tolist(), (a, j, i)
    return RigidityReport(float(worst), worst_p, worst_t, bool(worst < tol), tol, len(samples))


def check_frame(s: VRStructure, points) -> None:
    for q in points:
        frame_matrix(s, q)


_STRUCTURE_KEYS = {
    "catalog", "params", "coords", "horizontal", "vertical", "partition",
    "samples", "carnot", "dilation", "name",
}


def load_structure(section: dict) -> VRStructure:
    """Build and validate a structure from a config mapping.

    Either ``catalog`` (+ ``params``) or explicit ``coords``, ``horizontal``,
    ``vertical`` and ``partition`` must be given.
    """
    from .catalog import carnot as _carnot, catalog as _lookup
    from .flows import flow_from_config

    if not isinstance(section, dict):
        raise ConfigError("structure section must be a mapping")
    unknown = set(section) - _STRUCTURE_KEYS
    if unknown:
        raise ConfigError(f"unknown structure keys: {sorted(unknown)}")

    if "catalog" in section:
        s = _lookup(section["catalog"], **(section.get("params") or {}))
    elif "carnot" in section:
        s = _carnot(carnot_from_config(section["carnot"]), coords=section.get("coords"))
    else:
        for key in ("coords", "horizontal", "vertical", "partition"):
            if key not in section:
                raise ConfigError(f"structure is missing {key!r}")
        coords = [str(c) for c in section["coords"]]
        if len(set(coords)) != len(coords):
            raise ConfigError("duplicate coordinate names")
        try:
            horizontal = tuple(VectorFieldSpec.from_strings(f, coords) for f in section["horizontal"])
            vertical = tuple(VectorFieldSpec.from_strings(f, coords) for f in section["vertical"])
        except TypeError as exc:
            raise ConfigError(f"malformed vector field: {exc}") from exc
        partition = tuple(str(x) for x in section["partition"])
        s = VRStructure(
            coords=tuple(coords),
            horizontal=horizontal,
            vertical=vertical,
            partition=partition,
            name=str(section.get("name", "custom")),
        )
    if "dilation" in section:
        s = with_flow(s, flow_from_config(section["dilation"], s))
    samples = section.get("samples")
    if samples is not None:
        pts = tuple(tuple(float(x) for x in q) for q in samples)
        for q in pts:
            if len(q) != s.dim:
                raise ConfigError(f"sample point {list(q)} has wrong dimension")
        s = VRStructure(**{**s.__dict__, "samples": pts})
    check_frame(s, s.samples or [np.zeros(s.dim)])
    return s


def with_flow(s: VRStructure, flow) -> VRStructure:
    return VRStructure(**{**s.__dict__, "flow": flow})


def carnot_from_config(block: dict) -> CarnotData:
    from .catalog import make_carnot_data

    unknown = set(block) - {"grading", "constants"}
    if unknown:
        raise ConfigError(f"unknown carnot keys: {sorted(unknown)}")
    try:
        grading = [int(g) for g in block["grading"]]
        entries = [(int(a), int(b), int(c), float(v)) for a, b, c, v in block["constants"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed carnot block: {exc}") from exc
    return make_carnot_data(grading, entries)
