"""Level-set hypersurfaces: normals, characteristic points, adapted frames, perimeter."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .connection import SectionJet
from .errors import (
    CharacteristicPoint,
    OffSurface,
    PatchOffSurface,
    RegularityError,
    RootFindFailure,
)
from .expr import Expression, eval_jet2, evaluate, parse
from .structure import VRStructure, frame_derivatives, frame_matrix

ON_SURFACE_TOL = 1e-9
REGULARITY_TOL = 1e-14


@dataclass(frozen=True)
class Hypersurface:
    """The level set ``{phi = 0}``; ``orientation=+1`` points ``nu_g`` up the gradient."""

    phi: Expression
    orientation: int = 1
    char_tol: float = 1e-8

    @classmethod
    def from_string(cls, source: str, coords: Sequence[str], orientation: int = 1, char_tol: float = 1e-8):
        if orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        return cls(parse(source, coords), orientation, float(char_tol))

    def __call__(self, p) -> float:
        return evaluate(self.phi, p)


@dataclass(frozen=True)
class SurfacePointFrame:
    point: tuple
    nu: Optional[np.ndarray]
    hnorm: float
    tangent_frame: Optional[np.ndarray]
    vertical_frame: np.ndarray
    characteristic: bool
    nu_g: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True)
class _LocalData:
    a: np.ndarray
    da: np.ndarray
    grad: np.ndarray  # frame derivatives F_a(phi)
    dgrad: np.ndarray  # d_l F_a(phi)
    phi: float


def _local(s: VRStructure, surf: Hypersurface, p, check_on_surface=True, tol=ON_SURFACE_TOL) -> _LocalData:
    p = np.asarray(p, dtype=float)
    jet = eval_jet2(surf.phi, p)
    if check_on_surface and not abs(jet.value) < tol:
        raise OffSurface(f"|phi({p.tolist()})| = {abs(jet.value):.3g} exceeds {tol:g}")
    a, da = frame_derivatives(s, p)
    det = float(np.linalg.det(a))
    if not abs(det) >= 1e-12:
        from .errors import FrameDegenerate

        raise FrameDegenerate(p, det)
    grad = a @ jet.gradient
    dgrad = np.einsum("aml,m->al", da, jet.gradient) + a @ jet.hessian
    if not np.linalg.norm(grad) > REGULARITY_TOL:
        raise RegularityError(f"grad phi vanishes at {p.tolist()}")
    return _LocalData(a, da, grad, dgrad, jet.value)


def riemannian_normal(s: VRStructure, surf: Hypersurface, p, on_surface_tol=ON_SURFACE_TOL):
    """Unit Riemannian normal in frame components and ``|grad phi|``."""
    d = _local(s, surf, p, tol=on_surface_tol)
    norm = float(np.linalg.norm(d.grad))
    return surf.orientation * d.grad / norm, norm


def _gram_schmidt(nu: np.ndarray) -> np.ndarray:
    """Orthonormal complement of ``nu`` seeded by the frame axes in index order,
    skipping the axis most aligned with ``nu``."""
    m = nu.shape[0]
    skip = int(np.argmax(np.abs(nu)))
    basis = [nu]
    for a in range(m):
        if a == skip:
            continue
        v = np.zeros(m)
        v[a] = 1.0
        for _ in range(2):
            for b in basis:
                v = v - (v @ b) * b
        basis.append(v / np.linalg.norm(v))
    return np.array(basis[1:]).reshape(m - 1, m)


def horizontal_frame_at(s: VRStructure, surf: Hypersurface, p, on_surface_tol=ON_SURFACE_TOL) -> SurfacePointFrame:
    d = _local(s, surf, p, tol=on_surface_tol)
    m = s.rank
    norm = float(np.linalg.norm(d.grad))
    nu_g = surf.orientation * d.grad / norm
    hpart = nu_g[:m]
    hnorm = float(np.linalg.norm(hpart))
    vertical = np.eye(s.dim)[m:]
    if hnorm < surf.char_tol:
        return SurfacePointFrame(tuple(np.asarray(p, float)), None, hnorm, None, vertical, True, nu_g)
    nu = hpart / hnorm
    return SurfacePointFrame(tuple(np.asarray(p, float)), nu, hnorm, _gram_schmidt(nu), vertical, False, nu_g)


def horizontal_normal_section(s: VRStructure, surf: Hypersurface, p, scale: str = "unit",
                              on_surface_tol=ON_SURFACE_TOL) -> SectionJet:
    """The horizontal unit normal extended off the surface by the level-set formula.

    ``scale="rescaled"`` multiplies the extension by ``1 + phi^2``; the result
    agrees with the unit extension on the surface and is used to check that
    tangential derivatives do not depend on the extension.
    """
    d = _local(s, surf, p, tol=on_surface_tol)
    m = s.rank
    u = d.grad[:m]
    du = d.dgrad[:m]
    r = float(np.linalg.norm(u))
    if r / float(np.linalg.norm(d.grad)) < surf.char_tol:
        raise CharacteristicPoint(f"characteristic point {np.asarray(p).tolist()}")
    sign = surf.orientation
    values = sign * u / r
    jac = sign * (du / r - np.outer(u, u @ du) / r**3)
    if scale == "rescaled":
        jet = eval_jet2(surf.phi, p)
        f = 1.0 + jet.value**2
        jac = f * jac + np.outer(values, 2.0 * jet.value * jet.gradient)
        values = f * values
    return SectionJet(values, jac)


# -- patches and perimeter -----------------------------------------------------


@dataclass(frozen=True)
class Patch:
    """Parameterized patch ``u -> p(u)`` over a rectangle."""

    params: tuple
    mapping: tuple
    domain: tuple

    @classmethod
    def from_strings(cls, params: Sequence[str], mapping: Sequence[str], domain):
        params = tuple(params)
        return cls(params, tuple(parse(str(e), params) for e in mapping),
                   tuple((float(lo), float(hi)) for lo, hi in domain))

    def point(self, u) -> np.ndarray:
        return np.array([evaluate(e, u) for e in self.mapping])

    def jacobian(self, u):
        """Point and ``J[c, i] = d p^c / d u_i``."""
        vals, rows = [], []
        for e in self.mapping:
            j = eval_jet2(e, u)
            vals.append(j.value)
            rows.append(j.gradient)
        return np.array(vals), np.array(rows)


def gauss_nodes(domain, order: int):
    """Tensor-product Gauss-Legendre nodes and weights over a box."""
    x, w = np.polynomial.legendre.leggauss(int(order))
    axes = []
    for lo, hi in domain:
        half = 0.5 * (hi - lo)
        axes.append((lo + half * (x + 1.0), half * w))
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wgrids = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return nodes, weights


def _check_patch(surf: Hypersurface, patch: Patch, nodes, tol):
    worst, worst_node = -1.0, None
    for u in nodes:
        r = abs(surf(patch.point(u)))
        if r > worst:
            worst, worst_node = r, u
    if worst >= tol:
        raise PatchOffSurface(patch.point(worst_node), worst)


def perimeter(s: VRStructure, surf: Hypersurface, patch: Patch, order: int = 12, tol: float = 1e-6) -> float:
    """Horizontal perimeter of a patch by Gauss-Legendre quadrature."""
    nodes, weights = gauss_nodes(patch.domain, order)
    _check_patch(surf, patch, nodes, tol)
    total = 0.0
    for u, w in zip(nodes, weights):
        q, jac = patch.jacobian(u)
        a, a_inv, _ = frame_matrix(s, q)
        tangents = a_inv.T @ jac  # frame components of each d p / d u_i
        gram = tangents.T @ tangents
        area = np.sqrt(max(np.linalg.det(gram), 0.0))
        if area == 0.0:
            continue
        grad = a @ eval_jet2(surf.phi, q).gradient
        hnorm = np.linalg.norm(grad[: s.rank]) / np.linalg.norm(grad)
        total += w * hnorm * area
    return float(total)


# -- projection and characteristic locus ---------------------------------------


def project_to_surface(surf: Hypersurface, q, tol: float = 1e-13, max_iter: int = 50) -> np.ndarray:
    """Newton iteration along one coordinate axis, trying axes by decreasing ``|d phi|``."""
    q0 = np.array(q, dtype=float)
    grad = eval_jet2(surf.phi, q0).gradient
    for axis in np.argsort(-np.abs(grad), kind="stable"):
        q = q0.copy()
        for _ in range(max_iter):
            jet = eval_jet2(surf.phi, q)
            if abs(jet.value) < tol:
                return q
            slope = jet.gradient[axis]
            if slope == 0.0:
                break
            q[axis] -= jet.value / slope
        if abs(surf(q)) < max(tol, 1e-12):
            return q
    raise RootFindFailure(f"could not project {q0.tolist()} onto the surface")


@dataclass
class CharacteristicLocus:
    points: list
    min_hnorm: float
    evaluated: int


def characteristic_locus(s: VRStructure, surf: Hypersurface, grid) -> CharacteristicLocus:
    flagged, min_h = [], np.inf
    for q in grid:
        p = project_to_surface(surf, q)
        frame = horizontal_frame_at(s, surf, p)
        min_h = min(min_h, frame.hnorm)
        if frame.characteristic:
            flagged.append(p.tolist())
    return CharacteristicLocus(flagged, float(min_h), len(grid))
