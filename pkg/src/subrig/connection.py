"""The adapted connection of a vertically rigid structure.

All coefficients are taken in the structure's orthonormal frame
``F = (X_0..X_k, T_1..T_{n-k})`` with ``gammas[a, b, c] = <nabla_{F_a} F_b, F_c>``.
The adapted connection keeps every ``T_j`` parallel and projects the
Levi-Civita derivative of horizontal fields back onto ``V_0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .expr import Expression, eval_jet2, evaluate, parse
from .structure import VRStructure, bracket_components, frame_derivatives


@dataclass(frozen=True)
class ConnectionCoefficients:
    point: tuple
    gammas: np.ndarray


@dataclass(frozen=True)
class SectionJet:
    """Horizontal section at a point: frame components and their coordinate gradients.

    ``jacobian[c, l]`` is ``d_l W^c``.
    """

    values: np.ndarray
    jacobian: np.ndarray


def structure_coefficients(s: VRStructure, p) -> np.ndarray:
    """``c[a, b, c]``: the ``F_c`` component of ``[F_a, F_b]`` at ``p``."""
    return bracket_components(s, p)


def koszul(c: np.ndarray) -> np.ndarray:
    # c[a,b,c] - c[b,c,a] + c[c,a,b]
    return 0.5 * (c - c.transpose(2, 0, 1) + c.transpose(1, 2, 0))


def levi_civita(s: VRStructure, p) -> np.ndarray:
    """Levi-Civita coefficients of the frame-orthonormal metric."""
    return koszul(structure_coefficients(s, p))


def adapted_from_levi_civita(lc: np.ndarray, m: int) -> np.ndarray:
    out = np.zeros_like(lc)
    out[:, :m, :m] = lc[:, :m, :m]
    return out


def adapted_connection(s: VRStructure, p) -> ConnectionCoefficients:
    lc = levi_civita(s, p)
    return ConnectionCoefficients(tuple(np.asarray(p, dtype=float)), adapted_from_levi_civita(lc, s.rank))


def covariant_derivative_of_section(s: VRStructure, section: SectionJet, a: int, p, gammas=None) -> np.ndarray:
    """Horizontal frame components of ``nabla_{F_a} W``."""
    a_mat, _ = frame_derivatives(s, p)
    if gammas is None:
        gammas = adapted_connection(s, p).gammas
    m = s.rank
    return section.jacobian @ a_mat[a] + section.values @ gammas[a, :m, :m]


def covariant_jacobian(s: VRStructure, section: SectionJet, p, gammas=None) -> np.ndarray:
    """``D[a, c] = (nabla_{F_a} W)^c`` for every frame direction ``a``."""
    a_mat, _ = frame_derivatives(s, p)
    if gammas is None:
        gammas = adapted_connection(s, p).gammas
    m = s.rank
    return a_mat @ section.jacobian.T + np.einsum("b,abc->ac", section.values, gammas[:, :m, :m])


def torsion(s: VRStructure, a: int, b: int, p, gammas=None, brackets=None) -> np.ndarray:
    """Frame components of ``Tor(F_a, F_b)``."""
    if brackets is None:
        brackets = structure_coefficients(s, p)
    if gammas is None:
        gammas = adapted_from_levi_civita(koszul(brackets), s.rank)
    return gammas[a, b] - gammas[b, a] - brackets[a, b]


def torsion_tensor(s: VRStructure, p) -> np.ndarray:
    c = structure_coefficients(s, p)
    g = adapted_from_levi_civita(koszul(c), s.rank)
    return g - g.transpose(1, 0, 2) - c


# -- independent horizontal Koszul evaluation --------------------------------


@dataclass(frozen=True)
class HorizontalField:
    """Horizontal vector field given by expressions for its frame components."""

    components: tuple

    @classmethod
    def from_strings(cls, sources: Sequence[str], coords: Sequence[str]) -> "HorizontalField":
        return cls(tuple(parse(str(x), coords) for x in sources))

    def section(self, p) -> SectionJet:
        vals, grads = [], []
        for e in self.components:
            j = eval_jet2(e, p)
            vals.append(j.value)
            grads.append(j.gradient)
        return SectionJet(np.array(vals), np.array(grads))


def _coordinate_jet(s: VRStructure, field: SectionJet, a_mat, da):
    """Coordinate vector of a horizontal field and its coordinate Jacobian."""
    m = s.rank
    vec = field.values @ a_mat[:m]
    jac = a_mat[:m].T @ field.jacobian + np.einsum("a,acl->cl", field.values, da[:m])
    return vec, jac


def koszul_horizontal(s: VRStructure, x, y, z, p) -> float:
    """``<nabla_X Y, Z>`` from the six-term horizontal Koszul formula.

    ``x``, ``y``, ``z`` are :class:`HorizontalField` or :class:`SectionJet`.
    Works directly with coordinate brackets and derivatives of inner
    products; it does not touch the frame structure constants.
    """
    p = np.asarray(p, dtype=float)
    a_mat, da = frame_derivatives(s, p)
    a_inv = np.linalg.inv(a_mat)
    m = s.rank
    sx, sy, sz = (f.section(p) if isinstance(f, HorizontalField) else f for f in (x, y, z))
    vx, jx = _coordinate_jet(s, sx, a_mat, da)
    vy, jy = _coordinate_jet(s, sy, a_mat, da)
    vz, jz = _coordinate_jet(s, sz, a_mat, da)

    def deriv_inner(v, f, h):
        grad = f.jacobian.T @ h.values + h.jacobian.T @ f.values
        return float(grad @ v)

    def bracket0(va, ja, vb, jb):
        coord = jb @ va - ja @ vb
        return (a_inv.T @ coord)[:m]

    total = (
        deriv_inner(vx, sy, sz)
        + deriv_inner(vy, sx, sz)
        - deriv_inner(vz, sx, sy)
        + float(bracket0(vx, jx, vy, jy) @ sz.values)
        + float(bracket0(vz, jz, vx, jx) @ sy.values)
        + float(bracket0(vz, jz, vy, jy) @ sx.values)
    )
    return 0.5 * total


def constant_section(values, n: int) -> SectionJet:
    """A field with constant frame components."""
    values = np.asarray(values, dtype=float)
    return SectionJet(values, np.zeros((values.shape[0], n)))


def adapted_inner(s: VRStructure, x: HorizontalField, y: HorizontalField, z: HorizontalField, p) -> float:
    """``<nabla_X Y, Z>`` through the projected Levi-Civita coefficients."""
    sx, sy, sz = x.section(p), y.section(p), z.section(p)
    d = covariant_jacobian(s, sy, p)
    m = s.rank
    return float(sx.values @ d[:m] @ sz.values)
