"""Horizontal second fundamental form, mean curvature and principal curvatures."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .connection import (
    adapted_connection,
    constant_section,
    covariant_jacobian,
    koszul_horizontal,
)
from .errors import CharacteristicPoint, EigenSolverFailure, NonTangentDirection
from .hypersurface import (
    ON_SURFACE_TOL,
    Hypersurface,
    horizontal_frame_at,
    horizontal_normal_section,
)
from .structure import VRStructure, frame_matrix

EIGEN_TOL = 1e-7
MAX_TANGENT_RANK = 6

CLASSIFICATIONS = (
    "PositiveDefinite",
    "PositiveSemidefinite",
    "NegativeDefinite",
    "NegativeSemidefinite",
    "MixedSign",
    "Flat",
    "Indeterminate",
)


@dataclass(frozen=True)
class HorizontalShape:
    point: tuple
    ii0: np.ndarray
    h: float
    kappas: tuple
    eigen: tuple
    classification: str
    nu: np.ndarray
    tangent_frame: np.ndarray
    tol: float = EIGEN_TOL


def eigenvalues(mat: np.ndarray) -> tuple:
    """Eigenvalues of a small real matrix; closed form for sizes 1 and 2."""
    k = mat.shape[0]
    if k == 0:
        return ()
    if k == 1:
        return (complex(mat[0, 0]),)
    if k == 2:
        a, b, c, d = mat[0, 0], mat[0, 1], mat[1, 0], mat[1, 1]
        half = 0.5 * (a + d)
        disc = (0.5 * (a - d)) ** 2 + b * c
        root = cmath.sqrt(disc)
        return (half + root, half - root)
    if k > MAX_TANGENT_RANK:
        raise EigenSolverFailure(f"tangent rank {k} exceeds {MAX_TANGENT_RANK}")
    try:
        vals = np.linalg.eigvals(mat)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverFailure(str(exc)) from exc
    return tuple(complex(v) for v in vals)


def classify(ii0: np.ndarray, kappas, tol: float = EIGEN_TOL) -> str:
    if ii0.shape[0] == 0:
        return "Flat"
    sym = 0.5 * (ii0 + ii0.T)
    s_eig = np.linalg.eigvalsh(sym)
    lo, hi = float(s_eig[0]), float(s_eig[-1])
    flat_kappas = all(abs(k) <= tol for k in kappas)
    if max(abs(lo), abs(hi)) <= tol and flat_kappas:
        return "Flat"
    if lo > tol:
        return "PositiveDefinite"
    if hi < -tol:
        return "NegativeDefinite"
    if lo >= -tol:
        return "PositiveSemidefinite"
    if hi <= tol:
        return "NegativeSemidefinite"
    if any(k > tol for k in kappas) and any(k < -tol for k in kappas):
        return "MixedSign"
    if flat_kappas:
        return "Flat"
    return "Indeterminate"


def _shape_from_matrix(point, ii0, nu, tangent, tol) -> HorizontalShape:
    eig = eigenvalues(ii0)
    kappas = tuple(sorted((e.real for e in eig), reverse=True))
    return HorizontalShape(
        point=tuple(point),
        ii0=ii0,
        h=float(np.trace(ii0)),
        kappas=kappas,
        eigen=eig,
        classification=classify(ii0, kappas, tol),
        nu=nu,
        tangent_frame=tangent,
        tol=tol,
    )


def second_fundamental_form(
    s: VRStructure,
    surf: Hypersurface,
    p,
    tol: float = EIGEN_TOL,
    tangent_frame: Optional[np.ndarray] = None,
    method: str = "adapted",
    extension: str = "unit",
    on_surface_tol: float = ON_SURFACE_TOL,
) -> HorizontalShape:
    """``II_0[i, j] = <nabla_{e_i} nu, e_j>`` at a noncharacteristic point.

    ``method="koszul"`` evaluates every entry through the horizontal Koszul
    formula instead of the projected Levi-Civita coefficients.
    """
    p = np.asarray(p, dtype=float)
    frame = horizontal_frame_at(s, surf, p, on_surface_tol=on_surface_tol)
    if frame.characteristic:
        raise CharacteristicPoint(f"characteristic point {p.tolist()} (hnorm={frame.hnorm:.3g})")
    e = frame.tangent_frame if tangent_frame is None else np.asarray(tangent_frame, dtype=float)
    if e.shape[0] > MAX_TANGENT_RANK:
        raise EigenSolverFailure(f"tangent rank {e.shape[0]} exceeds {MAX_TANGENT_RANK}")
    nu = horizontal_normal_section(s, surf, p, scale=extension, on_surface_tol=on_surface_tol)
    m = s.rank
    if method == "adapted":
        d = covariant_jacobian(s, nu, p, adapted_connection(s, p).gammas)[:m]
        ii0 = e @ d @ e.T
    elif method == "koszul":
        k = e.shape[0]
        ii0 = np.empty((k, k))
        for i in range(k):
            ei = constant_section(e[i], s.dim)
            for j in range(k):
                ii0[i, j] = koszul_horizontal(s, ei, nu, constant_section(e[j], s.dim), p)
    else:
        raise ValueError(f"unknown method {method!r}")
    return _shape_from_matrix(p, ii0, frame.nu, e, tol)


def mean_curvature(s: VRStructure, surf: Hypersurface, p, **kw) -> float:
    return second_fundamental_form(s, surf, p, **kw).h


def _unit_normal_field(s: VRStructure, surf: Hypersurface, q):
    """Coordinate components of the level-set horizontal normal and the volume density."""
    from .expr import eval_jet2

    a, _, det = frame_matrix(s, q)
    grad = a @ eval_jet2(surf.phi, q).gradient
    m = s.rank
    u = grad[:m]
    nu = surf.orientation * u / np.linalg.norm(u)
    return nu @ a[:m], 1.0 / abs(det)


def divergence_oracle(s: VRStructure, surf: Hypersurface, p, step: float = 1e-5,
                      on_surface_tol: float = ON_SURFACE_TOL) -> float:
    """Riemannian divergence of the extended horizontal normal by central differences."""
    p = np.asarray(p, dtype=float)
    frame = horizontal_frame_at(s, surf, p, on_surface_tol=on_surface_tol)
    if frame.characteristic:
        raise CharacteristicPoint(f"characteristic point {p.tolist()}")
    _, rho0 = _unit_normal_field(s, surf, p)
    total = 0.0
    for axis in range(s.dim):
        dq = np.zeros(s.dim)
        dq[axis] = step
        vp, rp = _unit_normal_field(s, surf, p + dq)
        vm, rm = _unit_normal_field(s, surf, p - dq)
        total += (rp * vp[axis] - rm * vm[axis]) / (2.0 * step)
    return float(total / rho0)


def meusnier_curvature(shape: HorizontalShape, direction) -> float:
    """Horizontal curvature predicted for a tangent direction (tangent-frame components).

    Uses ``k_c = -d^T II_0 d``; flip the sign for the convention that omits it.
    """
    d = np.asarray(direction, dtype=float)
    return float(-(d @ shape.ii0 @ d))


def curve_horizontal_curvature(s: VRStructure, surf: Hypersurface, p, u, acceleration,
                               on_surface_tol: float = ON_SURFACE_TOL) -> float:
    """``k_c = <nabla_c' c', nu>`` from horizontal frame components."""
    frame = horizontal_frame_at(s, surf, p, on_surface_tol=on_surface_tol)
    if frame.characteristic:
        raise CharacteristicPoint(f"characteristic point {np.asarray(p).tolist()}")
    m = s.rank
    u = np.asarray(u, dtype=float)[:m]
    if abs(u @ frame.nu) >= 1e-8:
        raise NonTangentDirection(f"<u, nu> = {u @ frame.nu:.3g}")
    return float(np.asarray(acceleration, dtype=float)[:m] @ frame.nu)


@dataclass(frozen=True)
class PrincipalDirection:
    kappa: float
    eigenvalue: complex
    vectors: tuple
    multiplicity: int
    deficient: bool


def _cluster(values, tol):
    groups: list = []
    for v in values:
        for g in groups:
            if abs(g[0] - v) <= tol:
                g.append(v)
                break
        else:
            groups.append([v])
    return groups


def principal_directions(shape: HorizontalShape, tol: Optional[float] = None) -> list:
    """Real principal directions of ``II_0`` in tangent-frame components.

    Complex pairs contribute the real and imaginary parts of one
    eigenvector; defective eigenvalues are flagged.
    """
    a = np.asarray(shape.ii0, dtype=float)
    k = a.shape[0]
    tol = shape.tol if tol is None else tol
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 1.0)
    cluster_tol = math.sqrt(tol) * scale
    try:
        vals, vecs = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverFailure(str(exc)) from exc
    out = []
    groups = _cluster(list(vals), cluster_tol)
    for g in groups:
        lam = complex(np.mean(g))
        mult = len(g)
        if abs(lam.imag) <= cluster_tol:
            lam = complex(lam.real, 0.0)
            _, sing, vt = np.linalg.svd(a - lam.real * np.eye(k))
            null = [vt[i] for i in range(k) if sing[i] <= tol * scale]
            if not null:
                null = [vt[-1]]
            out.append(PrincipalDirection(lam.real, lam, tuple(np.array(v) for v in null), mult,
                                          len(null) < mult))
        elif lam.imag > 0:
            idx = int(np.argmin(np.abs(vals - lam)))
            v = vecs[:, idx]
            u_re, u_im = np.real(v), np.imag(v)
            out.append(PrincipalDirection(lam.real, lam, (u_re / np.linalg.norm(u_re), u_im / np.linalg.norm(u_im)),
                                          mult, False))
    out.sort(key=lambda d: -d.kappa)
    return out
