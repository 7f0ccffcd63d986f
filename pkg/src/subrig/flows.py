"""ODE machinery: horizontal geodesics, rulings, dilations, cone volumes, convexity probes.

Every integrator here is fixed-step so that reruns reproduce the same
numbers bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .connection import adapted_connection
from .errors import (
    CharacteristicEncountered,
    CharacteristicPoint,
    ConfigError,
    EmptyGrid,
    FrameDegenerate,
    NotCarnot,
    ProjectionFailure,
    RayRecrossing,
    StepTooLarge,
)
from .expr import Expression, eval_jet2, evaluate, parse
from .hypersurface import Hypersurface, Patch, _check_patch, gauss_nodes, horizontal_frame_at
from .shape import second_fundamental_form
from .structure import VRStructure, frame_matrix

LAMBDA = "lam"
DRIFT_LIMIT = 1e-6


# -- dilations -----------------------------------------------------------------


@dataclass(frozen=True)
class DilatingFlow:
    """Dilations ``delta_lam`` given as expressions in the coordinates and ``lam``.

    ``gammas`` are the vertical weights; every horizontal field has weight 1.
    """

    gammas: tuple
    rank: int
    mapping: tuple
    origin: tuple

    @property
    def Q(self) -> float:
        return homogeneous_dimension(self)


def homogeneous_dimension(flow: DilatingFlow) -> float:
    return float(flow.rank + sum(flow.gammas))


def diagonal_flow(s: VRStructure, weights: Sequence[float], gammas: Sequence[float]) -> DilatingFlow:
    """``delta_lam(x)_i = lam^{w_i} x_i``."""
    if len(weights) != s.dim:
        raise ConfigError(f"{len(weights)} dilation weights for {s.dim} coordinates")
    names = tuple(s.coords) + (LAMBDA,)
    mapping = []
    for name, w in zip(s.coords, weights):
        w = float(w)
        text = f"{name}*{LAMBDA}" if w == 1.0 else f"{name}*{LAMBDA}^{w!r}"
        mapping.append(parse(text, names))
    return DilatingFlow(tuple(float(g) for g in gammas), s.rank, tuple(mapping), tuple([0.0] * s.dim))


def flow_from_config(block: dict, s: VRStructure) -> DilatingFlow:
    unknown = set(block) - {"weights", "map", "gammas", "origin"}
    if unknown:
        raise ConfigError(f"unknown dilation keys: {sorted(unknown)}")
    if "gammas" not in block:
        raise ConfigError("dilation block needs 'gammas'")
    gammas = [float(g) for g in block["gammas"]]
    if len(gammas) != len(s.vertical):
        raise ConfigError(f"{len(gammas)} gammas for {len(s.vertical)} vertical fields")
    if any(g <= 0 for g in gammas):
        raise ConfigError("dilation weights must be positive")
    if "weights" in block:
        flow = diagonal_flow(s, block["weights"], gammas)
    elif "map" in block:
        names = tuple(s.coords) + (LAMBDA,)
        if len(block["map"]) != s.dim:
            raise ConfigError("dilation map needs one expression per coordinate")
        flow = DilatingFlow(tuple(gammas), s.rank, tuple(parse(str(e), names) for e in block["map"]),
                            tuple([0.0] * s.dim))
    else:
        raise ConfigError("dilation block needs 'weights' or 'map'")
    if "origin" in block:
        flow = DilatingFlow(flow.gammas, flow.rank, flow.mapping, tuple(float(x) for x in block["origin"]))
    return flow


def dilate(flow: DilatingFlow, p, lam: float) -> np.ndarray:
    if lam <= 0:
        raise ValueError("dilation factor must be positive")
    args = np.append(np.asarray(p, dtype=float), lam)
    return np.array([evaluate(e, args) for e in flow.mapping])


def _dilation_jets(flow: DilatingFlow, p, lam: float):
    """``delta_lam(p)``, its coordinate Jacobian and its ``lam`` derivative."""
    args = np.append(np.asarray(p, dtype=float), lam)
    vals, rows = [], []
    for e in flow.mapping:
        j = eval_jet2(e, args)
        vals.append(j.value)
        rows.append(j.gradient)
    rows = np.array(rows)
    return np.array(vals), rows[:, :-1], rows[:, -1]


def generator(flow: DilatingFlow, p) -> np.ndarray:
    """Generating field ``X_p = d/dlam delta_lam(p)`` at ``lam = 1``."""
    return _dilation_jets(flow, p, 1.0)[2]


def check_pushforward(s: VRStructure, flow: DilatingFlow, samples, lambdas=(0.5, 2.0)) -> float:
    """Max residual of ``(delta_lam)_* F = lam^w F`` over frame fields and samples."""
    weights = [1.0] * s.rank + list(flow.gammas)
    worst = 0.0
    for p in samples:
        for lam in lambdas:
            q, jac, _ = _dilation_jets(flow, p, lam)
            a_p, _, _ = frame_matrix(s, p)
            a_q, _, _ = frame_matrix(s, q)
            for i, w in enumerate(weights):
                pushed = jac @ a_p[i]
                worst = max(worst, float(np.max(np.abs(pushed - lam**w * a_q[i]))))
    return worst


def volume_scaling_check(s: VRStructure, flow: DilatingFlow, box, lam: float, order: int = 8):
    """``Vol(delta_lam(box)) / Vol(box)`` against ``lam^Q``."""
    nodes, weights = gauss_nodes(box, order)
    base = scaled = 0.0
    for p, w in zip(nodes, weights):
        _, _, det = frame_matrix(s, p)
        base += w / abs(det)
        q, jac, _ = _dilation_jets(flow, p, lam)
        _, _, det_q = frame_matrix(s, q)
        scaled += w * abs(np.linalg.det(jac)) / abs(det_q)
    return float(scaled / base), float(lam ** homogeneous_dimension(flow))


def _ray_crossings(surf: Hypersurface, flow: DilatingFlow, p, samples: int = 64) -> bool:
    prev = 0.0
    for j in range(1, samples):
        v = surf(dilate(flow, p, j / samples))
        if abs(v) <= 1e-12:
            continue
        if prev and (v > 0) != (prev > 0):
            return True
        prev = v
    return False


def cone_volume(s: VRStructure, flow: DilatingFlow, surf: Hypersurface, patch: Patch, order: int = 12,
                check_rays: bool = True, patch_tol: float = 1e-6):
    """Dilation-cone volume over a patch, as ``(integral of mu, solid quadrature)``.

    Both values are signed by the orientation of the patch parameterization.
    """
    nodes, weights = gauss_nodes(patch.domain, order)
    _check_patch(surf, patch, nodes, patch_tol)
    q_dim = homogeneous_dimension(flow)
    t_nodes, t_weights = gauss_nodes([(0.0, 1.0)], order)
    via_mu = via_solid = 0.0
    for u, w in zip(nodes, weights):
        p, jp = patch.jacobian(u)
        if check_rays and _ray_crossings(surf, flow, p):
            raise RayRecrossing(f"dilation ray through {p.tolist()} crosses the surface twice")
        _, _, det = frame_matrix(s, p)
        x = generator(flow, p)
        via_mu += w * np.linalg.det(np.column_stack([x, jp])) / (q_dim * det)
        for (t,), wt in zip(t_nodes, t_weights):
            q, jac, dlam = _dilation_jets(flow, p, t)
            if t == 0.0:
                continue
            _, _, det_q = frame_matrix(s, q)
            via_solid += w * wt * np.linalg.det(np.column_stack([dlam, jac @ jp])) / det_q
    return float(via_mu), float(via_solid)


# -- horizontal curves ---------------------------------------------------------


@dataclass
class CurveState:
    point: np.ndarray
    tangent: np.ndarray
    arclength: float
    k_c: Optional[float] = None
    c0: Optional[float] = None


def _geodesic_rhs(s: VRStructure, p, u, forcing=None):
    a, _, _ = frame_matrix(s, p)
    m = s.rank
    g = adapted_connection(s, p).gammas[:m, :m, :m]
    du = -np.einsum("a,b,abc->c", u, u, g)
    if forcing is not None:
        du = du + forcing(p)
    return u @ a[:m], du


def _rk4(s, p, u, h, forcing=None):
    k1p, k1u = _geodesic_rhs(s, p, u, forcing)
    k2p, k2u = _geodesic_rhs(s, p + 0.5 * h * k1p, u + 0.5 * h * k1u, forcing)
    k3p, k3u = _geodesic_rhs(s, p + 0.5 * h * k2p, u + 0.5 * h * k2u, forcing)
    k4p, k4u = _geodesic_rhs(s, p + h * k3p, u + h * k3u, forcing)
    return (
        p + h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p),
        u + h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u),
    )


def _steps(length: float, h: float):
    if h <= 0:
        raise ValueError("step must be positive")
    n = int(math.ceil(length / h - 1e-9)) if length > 0 else 0
    return [min(h, length - i * h) for i in range(n)]


def integrate_horizontal_geodesic(s: VRStructure, start, direction, length: float, h: float = 1e-3) -> List[CurveState]:
    """RK4 for ``p' = u^a X_a``, ``u'^c = -Gamma_ab^c u^a u^b``."""
    p = np.asarray(start, dtype=float)
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    states = [CurveState(p.copy(), u.copy(), 0.0)]
    arc = 0.0
    for dt in _steps(length, h):
        p, u = _rk4(s, p, u, dt)
        drift = abs(np.linalg.norm(u) - 1.0)
        if drift > DRIFT_LIMIT:
            raise StepTooLarge(f"|u| drifted by {drift:.3g}")
        u = u / np.linalg.norm(u)
        arc += dt
        states.append(CurveState(p.copy(), u.copy(), arc))
    return states


def _level_set_normal(s: VRStructure, surf: Hypersurface, q):
    """Horizontal unit normal of the level set through ``q`` and its hnorm."""
    a, _, _ = frame_matrix(s, q)
    grad = a @ eval_jet2(surf.phi, q).gradient
    m = s.rank
    r = np.linalg.norm(grad[:m])
    return surf.orientation * grad[:m] / r if r > 0 else grad[:m], r / np.linalg.norm(grad)


@dataclass
class RulingResult:
    states: List[CurveState]
    max_phi: float
    max_curvature_residual: float
    max_turn_residual: float
    rho: float


def _rotate(nu):
    return np.array([-nu[1], nu[0]])


def integrate_ruling(s: VRStructure, surf: Hypersurface, p0, length: float, h: float = 1e-3,
                     rho: Optional[float] = None) -> RulingResult:
    """Follow the ruling of a 2-dimensional-V0 surface through ``p0``.

    Each step restarts from ``nu_perp`` at the current point and advances
    by RK4 of the geodesic equation, or of the forced equation with
    acceleration ``rho * nu`` when ``rho`` is given.  ``k_c`` is recorded
    from the horizontal second fundamental form along the way.
    """
    if s.rank != 2:
        raise ValueError("rulings need dim V0 = 2")
    rho_val = 0.0 if rho is None else float(rho)
    p = np.asarray(p0, dtype=float)
    frame = horizontal_frame_at(s, surf, p)
    if frame.characteristic:
        raise CharacteristicEncountered(f"seed {p.tolist()} is characteristic", [])
    forcing = None
    if rho is not None:
        forcing = lambda q: rho_val * _level_set_normal(s, surf, q)[0]  # noqa: E731
    u = _rotate(frame.nu)
    states: List[CurveState] = []
    arc = 0.0
    max_phi = max_kres = max_turn = 0.0
    steps = _steps(length, h)
    for i in range(len(steps) + 1):
        nu, hn = _level_set_normal(s, surf, p)
        if hn < surf.char_tol:
            raise CharacteristicEncountered(f"characteristic point near {p.tolist()}", states)
        perp = _rotate(nu)
        if perp @ u < 0:
            perp = -perp
        if i > 0:
            max_turn = max(max_turn, abs((perp - u) @ nu) / steps[i - 1])
        shape = second_fundamental_form(s, surf, p, tangent_frame=perp[None, :], on_surface_tol=np.inf)
        k_c = -shape.h
        max_phi = max(max_phi, abs(surf(p)))
        max_kres = max(max_kres, abs(k_c - rho_val))
        states.append(CurveState(p.copy(), perp.copy(), arc, k_c=k_c))
        if i == len(steps):
            break
        p, u = _rk4(s, p, perp, steps[i], forcing)
        u = u / np.linalg.norm(u)
        arc += steps[i]
    return RulingResult(states, max_phi, max_kres, max_turn, rho_val)


def planar_curvatures(points) -> np.ndarray:
    """Menger curvature of consecutive triples of 2-d points."""
    pts = np.asarray(points, dtype=float)
    a, b, c = pts[:-2], pts[1:-1], pts[2:]
    ab = np.linalg.norm(b - a, axis=1)
    bc = np.linalg.norm(c - b, axis=1)
    ca = np.linalg.norm(a - c, axis=1)
    cross = (b - a)[:, 0] * (c - a)[:, 1] - (b - a)[:, 1] * (c - a)[:, 0]
    return 2.0 * cross / (ab * bc * ca)


def chord_deviation(points) -> float:
    """Max distance of 2-d points from the chord joining the endpoints."""
    pts = np.asarray(points, dtype=float)
    d = pts[-1] - pts[0]
    n = np.linalg.norm(d)
    if n == 0:
        return float(np.max(np.linalg.norm(pts - pts[0], axis=1)))
    rel = pts - pts[0]
    return float(np.max(np.abs(rel[:, 0] * d[1] - rel[:, 1] * d[0]) / n))


def surface_curve_acceleration(s: VRStructure, surf: Hypersurface, p, direction, h: float = 1e-5,
                               bend=None) -> np.ndarray:
    """``nabla_c' c'`` at ``p`` for a horizontal curve in the surface with tangent ``direction``.

    The curve is the integral curve of ``W(q) = unit(P_q w(q))`` where
    ``P_q`` projects onto the horizontal tangent space of the level set
    through ``q`` and ``w(q) = direction + bend @ (q - p)``.  The
    derivative of its frame components is taken by central differences.
    """
    p = np.asarray(p, dtype=float)
    d = np.asarray(direction, dtype=float)
    bend = np.zeros((s.rank, s.dim)) if bend is None else np.asarray(bend, dtype=float)

    def field_at(q):
        nu, _ = _level_set_normal(s, surf, q)
        w = d + bend @ (q - p)
        w = w - (w @ nu) * nu
        return w / np.linalg.norm(w)

    def velocity(q):
        a, _, _ = frame_matrix(s, q)
        return field_at(q) @ a[: s.rank]

    def flow(sign):
        q = p.copy()
        dt = sign * h / 2
        for _ in range(2):
            k1 = velocity(q)
            k2 = velocity(q + 0.5 * dt * k1)
            k3 = velocity(q + 0.5 * dt * k2)
            k4 = velocity(q + dt * k3)
            q = q + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        return field_at(q)

    u0 = field_at(p)
    du = (flow(+1) - flow(-1)) / (2 * h)
    m = s.rank
    g = adapted_connection(s, p).gammas[:m, :m, :m]
    return du + np.einsum("a,b,abc->c", u0, u0, g)


# -- convexity probe -----------------------------------------------------------


@dataclass
class ConvexityVerdict:
    verdict: str  # "LocallyOneSided" or "TwoSided"
    sign: str  # "+", "-", "flat" or "both"
    min_c0: float
    max_c0: float
    side_tol: float
    directions: list
    traces: list = field(repr=False)


def _probe_directions(k: int, count: int, seed: int = 0) -> np.ndarray:
    """Probe directions in tangent-frame components.

    For ``k >= 3`` the axes and the pairwise diagonals ``(e_i +- e_j)/sqrt 2``
    always come first: the side test is even in the direction, so the
    diagonals are what expose off-diagonal entries of II0 with both signs.
    """
    if k == 1:
        return np.array([[1.0], [-1.0]])
    if k == 2:
        ang = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    eye = np.eye(k)
    dirs = [sgn * eye[i] for i in range(k) for sgn in (1.0, -1.0)]
    for i in range(k):
        for j in range(i + 1, k):
            for sgn in (1.0, -1.0):
                dirs.append((eye[i] + sgn * eye[j]) / math.sqrt(2.0))
    rng = np.random.default_rng(seed)
    while len(dirs) < count:
        v = rng.normal(size=k)
        dirs.append(v / np.linalg.norm(v))
    return np.array(dirs)


def project_along_normal(s: VRStructure, surf: Hypersurface, q, tol: float = 1e-14, max_iter: int = 50):
    """Newton projection onto the surface along the Riemannian gradient."""
    q = np.array(q, dtype=float)
    for _ in range(max_iter):
        jet = eval_jet2(surf.phi, q)
        if abs(jet.value) <= tol:
            return q
        a, _, _ = frame_matrix(s, q)
        n = a.T @ (a @ jet.gradient)
        slope = float(jet.gradient @ n)
        if slope == 0.0:
            break
        q = q - jet.value * n / slope
    if abs(surf(q)) <= 1e-12:
        return q
    raise ProjectionFailure(f"projection onto the surface failed near {q.tolist()}")


def hg_convexity_test(s: VRStructure, surf: Hypersurface, x, length: float = 0.3, directions: int = 8,
                      h: float = 1e-3, side_tol: Optional[float] = None, seed: int = 0) -> ConvexityVerdict:
    """Probe which side of the horizontal tangent plane the horizontal curves through ``x`` go.

    Along each curve the side coordinate ``c0(t) = int <c', v0>`` is
    accumulated, where ``v0`` is the left-invariant field equal to ``nu(x)``.
    """
    if s.carnot is None:
        raise NotCarnot(f"structure {s.name!r} carries no Carnot data")
    x = np.asarray(x, dtype=float)
    frame = horizontal_frame_at(s, surf, x)
    if frame.characteristic:
        raise CharacteristicPoint(f"characteristic point {x.tolist()}")
    tol = 1e-7 * length**2 if side_tol is None else side_tol
    v0 = frame.nu
    e = frame.tangent_frame
    m = s.rank

    def unit_tangent(q, w):
        nu, hn = _level_set_normal(s, surf, q)
        if hn < surf.char_tol:
            raise CharacteristicPoint(f"curve reached a characteristic point {q.tolist()}")
        w = w - (w @ nu) * nu
        return w / np.linalg.norm(w)

    traces, dirs = [], []
    lo, hi = np.inf, -np.inf
    for d in _probe_directions(e.shape[0], directions, seed):
        u = d @ e
        p = x.copy()
        c0, t = 0.0, 0.0
        trace = [(0.0, 0.0)]
        for dt in _steps(length, h):
            a, _, _ = frame_matrix(s, p)
            p_mid = p + 0.5 * dt * (u @ a[:m])
            u_mid = unit_tangent(p_mid, u)
            a_mid, _, _ = frame_matrix(s, p_mid)
            p = project_along_normal(s, surf, p + dt * (u_mid @ a_mid[:m]))
            u = unit_tangent(p, u_mid)
            c0 += dt * float(u_mid @ v0)
            t += dt
            trace.append((t, c0))
            lo, hi = min(lo, c0), max(hi, c0)
        traces.append(trace)
        dirs.append(d.tolist())
    pos, neg = hi > tol, lo < -tol
    if pos and neg:
        verdict, sign = "TwoSided", "both"
    else:
        verdict = "LocallyOneSided"
        sign = "+" if pos else "-" if neg else "flat"
    return ConvexityVerdict(verdict, sign, float(lo), float(hi), tol, dirs, traces)


# -- constancy -----------------------------------------------------------------


@dataclass
class ConstancyReport:
    points: list
    values: list
    excluded: list
    rho_hat: float
    max_deviation: float
    max_abs: float
    minimal: bool
    cmc: bool
    tol: float


def verify_constancy(s: VRStructure, surf: Hypersurface, grid, tol: float = 1e-7) -> ConstancyReport:
    pts, vals, excluded = [], [], []
    for q in grid:
        q = np.asarray(q, dtype=float)
        try:
            vals.append(second_fundamental_form(s, surf, q).h)
            pts.append(q.tolist())
        except CharacteristicPoint:
            excluded.append(q.tolist())
    if not vals:
        raise EmptyGrid("every grid point is characteristic")
    arr = np.array(vals)
    rho_hat = float(np.mean(arr))
    max_dev = float(np.max(np.abs(arr - rho_hat)))
    max_abs = float(np.max(np.abs(arr)))
    return ConstancyReport(pts, vals, excluded, rho_hat, max_dev, max_abs, max_abs < tol, max_dev < tol, tol)
