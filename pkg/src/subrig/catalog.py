"""Built-in structures: Heisenberg groups, H x R, Martinet spaces, Carnot groups."""

from __future__ import annotations

import itertools
from typing import Optional, Sequence

import numpy as np

from .errors import CarnotDataError, UnknownCatalogName
from .structure import CarnotData, VectorFieldSpec, VRStructure

# coefficients of ad/(1 - exp(-ad)); the ad^3 term vanishes
_BCH = (1.0, 0.5, 1.0 / 12.0, 0.0)
MAX_STEP = 3


def _fields(rows, coords):
    return tuple(VectorFieldSpec.from_strings(r, coords) for r in rows)


def heisenberg1() -> VRStructure:
    from .flows import diagonal_flow

    coords = ("x", "y", "t")
    s = VRStructure(
        coords=coords,
        horizontal=_fields([["1", "0", "-y/2"], ["0", "1", "x/2"]], coords),
        vertical=_fields([["0", "0", "1"]], coords),
        partition=("V1",),
        name="heisenberg1",
        carnot=make_carnot_data([2, 1], [(0, 1, 2, 1.0)]),
    )
    return _attach(s, diagonal_flow(s, [1, 1, 2], [2]))


def heisenberg(n: int = 1) -> VRStructure:
    """The Heisenberg group H^n with coordinates x1..xn, y1..yn, t."""
    from .flows import diagonal_flow

    n = int(n)
    if n < 1:
        raise ValueError("heisenberg needs n >= 1")
    coords = tuple([f"x{i}" for i in range(1, n + 1)] + [f"y{i}" for i in range(1, n + 1)] + ["t"])
    dim = 2 * n + 1
    rows = []
    for i in range(n):
        row = ["0"] * dim
        row[i] = "1"
        row[-1] = f"-y{i + 1}/2"
        rows.append(row)
    for i in range(n):
        row = ["0"] * dim
        row[n + i] = "1"
        row[-1] = f"x{i + 1}/2"
        rows.append(row)
    vertical = ["0"] * (dim - 1) + ["1"]
    s = VRStructure(
        coords=coords,
        horizontal=_fields(rows, coords),
        vertical=_fields([vertical], coords),
        partition=("V1",),
        name=f"heisenberg{n}",
        carnot=make_carnot_data([2 * n, 1], [(i, n + i, 2 * n, 1.0) for i in range(n)]),
    )
    return _attach(s, diagonal_flow(s, [1] * (2 * n) + [2], [2]))


def hxr() -> VRStructure:
    """H x R with coordinates (x, y, t, s) and frame X1, X2, X3 = d_s, X4 = d_t."""
    from .flows import diagonal_flow

    coords = ("x", "y", "t", "s")
    s = VRStructure(
        coords=coords,
        horizontal=_fields(
            [["1", "0", "-y/2", "0"], ["0", "1", "x/2", "0"], ["0", "0", "0", "1"]], coords
        ),
        vertical=_fields([["0", "0", "1", "0"]], coords),
        partition=("V1",),
        name="hxr",
        # basis in frame order X1, X2, X3 | X4
        carnot=make_carnot_data([3, 1], [(0, 1, 3, 1.0)]),
    )
    return _attach(s, diagonal_flow(s, [1, 1, 2, 1], [2]))


def martinet(f: str = "0", g: str = "x^2", degree: Optional[int] = None) -> VRStructure:
    """Martinet-type space X = d_x + f d_z, Y = d_y + g d_z, T = d_z.

    Pass ``degree`` when ``f`` and ``g`` are jointly homogeneous of that
    degree to attach the dilation (x, y, z) -> (lx, ly, l^(m+1) z).
    """
    from .flows import diagonal_flow

    coords = ("x", "y", "z")
    s = VRStructure(
        coords=coords,
        horizontal=_fields([["1", "0", str(f)], ["0", "1", str(g)]], coords),
        vertical=_fields([["0", "0", "1"]], coords),
        partition=("V1",),
        name=f"martinet({f},{g})",
    )
    if degree is not None:
        m = int(degree)
        s = _attach(s, diagonal_flow(s, [1, 1, m + 1], [m + 1]))
    return s


def engel() -> VRStructure:
    """The Engel group: grading (2, 1, 1), [E1,E2] = E3, [E1,E3] = E4."""
    return carnot(make_carnot_data([2, 1, 1], [(0, 1, 2, 1.0), (0, 2, 3, 1.0)]), name="engel")


def _attach(s: VRStructure, flow) -> VRStructure:
    return VRStructure(**{**s.__dict__, "flow": flow})


# -- Carnot groups -----------------------------------------------------------


def make_carnot_data(grading: Sequence[int], entries) -> CarnotData:
    """Build validated Carnot data from sparse ``(a, b, c, value)`` entries.

    Each entry sets ``[E_a, E_b] = value E_c``; the antisymmetric partner is
    filled in automatically.
    """
    grading = tuple(int(g) for g in grading)
    if any(g < 1 for g in grading) or len(grading) < 2:
        raise CarnotDataError("grading needs at least two nonempty layers")
    n = sum(grading)
    c = np.zeros((n, n, n))
    given = np.zeros((n, n, n), dtype=bool)
    for a, b, d, v in entries:
        if not (0 <= a < n and 0 <= b < n and 0 <= d < n):
            raise CarnotDataError(f"structure constant index out of range: {(a, b, d)}")
        for (i, j, sign) in ((a, b, 1.0), (b, a, -1.0)):
            if given[i, j, d] and c[i, j, d] != sign * v:
                raise CarnotDataError(f"inconsistent structure constants at {(a, b, d)}")
            c[i, j, d] = sign * v
            given[i, j, d] = True
    data = CarnotData(grading, c)
    validate_carnot(data)
    return data


def validate_carnot(data: CarnotData, tol: float = 1e-12) -> None:
    c = data.constants
    n = data.dim
    if c.shape != (n, n, n):
        raise CarnotDataError(f"structure constants have shape {c.shape}, expected {(n, n, n)}")
    if data.step > MAX_STEP:
        raise CarnotDataError(f"step {data.step} exceeds the supported maximum {MAX_STEP}")
    if np.max(np.abs(c + c.transpose(1, 0, 2))) > 0:
        raise CarnotDataError("structure constants are not antisymmetric")
    jac = (
        np.einsum("bcd,ade->abce", c, c)
        + np.einsum("cad,bde->abce", c, c)
        + np.einsum("abd,cde->abce", c, c)
    )
    if np.max(np.abs(jac), initial=0.0) > tol:
        raise CarnotDataError("structure constants violate the Jacobi identity")
    for a, b, d in zip(*np.nonzero(c)):
        la, lb, ld = data.layer_of(a), data.layer_of(b), data.layer_of(d)
        if ld != la + lb + 1:
            raise CarnotDataError(
                f"[E{a}, E{b}] has a component in layer {ld}, expected layer {la + lb + 1}"
            )


def _poly_add(p, q, scale=1.0):
    out = dict(p)
    for mono, v in q.items():
        out[mono] = out.get(mono, 0.0) + scale * v
        if out[mono] == 0.0:
            del out[mono]
    return out


def _ad(vec, c):
    """Apply ``ad_X`` with ``X = sum_i x_i E_i`` to a polynomial vector field."""
    n = len(vec)
    out = [dict() for _ in range(n)]
    for i, comp, d in itertools.product(range(n), range(n), range(n)):
        k = c[i, comp, d]
        if k == 0.0 or not vec[comp]:
            continue
        shifted = {}
        for mono, v in vec[comp].items():
            m = list(mono)
            m[i] += 1
            shifted[tuple(m)] = v
        out[d] = _poly_add(out[d], shifted, k)
    return out


def _render(poly, coords) -> str:
    if not poly:
        return "0"
    terms = []
    for mono in sorted(poly, key=lambda m: (sum(m), tuple(-e for e in m))):
        v = float(poly[mono])
        factors = []
        for name, e in zip(coords, mono):
            if e == 1:
                factors.append(name)
            elif e > 1:
                factors.append(f"{name}^{e}")
        if not factors:
            terms.append(repr(v))
        elif v == 1.0:
            terms.append("*".join(factors))
        elif v == -1.0:
            terms.append("-" + "*".join(factors))
        else:
            terms.append(repr(v) + "*" + "*".join(factors))
    return " + ".join(terms)


def carnot_frame_strings(data: CarnotData, coords: Sequence[str]):
    """Coordinate coefficients of the left-invariant basis in exponential coordinates."""
    n = data.dim
    zero = tuple([0] * n)
    rows = []
    for a in range(n):
        term = [dict() for _ in range(n)]
        term[a] = {zero: 1.0}
        total = [dict(t) for t in term]
        for beta in _BCH[1 : data.step + 1]:
            term = _ad(term, data.constants)
            if beta != 0.0:
                total = [_poly_add(t, s, beta) for t, s in zip(total, term)]
        rows.append([_render(p, coords) for p in total])
    return rows


def carnot(data: CarnotData, coords: Optional[Sequence[str]] = None, name: str = "carnot") -> VRStructure:
    """Left-invariant frame of a Carnot group in exponential coordinates."""
    from .flows import diagonal_flow

    validate_carnot(data)
    n = data.dim
    coords = tuple(coords) if coords else tuple(f"x{i}" for i in range(1, n + 1))
    if len(coords) != n:
        raise CarnotDataError(f"{len(coords)} coordinate names for a {n}-dimensional group")
    rows = carnot_frame_strings(data, coords)
    h = data.grading[0]
    layers = [data.layer_of(i) for i in range(n)]
    s = VRStructure(
        coords=coords,
        horizontal=_fields(rows[:h], coords),
        vertical=_fields(rows[h:], coords),
        partition=tuple(f"V{layers[i]}" for i in range(h, n)),
        name=name,
        carnot=data,
    )
    weights = [layer + 1 for layer in layers]
    return _attach(s, diagonal_flow(s, weights, weights[h:]))


CATALOG_NAMES = ("heisenberg1", "heisenbergN", "hxr", "martinet", "carnot", "engel")


def catalog(name: str, **params) -> VRStructure:
    """Look up a built-in structure by name."""
    if name == "heisenberg1":
        return heisenberg1()
    if name in ("heisenbergN", "heisenberg"):
        return heisenberg(params.get("n", 1))
    if name == "hxr":
        return hxr()
    if name == "martinet":
        return martinet(params.get("f", "0"), params.get("g", "x^2"), params.get("degree"))
    if name == "engel":
        return engel()
    if name == "carnot":
        data = params.get("data")
        if data is None:
            data = make_carnot_data(params["grading"], params["constants"])
        return carnot(data, params.get("coords"))
    raise UnknownCatalogName(f"unknown catalog structure {name!r}")
