import math

import numpy as np
import pytest

from subrig.catalog import catalog
from subrig.errors import CharacteristicEncountered, CharacteristicPoint, EmptyGrid, NotCarnot, RayRecrossing
from subrig.flows import (
    _rk4,
    chord_deviation,
    check_pushforward,
    cone_volume,
    dilate,
    flow_from_config,
    generator,
    hg_convexity_test,
    homogeneous_dimension,
    integrate_horizontal_geodesic,
    integrate_ruling,
    planar_curvatures,
    surface_curve_acceleration,
    verify_constancy,
    volume_scaling_check,
)
from subrig.hypersurface import Patch, horizontal_frame_at
from subrig.structure import load_structure

from conftest import catalog_structures, surf, surface_points

TWISTED = {
    "coords": ["x", "y", "z"],
    "horizontal": [["1", "0", "0"], ["0", "exp(x)", "0"]],
    "vertical": [["0", "0", "1"]],
    "partition": ["A"],
}


def test_geodesic_along_x_axis(h1):
    states = integrate_horizontal_geodesic(h1, [0, 0, 0], [1, 0], 1.0, 1e-2)
    np.testing.assert_allclose(states[-1].point, [1, 0, 0], atol=1e-14)
    assert all(np.allclose(st.tangent, [1, 0]) for st in states)


def test_diagonal_geodesic_projects_to_a_line(h1):
    u = np.array([1.0, 1.0]) / math.sqrt(2)
    states = integrate_horizontal_geodesic(h1, [0, 0, 0], u, 1.0, 1e-2)
    pts = np.array([st.point for st in states])
    assert chord_deviation(pts[:, :2]) < 1e-14
    assert states[-1].arclength == pytest.approx(1.0)


def test_zero_length_geodesic(h1):
    states = integrate_horizontal_geodesic(h1, [0.1, 0.2, 0.3], [0, 1], 0.0)
    assert len(states) == 1
    np.testing.assert_array_equal(states[0].point, [0.1, 0.2, 0.3])


def test_geodesic_speed_drift_on_twisted_structure():
    s = load_structure(TWISTED)
    p, u = np.zeros(3), np.array([0.6, 0.8])
    worst = 0.0
    for _ in range(1000):
        p, u = _rk4(s, p, u, 1e-3)
        worst = max(worst, abs(np.linalg.norm(u) - 1.0))
        u = u / np.linalg.norm(u)
    assert worst < 1e-9


def test_ruling_on_minimal_saddle(h1):
    res = integrate_ruling(h1, surf(h1, "x*y/2 - t"), [1, 1, 0.5], 1.0, 1e-3)
    pts = np.array([st.point for st in res.states])
    assert res.max_phi < 10 * 1e-3**2
    assert res.max_curvature_residual < 1e-5
    assert chord_deviation(pts[:, :2]) < 1e-5


def test_cmc_ruling_on_cylinder(h1):
    res = integrate_ruling(h1, surf(h1, "1 - x^2 - y^2"), [1, 0, 0], 1.0, 1e-3, rho=1.0)
    k = np.abs(planar_curvatures(np.array([st.point for st in res.states])[:, :2]))
    assert np.all(np.abs(k - 1.0) < 1e-4)
    assert res.max_phi < 1e-9


def test_ruling_from_characteristic_seed(h1):
    with pytest.raises(CharacteristicEncountered):
        integrate_ruling(h1, surf(h1, "t"), [0, 0, 0], 1.0)


def test_ruling_requires_rank_two(hxr):
    with pytest.raises(ValueError):
        integrate_ruling(hxr, surf(hxr, "x*y/2 - t - s"), [1, 1, 0.5, 0], 0.1)


def test_homogeneous_dimensions():
    assert homogeneous_dimension(catalog("heisenberg1").flow) == 4
    assert homogeneous_dimension(catalog("hxr").flow) == 5
    for m in (1, 2, 3):
        g = "x" if m == 1 else f"x^{m}"
        assert homogeneous_dimension(catalog("martinet", f="0", g=g, degree=m).flow) == m + 3


def test_dilation_examples():
    m1 = catalog("martinet", f="0", g="x", degree=1)
    np.testing.assert_allclose(dilate(m1.flow, [1, 1, 1], 2.0), [2, 2, 4])
    h = catalog("heisenberg1")
    np.testing.assert_allclose(dilate(h.flow, [1.0, -2.0, 3.0], 0.5), [0.5, -1.0, 0.75])
    with pytest.raises(ValueError):
        dilate(h.flow, [0, 0, 0], 0.0)
    np.testing.assert_allclose(generator(h.flow, [1.0, 2.0, 3.0]), [1, 2, 6])


def test_dilation_group_law(rng):
    for s in catalog_structures():
        if s.flow is None:
            continue
        for p in rng.uniform(-2, 2, (50, s.dim)):
            assert np.max(np.abs(dilate(s.flow, p, 1.0) - p)) < 1e-12
            lam, mu = rng.uniform(0.2, 3.0, 2)
            lhs = dilate(s.flow, dilate(s.flow, p, mu), lam)
            assert np.max(np.abs(lhs - dilate(s.flow, p, lam * mu))) < 1e-9


def test_pushforward_conditions(rng):
    for s in catalog_structures():
        if s.flow is not None:
            assert check_pushforward(s, s.flow, rng.uniform(-1, 1, (5, s.dim))) < 1e-12, s.name


def test_user_declared_flow():
    s = catalog("heisenberg1")
    flow = flow_from_config({"map": ["lam*x", "lam*y", "lam^2*t"], "gammas": [2]}, s)
    assert flow.Q == 4
    assert check_pushforward(s, flow, [np.array([0.3, 0.4, -1.0])]) < 1e-12


def test_volume_scaling():
    h = catalog("heisenberg1")
    ratio, expected = volume_scaling_check(h, h.flow, [(1, 2), (1, 2), (1, 2)], 2.0)
    assert expected == 16.0 and abs(ratio / expected - 1) < 1e-6
    assert volume_scaling_check(h, h.flow, [(1, 2), (1, 2), (1, 2)], 1.0)[0] == pytest.approx(1.0)
    m1 = catalog("martinet", f="0", g="x", degree=1)
    ratio, expected = volume_scaling_check(m1, m1.flow, [(1, 2), (1, 2), (1, 2)], 0.5)
    assert abs(ratio / 0.5**4 - 1) < 1e-6


def test_cone_volume_plane_patch(h1):
    patch = Patch.from_strings(["u", "v"], ["u", "v", "1"], [(0.2, 0.8), (0.2, 0.8)])
    via_mu, via_solid = cone_volume(h1, h1.flow, surf(h1, "t - 1"), patch, order=8)
    assert via_mu == pytest.approx(0.18, rel=1e-12)
    assert abs(via_mu - via_solid) / abs(via_solid) < 1e-3


def test_cone_volume_degenerate_and_dilation_ruled(h1):
    flat = Patch.from_strings(["u", "v"], ["u", "v", "1"], [(0.2, 0.2), (0.2, 0.8)])
    assert cone_volume(h1, h1.flow, surf(h1, "t - 1"), flat) == (0.0, 0.0)
    # t = x^2 is invariant under (x, y, t) -> (lx, ly, l^2 t), so it is foliated by dilation curves
    cone = Patch.from_strings(["u", "v"], ["u", "v", "u^2"], [(0.2, 0.8), (0.2, 0.8)])
    via_mu, _ = cone_volume(h1, h1.flow, surf(h1, "t - x^2"), cone, check_rays=False)
    assert abs(via_mu) < 1e-9


def test_cone_volume_detects_recrossing(h1):
    sphere = surf(h1, "(x-2)^2 + y^2 + t^2 - 1")
    patch = Patch.from_strings(
        ["u", "v"], ["2 + cos(u)*cos(v)", "sin(u)*cos(v)", "sin(v)"], [(-0.1, 0.1), (-0.1, 0.1)]
    )
    with pytest.raises(RayRecrossing):
        cone_volume(h1, h1.flow, sphere, patch, order=4)


def test_convexity_plane_is_flat(h1):
    v = hg_convexity_test(h1, surf(h1, "x"), [0, 1, 0.5])
    assert v.verdict == "LocallyOneSided" and v.sign == "flat"
    assert max(abs(v.min_c0), abs(v.max_c0)) < 1e-9


def test_convexity_hxr_minimal_surface_is_two_sided(hxr):
    v = hg_convexity_test(hxr, surf(hxr, "x*y/2 - t - s"), [0.7, 1, 0.1, 0.25])
    assert v.verdict == "TwoSided"


def test_convexity_sphere_is_one_sided(h1):
    v = hg_convexity_test(h1, surf(h1, "x^2 + y^2 + t^2 - 1"), [0.6, 0, 0.8])
    assert v.verdict == "LocallyOneSided" and v.sign == "-"


def test_convexity_errors(h1):
    with pytest.raises(CharacteristicPoint):
        hg_convexity_test(h1, surf(h1, "t"), [0, 0, 0])
    m = catalog("martinet", f="0", g="x^2")
    with pytest.raises(NotCarnot):
        hg_convexity_test(m, surf(m, "x"), [0, 0, 0])


def test_convexity_is_deterministic(h1):
    a = hg_convexity_test(h1, surf(h1, "x^2 + y^2 + t^2 - 1"), [0.6, 0, 0.8], directions=4)
    b = hg_convexity_test(h1, surf(h1, "x^2 + y^2 + t^2 - 1"), [0.6, 0, 0.8], directions=4)
    assert a.traces == b.traces


def test_verify_constancy(h1, hxr, rng):
    sf = surf(hxr, "x*y/2 - t - s")
    assert verify_constancy(hxr, sf, surface_points(hxr, sf, 10, rng)).minimal
    sf = surf(h1, "x*y/2 + sin(x) - t")
    assert verify_constancy(h1, sf, surface_points(h1, sf, 10, rng)).minimal
    cyl = surf(h1, "1 - x^2 - y^2")
    grid = [[math.cos(a), math.sin(a), z] for a in np.linspace(0, 6, 7) for z in (-1, 0, 1)]
    rep = verify_constancy(h1, cyl, grid)
    assert rep.cmc and not rep.minimal and abs(abs(rep.rho_hat) - 1) < 1e-4


def test_verify_constancy_excludes_characteristic_points(h1):
    rep = verify_constancy(h1, surf(h1, "t"), [[0, 0, 0], [1, 0, 0]])
    assert rep.excluded == [[0.0, 0.0, 0.0]]
    with pytest.raises(EmptyGrid):
        verify_constancy(h1, surf(h1, "t"), [[0, 0, 0]])


def test_curve_acceleration_is_tangent_independent_of_bend(hxr):
    sf = surf(hxr, "x^2 + y^2 + s^2 + t^2 - 2")
    p = np.array([1.0, 0.5, 0.5, math.sqrt(2 - 1.5)])
    f = horizontal_frame_at(hxr, sf, p)
    d = f.tangent_frame[0]
    a0 = surface_curve_acceleration(hxr, sf, p, d) @ f.nu
    a1 = surface_curve_acceleration(hxr, sf, p, d, bend=np.ones((3, 4))) @ f.nu
    assert abs(a0 - a1) < 1e-6
