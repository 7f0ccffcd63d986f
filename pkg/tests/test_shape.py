import math

import numpy as np
import pytest

from subrig.errors import CharacteristicPoint, NonTangentDirection, OffSurface
from subrig.hypersurface import horizontal_frame_at
from subrig.shape import (
    HorizontalShape,
    classify,
    curve_horizontal_curvature,
    divergence_oracle,
    eigenvalues,
    mean_curvature,
    meusnier_curvature,
    principal_directions,
    second_fundamental_form,
)

from conftest import catalog_structures, surf, surface_points


def _hxr_point(x, y, t):
    return np.array([x, y, t, x * y / 2 - t])


def test_hxr_shape_at_y_one(hxr):
    sh = second_fundamental_form(hxr, surf(hxr, "x*y/2 - t - s"), _hxr_point(1.0, 1.0, 0.5))
    assert abs(sh.h) < 1e-14
    assert all(abs(e) < 1e-14 for e in sh.eigen)
    assert np.linalg.norm(sh.ii0 @ sh.ii0) < 1e-14
    assert np.linalg.matrix_rank(sh.ii0) == 1
    # hand value: one off-diagonal entry 1/(1+y^2) in the frame (X2, (X1 + y X3)/r)
    assert np.linalg.norm(sh.ii0) == pytest.approx(0.5)


def test_plane_x_is_flat(h1):
    sh = second_fundamental_form(h1, surf(h1, "x"), [0, 2, 1])
    np.testing.assert_array_equal(sh.ii0, [[0.0]])
    assert sh.classification == "Flat"


@pytest.mark.parametrize("phi", ["x*y/2 + x^3/3 - t", "t - x*y/2", "x*y/2 + sin(x) - t"])
def test_minimal_family(h1, phi, rng):
    sf = surf(h1, phi)
    for p in surface_points(h1, sf, 20, rng):
        assert abs(mean_curvature(h1, sf, p)) < 1e-10


def test_cylinder_matches_divergence(h1):
    sf = surf(h1, "x^2 + y^2 - 1")
    p = [1.0, 0.0, 0.7]
    assert mean_curvature(h1, sf, p) == pytest.approx(1.0)
    assert abs(mean_curvature(h1, sf, p) - divergence_oracle(h1, sf, p)) < 1e-6


def test_minimal_catalog_surfaces_have_zero_divergence(h1, hxr, rng):
    for s, phi in ((h1, "x*y/2 - t"), (h1, "x"), (hxr, "x*y/2 - t - s")):
        sf = surf(s, phi)
        for p in surface_points(s, sf, 5, rng):
            assert abs(divergence_oracle(s, sf, p)) < 1e-6


def test_characteristic_and_off_surface(h1):
    with pytest.raises(CharacteristicPoint):
        second_fundamental_form(h1, surf(h1, "t"), [0, 0, 0])
    with pytest.raises(CharacteristicPoint):
        divergence_oracle(h1, surf(h1, "t"), [0, 0, 0])
    with pytest.raises(OffSurface):
        second_fundamental_form(h1, surf(h1, "x"), [1, 0, 0])


def test_invariants_on_random_surfaces(rng):
    structures = catalog_structures()
    phis = {
        "heisenberg1": ["x^2 + y^2 + t^2 - 1", "t - x^3 + y"],
        "heisenberg2": ["x1^2 + y2^2 + t^2 + x2 - 1"],
        "hxr": ["x^2 + y^2 + s^2 + t^2 - 2", "t - s^2 + x*y"],
        "engel": ["x1^2 + x2^2 + x3 - x4 - 1"],
    }
    for s in structures:
        for phi in phis.get(s.name, []):
            sf = surf(s, phi)
            for p in surface_points(s, sf, 4, rng):
                sh = second_fundamental_form(s, sf, p)
                assert abs(sh.h - sum(e.real for e in sh.eigen)) < 1e-10
                assert sorted(sh.kappas) == sorted(e.real for e in sh.eigen)
                koszul = second_fundamental_form(s, sf, p, method="koszul")
                np.testing.assert_allclose(koszul.ii0, sh.ii0, atol=1e-10)
                rescaled = second_fundamental_form(s, sf, p, extension="rescaled")
                np.testing.assert_allclose(rescaled.ii0, sh.ii0, atol=1e-12)
                assert sh.classification in (
                    "PositiveDefinite", "PositiveSemidefinite", "NegativeDefinite",
                    "NegativeSemidefinite", "MixedSign", "Flat", "Indeterminate",
                )


def test_eigenvalues_closed_form_and_general():
    assert eigenvalues(np.array([[2.0, 0.0], [0.0, 3.0]])) == (3 + 0j, 2 + 0j)
    vals = eigenvalues(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    assert sorted(v.imag for v in vals) == [-1.0, 1.0]
    m = np.diag([1.0, -2.0, 0.5])
    assert sorted(v.real for v in eigenvalues(m)) == [-2.0, 0.5, 1.0]


@pytest.mark.parametrize(
    "mat,expected",
    [
        ([[2, 0], [0, 1]], "PositiveDefinite"),
        ([[1, 0], [0, 0]], "PositiveSemidefinite"),
        ([[-2, 0], [0, -1]], "NegativeDefinite"),
        ([[-1, 0], [0, 0]], "NegativeSemidefinite"),
        ([[1, 0], [0, -1]], "MixedSign"),
        ([[0, 0], [0, 0]], "Flat"),
        ([[0, 1], [0, 0]], "Flat"),
        ([[0, 1], [-1, 0]], "Flat"),
    ],
)
def test_classify(mat, expected):
    m = np.array(mat, dtype=float)
    kappas = sorted((e.real for e in eigenvalues(m)), reverse=True)
    assert classify(m, kappas) == expected


def _shape(mat):
    m = np.array(mat, dtype=float)
    eig = eigenvalues(m)
    kap = tuple(sorted((e.real for e in eig), reverse=True))
    return HorizontalShape((0,), m, float(np.trace(m)), kap, eig, classify(m, kap), None, np.eye(len(m)))


def test_principal_directions_jordan():
    dirs = principal_directions(_shape([[0, 0.5], [0, 0]]))
    assert len(dirs) == 1
    d = dirs[0]
    assert d.kappa == 0 and d.multiplicity == 2 and d.deficient
    assert len(d.vectors) == 1
    np.testing.assert_allclose(np.abs(d.vectors[0]), [1, 0], atol=1e-12)


def test_principal_directions_diagonal_and_rotation():
    dirs = principal_directions(_shape([[2, 0], [0, 3]]))
    assert [d.kappa for d in dirs] == [3.0, 2.0]
    np.testing.assert_allclose(np.abs(dirs[0].vectors[0]), [0, 1])
    np.testing.assert_allclose(np.abs(dirs[1].vectors[0]), [1, 0])
    dirs = principal_directions(_shape([[0, 1], [-1, 0]]))
    assert len(dirs) == 1 and dirs[0].kappa == 0.0 and len(dirs[0].vectors) == 2


def test_curve_curvature_checks_tangency(hxr):
    sf = surf(hxr, "x*y/2 - t - s")
    p = _hxr_point(1.0, 1.0, 0.5)
    f = horizontal_frame_at(hxr, sf, p)
    with pytest.raises(NonTangentDirection):
        curve_horizontal_curvature(hxr, sf, p, f.nu, np.zeros(3))
    assert curve_horizontal_curvature(hxr, sf, p, f.tangent_frame[0], 2.0 * f.nu) == pytest.approx(2.0)
    sh = second_fundamental_form(hxr, sf, p)
    assert meusnier_curvature(sh, [1.0, 0.0]) == 0.0
