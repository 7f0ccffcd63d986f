import math

import numpy as np
import pytest

from subrig.errors import CharacteristicPoint, OffSurface, PatchOffSurface, RegularityError
from subrig.hypersurface import (
    Hypersurface,
    Patch,
    characteristic_locus,
    horizontal_frame_at,
    horizontal_normal_section,
    perimeter,
    riemannian_normal,
)
from subrig.structure import frame_matrix

from conftest import surf, surface_points


def test_riemannian_normal_examples(h1, hxr):
    nu_g, _ = riemannian_normal(h1, surf(h1, "t"), [0, 0, 0])
    np.testing.assert_allclose(nu_g, [0, 0, 1])
    nu_g, _ = riemannian_normal(h1, surf(h1, "x"), [0, 3, 5])
    np.testing.assert_allclose(nu_g, [1, 0, 0])
    nu_g, norm = riemannian_normal(hxr, surf(hxr, "x*y/2 - t - s"), [0, 1, 0, 0])
    np.testing.assert_allclose(nu_g * norm, [1, 0, -1, -1], atol=1e-15)


def test_orientation_flips_normal(h1):
    a, _ = riemannian_normal(h1, surf(h1, "x"), [0, 1, 2])
    b, _ = riemannian_normal(h1, surf(h1, "x", orientation=-1), [0, 1, 2])
    np.testing.assert_allclose(a, -b)


def test_errors(h1):
    with pytest.raises(OffSurface):
        riemannian_normal(h1, surf(h1, "x"), [0.5, 0, 0])
    with pytest.raises(RegularityError):
        riemannian_normal(h1, surf(h1, "x^2 + y^2 + t^2"), [0, 0, 0])
    with pytest.raises(ValueError):
        Hypersurface.from_string("x", h1.coords, orientation=2)


def test_hxr_horizontal_normal(hxr):
    f = horizontal_frame_at(hxr, surf(hxr, "x*y/2 - t - s"), [1, 1, 0.5, 0])
    r = 1 / math.sqrt(2)
    np.testing.assert_allclose(f.nu, [r, 0, -r], atol=1e-15)
    assert not f.characteristic


def test_characteristic_and_plane_frames(h1):
    f = horizontal_frame_at(h1, surf(h1, "t"), [0, 0, 0])
    assert f.characteristic and f.nu is None
    f = horizontal_frame_at(h1, surf(h1, "x"), [0, 3, 5])
    np.testing.assert_allclose(f.nu, [1, 0])
    assert f.hnorm == pytest.approx(1.0)
    np.testing.assert_allclose(f.tangent_frame, [[0, 1]])


@pytest.mark.parametrize("phi", ["x*y/2 - t", "x^2 + y^2 + t^2 - 1", "t - x^3 + sin(y)"])
def test_frame_is_orthonormal_and_tangent(h1, phi, rng):
    sf = surf(h1, phi)
    for p in surface_points(h1, sf, 10, rng):
        f = horizontal_frame_at(h1, sf, p)
        basis = np.vstack([f.nu, f.tangent_frame])
        np.testing.assert_allclose(basis @ basis.T, np.eye(2), atol=1e-12)
        np.testing.assert_allclose(f.tangent_frame @ f.nu_g[:2], 0, atol=1e-12)


def test_gram_schmidt_seed_order(hxr):
    # nu = (y X1 - X3)/r with y = 3: largest |component| is X1, so seeds are X2 then X3
    f = horizontal_frame_at(hxr, surf(hxr, "x*y/2 - t - s"), [0, 3, 0, 0])
    np.testing.assert_allclose(f.tangent_frame[0], [0, 1, 0], atol=1e-15)


def test_normal_extension_matches_finite_differences(h1):
    sf = surf(h1, "x^2 + y^2 + t^2 - 1")
    p = np.array([0.6, 0.0, 0.8])
    sec = horizontal_normal_section(h1, sf, p)
    for l in range(3):
        dp = np.zeros(3)
        dp[l] = 1e-6
        plus = horizontal_normal_section(h1, sf, p + dp, on_surface_tol=1.0).values
        minus = horizontal_normal_section(h1, sf, p - dp, on_surface_tol=1.0).values
        np.testing.assert_allclose(sec.jacobian[:, l], (plus - minus) / 2e-6, atol=1e-8)


def test_perimeter_of_unit_patch(h1):
    patch = Patch.from_strings(["u", "v"], ["0", "u", "v"], [(0, 1), (0, 1)])
    assert abs(perimeter(h1, surf(h1, "x"), patch) - 1.0) < 1e-9


def test_perimeter_of_disk(h1):
    patch = Patch.from_strings(["r", "a"], ["r*cos(a)", "r*sin(a)", "0"], [(0, 1), (0, 2 * math.pi)])
    assert abs(perimeter(h1, surf(h1, "t"), patch, order=16) - math.pi / 3) < 1e-6


def test_perimeter_rejects_off_surface_patch(h1):
    patch = Patch.from_strings(["u", "v"], ["0.1*u", "u", "v"], [(0, 1), (0, 1)])
    with pytest.raises(PatchOffSurface):
        perimeter(h1, surf(h1, "x"), patch)


def test_characteristic_locus(h1, hxr):
    grid = [np.array([x, y, 0.3]) for x in (-0.5, 0.0, 0.5) for y in (-0.5, 0.0, 0.5)]
    loc = characteristic_locus(h1, surf(h1, "t"), grid)
    assert [0.0, 0.0, 0.0] in loc.points and len(loc.points) == 1
    assert characteristic_locus(h1, surf(h1, "x"), grid).points == []
    grid4 = [np.array([x, y, 0.0, 0.0]) for x in (-1, 0, 1) for y in (0.1, 0.5, -2)]
    loc = characteristic_locus(hxr, surf(hxr, "x*y/2 - t - s"), grid4)
    assert loc.points == [] and loc.min_hnorm > 0.5
