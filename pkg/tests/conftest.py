import numpy as np
import pytest

from subrig import catalog as lookup
from subrig.hypersurface import Hypersurface, horizontal_frame_at, project_to_surface

CRITERIA_LINES = []


def record_criterion(number: int, passed: bool, detail: str) -> str:
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    CRITERIA_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA_LINES:
            terminalreporter.write_line(line)


def surface_points(s, surf, count, rng, box=1.0, min_hnorm=1e-3, max_tries=50):
    """Seeded on-surface noncharacteristic points obtained by axis projection."""
    pts = []
    tries = 0
    while len(pts) < count and tries < count * max_tries:
        tries += 1
        try:
            p = project_to_surface(surf, rng.uniform(-box, box, s.dim))
        except Exception:
            continue
        if np.max(np.abs(p)) > 4 * box:
            continue
        frame = horizontal_frame_at(s, surf, p)
        if frame.characteristic or frame.hnorm < min_hnorm:
            continue
        pts.append(p)
    return pts


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


@pytest.fixture(scope="session")
def h1():
    return lookup("heisenberg1")


@pytest.fixture(scope="session")
def hxr():
    return lookup("hxr")


def catalog_structures():
    return [
        lookup("heisenberg1"),
        lookup("heisenbergN", n=2),
        lookup("hxr"),
        lookup("martinet", f="0", g="x^2"),
        lookup("martinet", f="0", g="x", degree=1),
        lookup("engel"),
    ]


def surf(s, phi, orientation=1):
    return Hypersurface.from_string(phi, s.coords, orientation)
