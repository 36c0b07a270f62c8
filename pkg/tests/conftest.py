"""Shared fixtures: jit warm-up and the acceptance report section."""

import numpy as np
import pytest

from wilsoncg import backend, lattice, stream, wilson

_ACCEPTANCE_LINES = []


def record_criterion(number, title, ok, detail):
    """Collect one acceptance line; printed in the terminal summary."""
    status = "PASS" if ok else "FAIL"
    _ACCEPTANCE_LINES.append(
        f"criterion {number:2d} {status}  {title}: {detail}"
    )


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile/load every kernel path once so no test times jit work."""
    geom = lattice.LatticeGeometry((4, 4, 4, 4))
    u = lattice.GaugeField.identity(geom)
    params = wilson.WilsonParams(0.1)
    for name in backend.available():
        kern = backend.kernels(name)
        nbr = lattice.neighbor_table(geom)
        for dtype in (lattice.HIGH, lattice.LOW):
            psi = lattice.SpinorField.point_source(geom, dtype=dtype)
            ul = u.astype(dtype)
            for dagger in (False, True):
                kern.apply_field(psi.sites, ul.links, nbr, 0.1, dagger)
            kern.stream_field(psi.sites, ul.links, nbr, 0.1,
                              geom.spatial_volume, stream.buffer_capacity(geom))


@pytest.fixture(scope="session")
def geom44():
    return lattice.LatticeGeometry((4, 4, 4, 4))


@pytest.fixture(scope="session")
def u44(geom44):
    return lattice.random_gauge_field(geom44, 2024)


@pytest.fixture(scope="session")
def geom24():
    return lattice.LatticeGeometry((2, 2, 2, 2))


@pytest.fixture(scope="session")
def u24(geom24):
    return lattice.random_gauge_field(geom24, 7)


def rel_diff(a, b):
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    scale = max(float(np.linalg.norm(b)), 1e-300)
    return float(np.linalg.norm(a - b)) / scale
