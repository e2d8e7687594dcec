import pytest

from parsym.geometry import Disk, Ellipse, FourierDisk, minkowski_sum_ball
from parsym.solver import solve_torsion


@pytest.fixture(scope="session")
def concentric():
    """Torsion on B_1.5 with inner domain B_1 at h = 1/128."""
    G = Disk((0.0, 0.0), 1.0)
    u, _ = solve_torsion(minkowski_sum_ball(G, 0.5), 1 / 128)
    return G, u


@pytest.fixture(scope="session")
def unit_torsion():
    u, _ = solve_torsion(Disk((0.0, 0.0), 1.0), 1 / 128)
    return u


@pytest.fixture(scope="session")
def ellipse_case():
    G = Ellipse(semi_axes=(1.0, 1.05))
    u, _ = solve_torsion(minkowski_sum_ball(G, 0.5), 1 / 64)
    return G, u


@pytest.fixture(scope="session")
def fourier_case():
    G = FourierDisk(cos={3: 0.05})
    u, _ = solve_torsion(minkowski_sum_ball(G, 0.5), 1 / 64)
    return G, u
