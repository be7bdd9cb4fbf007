import numpy as np
import pytest

from rarewave.euler2d import FlowField, Grid, clamped_fan_profile
from rarewave.gas import PolytropicGas, density_from_sound_speed

GAS2 = PolytropicGas(2.0, 0.5)


def fan_field(gas, grid, t, v0=0.0, c0=1.0, u_glue=1.9):
    """Exact clamped-fan flow field sampled at cell centers."""
    X1, _ = grid.mesh()
    v1, c = clamped_fan_profile(gas, v0, c0, u_glue, X1, t)
    rho = density_from_sound_speed(gas, c)
    return FlowField(gas, grid, t, rho, rho * v1, np.zeros_like(rho))


def small_grid(n1=128, n2=16, x1_min=-2.4, x1_max=2.2):
    return Grid(n1=n1, n2=n2, x1_min=x1_min, x1_max=x1_max)


@pytest.fixture
def gas2():
    return GAS2
