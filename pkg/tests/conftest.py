import numpy as np
import pytest

from bergman_heat import (SphericalHarmonicTransform, VolumeForm, build_grid,
                          fubini_study_form)


@pytest.fixture(scope="session")
def grid():
    """Grid comfortably exact for p up to 32 plus band-limited densities."""
    return build_grid(48, 96)


@pytest.fixture(scope="session")
def fs_form(grid):
    return fubini_study_form(grid)


@pytest.fixture(scope="session")
def zonal_form(grid):
    return VolumeForm(grid, {(1, 0): -0.3}, form_id="zonal-full")


@pytest.fixture(scope="session")
def tilted_form(grid):
    return VolumeForm(grid, {(1, 1): 0.2, (2, 1): 0.1}, form_id="tilted")


@pytest.fixture(scope="session")
def sht(grid):
    return SphericalHarmonicTransform(grid, 20)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
