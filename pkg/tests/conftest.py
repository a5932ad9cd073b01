"""
Shared fixtures: small grids, fast learner settings and simulated datasets
"""
import numpy as np
import pytest

from stdml.models.dataset import GridDataset
from stdml.models.lattice import Grid
from stdml.schemas.learner import LearnerConfig
from stdml.schemas.simulation import BlockSimConfig, PixelSimConfig
from stdml.services.lattice_service import LatticeService
from stdml.services.simulation_service import SimulationService


@pytest.fixture
def fast_learner() -> LearnerConfig:
    """Few trees and draws; enough for structural checks"""
    return LearnerConfig(n_trees=20, burn_in=20, kept_draws=30, seed=7)


@pytest.fixture
def small_grid() -> Grid:
    return LatticeService.unit_square_grid(8)


@pytest.fixture
def pixel_sim():
    """16 x 16 pixel-design replicate with mild treatment logits"""
    config = PixelSimConfig(m=16, nu=2.0, logit_temperature=10.0, seed=11)
    return SimulationService.simulate_pixel(config)


@pytest.fixture
def block_sim():
    """16 x 16 block-design replicate (16 blocks of 4 x 4)"""
    config = BlockSimConfig(m=16, nu=2.0, logit_temperature=10.0, seed=5)
    return SimulationService.simulate_block(config)


def make_dataset(
    m: int = 8,
    seed: int = 0,
    p: int = 2,
    gamma: float = 1.0,
    missing: float = 0.0,
    blocks: bool = False,
) -> GridDataset:
    """Random linear dataset on an m x m unit-square grid"""
    rng = np.random.default_rng(seed)
    grid = LatticeService.unit_square_grid(m)
    X = rng.standard_normal((grid.n, p))
    d = (rng.random(grid.n) < 0.5).astype(np.int64)
    d[0], d[1] = 0, 1
    base = X.sum(axis=1) if p else np.zeros(grid.n)
    y0 = base + rng.standard_normal(grid.n)
    y1 = base + 0.5 + gamma * d + rng.standard_normal(grid.n)
    if missing:
        y0[rng.random(grid.n) < missing] = np.nan
        y1[rng.random(grid.n) < missing] = np.nan
    return GridDataset(
        grid=grid,
        y0=y0,
        y1=y1,
        d=d,
        X=X,
        covariate_names=[f"X{j + 1}" for j in range(p)],
        blocks=LatticeService.block_partition(grid, 4, 4) if blocks else None,
    )


@pytest.fixture
def linear_dataset() -> GridDataset:
    return make_dataset(m=8, seed=3)
