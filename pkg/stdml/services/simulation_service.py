"""
Simulation service - pixel-level and block-level designs with known treatment
effect, and a smooth-plus-local-error panel with exact first-stage oracles
"""
import logging
from typing import Tuple, Union

import numpy as np
from scipy.special import expit

from stdml.core.constants import SIM_GAMMA, SIM_MAX_REGENERATIONS, SIM_NUM_COVARIATES
from stdml.core.exceptions import NumericalError, ShapeError
from stdml.models.dataset import FirstStagePredictions, GridDataset, ResidualPanel, TruthRecord
from stdml.models.lattice import BlockPartition, Grid, NeighborScheme
from stdml.schemas.simulation import BlockSimConfig, PixelSimConfig
from stdml.services.dml_service import DMLService
from stdml.services.field_service import GaussianFieldService
from stdml.services.lattice_service import LatticeService

logger = logging.getLogger(__name__)


def _columns(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != SIM_NUM_COVARIATES:
        raise ShapeError("covariate vectors need five entries", expected=SIM_NUM_COVARIATES, actual=x.shape)
    return x


class SimulationService:
    """Service class for the simulation designs"""

    @staticmethod
    def h1(x: np.ndarray) -> Union[float, np.ndarray]:
        """Treatment logit: sin(pi x1 x2) + 20 (x3 - 0.5)^2 + 10 x4 + 5 x5"""
        x = _columns(x)
        out = (
            np.sin(np.pi * x[..., 0] * x[..., 1])
            + 20.0 * (x[..., 2] - 0.5) ** 2
            + 10.0 * x[..., 3]
            + 5.0 * x[..., 4]
        )
        return float(out) if np.ndim(out) == 0 else out

    @staticmethod
    def h2(t: int, x: np.ndarray, d: Union[int, np.ndarray], gamma: float = SIM_GAMMA) -> Union[float, np.ndarray]:
        """Outcome mean: x1 + t x1 + 3 x4 + 5 t x5 + gamma t d"""
        x = _columns(x)
        out = x[..., 0] + t * x[..., 0] + 3.0 * x[..., 3] + 5.0 * t * x[..., 4] + gamma * t * np.asarray(d, dtype=float)
        return float(out) if np.ndim(out) == 0 else out

    @staticmethod
    def block_means(values: np.ndarray, blocks: BlockPartition) -> np.ndarray:
        """Per-block means of each column (G x columns)"""
        values = np.asarray(values, dtype=float)
        flat = values.reshape(len(blocks.labels), -1)
        sizes = blocks.sizes().astype(float)
        sums = np.stack(
            [np.bincount(blocks.labels, weights=flat[:, j], minlength=blocks.G + 1)[1:] for j in range(flat.shape[1])],
            axis=1,
        )
        means = sums / sizes[:, None]
        return means if values.ndim > 1 else means[:, 0]

    @staticmethod
    def _covariates(grid: Grid, config: PixelSimConfig, seed: int) -> np.ndarray:
        spec = GaussianFieldService.make_spec(config.rho, config.nu)
        fields = GaussianFieldService.sample_covariates(grid, spec, count=SIM_NUM_COVARIATES, seed=seed)
        return np.column_stack([f.values for f in fields])

    @staticmethod
    def _mask(rng: np.random.Generator, n: int, frac: float) -> Tuple[np.ndarray, np.ndarray]:
        """Exactly round(frac * 2n) of the 2n outcome cells, chosen completely at random"""
        missing = np.zeros(2 * n, dtype=bool)
        count = int(round(frac * 2 * n))
        if count:
            missing[rng.choice(2 * n, size=count, replace=False)] = True
        return missing[:n], missing[n:]

    @staticmethod
    def _attempt_seeds(seed: int):
        """Sub-seeds for the first draw and every regeneration"""
        for attempt in range(SIM_MAX_REGENERATIONS + 1):
            yield attempt, int(np.random.SeedSequence([int(seed), attempt]).generate_state(1)[0])

    @staticmethod
    def _finish(
        grid: Grid,
        config: PixelSimConfig,
        covariates: np.ndarray,
        d: np.ndarray,
        propensity: np.ndarray,
        intercepts: np.ndarray,
        rng: np.random.Generator,
        blocks=None,
        attempt: int = 0,
        scenario: str = "",
    ) -> Tuple[GridDataset, TruthRecord]:
        noise_sd = np.sqrt(config.sigma2)
        y0 = intercepts + SimulationService.h2(0, covariates, d, config.gamma) + noise_sd * rng.standard_normal(grid.n)
        y1 = intercepts + SimulationService.h2(1, covariates, d, config.gamma) + noise_sd * rng.standard_normal(grid.n)
        miss0, miss1 = SimulationService._mask(rng, grid.n, config.missing_frac)
        y0[miss0] = np.nan
        y1[miss1] = np.nan

        p = config.p_observed
        data = GridDataset(
            grid=grid,
            y0=y0,
            y1=y1,
            d=d,
            X=covariates[:, :p].copy(),
            covariate_names=[f"X{j + 1}" for j in range(p)],
            blocks=blocks,
        )
        oracle = FirstStagePredictions(
            y0_hat=intercepts + SimulationService.h2(0, covariates, 0, config.gamma),
            y1_hat=intercepts + SimulationService.h2(1, covariates, 0, config.gamma) + config.gamma * propensity,
            d_hat=propensity,
            feature_names=[f"X{j + 1}" for j in range(SIM_NUM_COVARIATES)],
        )
        truth = TruthRecord(
            scenario=scenario,
            gamma=config.gamma,
            seed=config.seed,
            covariates=covariates,
            propensity=propensity,
            block_effects=intercepts if blocks is not None else None,
            oracle=oracle,
            regenerations=attempt,
        )
        if attempt:
            logger.warning(
                f"Degenerate treatment regenerated {attempt} time(s)",
                extra={"seed": config.seed, "regenerations": attempt},
            )
        return data, truth

    @staticmethod
    def simulate_pixel(config: PixelSimConfig) -> Tuple[GridDataset, TruthRecord]:
        """Five Matérn covariates, Bernoulli(expit(h1)) treatment, Y_t = h2 + noise, masked cells"""
        grid = LatticeService.unit_square_grid(config.m)
        for attempt, seed in SimulationService._attempt_seeds(config.seed):
            field_seed, draw_seed = (int(s) for s in np.random.SeedSequence(seed).generate_state(2))
            covariates = SimulationService._covariates(grid, config, field_seed)
            rng = np.random.default_rng(draw_seed)
            propensity = expit(SimulationService.h1(covariates) / config.logit_temperature)
            d = (rng.random(grid.n) < propensity).astype(np.int64)
            if 0 < d.sum() < grid.n:
                return SimulationService._finish(
                    grid, config, covariates, d, propensity, np.zeros(grid.n), rng,
                    attempt=attempt, scenario=config.scenario,
                )
        raise NumericalError(
            f"Treatment stayed degenerate after {SIM_MAX_REGENERATIONS} regenerations",
            details={"seed": config.seed},
        )

    @staticmethod
    def simulate_block(config: BlockSimConfig) -> Tuple[GridDataset, TruthRecord]:
        """Block-mean covariates drive one treatment per block; block intercepts alpha_g ~ N(0, tau^2)"""
        grid = LatticeService.unit_square_grid(config.m)
        blocks = LatticeService.block_partition(grid, config.block_side, config.block_side)
        for attempt, seed in SimulationService._attempt_seeds(config.seed):
            field_seed, draw_seed = (int(s) for s in np.random.SeedSequence(seed).generate_state(2))
            covariates = SimulationService._covariates(grid, config, field_seed)
            rng = np.random.default_rng(draw_seed)
            block_x = SimulationService.block_means(covariates, blocks)
            block_p = expit(SimulationService.h1(block_x) / config.logit_temperature)
            block_d = (rng.random(blocks.G) < block_p).astype(np.int64)
            if 0 < block_d.sum() < blocks.G:
                alpha = np.sqrt(config.tau2) * rng.standard_normal(blocks.G)
                index = blocks.labels - 1
                return SimulationService._finish(
                    grid, config, covariates, block_d[index], block_p[index], alpha[index], rng,
                    blocks=blocks, attempt=attempt, scenario=config.scenario,
                )
        raise NumericalError(
            f"Block treatment stayed degenerate after {SIM_MAX_REGENERATIONS} regenerations",
            details={"seed": config.seed},
        )

    @staticmethod
    def simulate_oracle_panel(
        config: PixelSimConfig,
        local_sd: float = 1.0,
        nb_scheme: NeighborScheme = NeighborScheme.QUEEN8,
    ) -> ResidualPanel:
        """
        Smooth components u_0, u_1, u_2 (Matérn fields) plus independent local errors e:
        D = u_2 + e_2, Y_t = u_t + e_t + t gamma D + noise. The first stage is the
        exact smooth part (Yhat_t = u_t + gamma t u_2, Dhat = u_2), so the returned
        residual panel carries only local variation.
        """
        grid = LatticeService.unit_square_grid(config.m)
        spec = GaussianFieldService.make_spec(config.rho, config.nu)
        field_seed, draw_seed = (int(s) for s in np.random.SeedSequence(config.seed).generate_state(2))
        u = np.column_stack([f.values for f in GaussianFieldService.sample_covariates(grid, spec, 3, field_seed)])
        rng = np.random.default_rng(draw_seed)
        e = local_sd * rng.standard_normal((grid.n, 3))
        noise_sd = np.sqrt(config.sigma2)

        d = u[:, 2] + e[:, 2]
        y = [u[:, t] + e[:, t] + t * config.gamma * d + noise_sd * rng.standard_normal(grid.n) for t in (0, 1)]
        miss0, miss1 = SimulationService._mask(rng, grid.n, config.missing_frac)
        y[0][miss0] = np.nan
        y[1][miss1] = np.nan

        rd = d - u[:, 2]
        nb = LatticeService.build_neighborhood(grid, nb_scheme)
        return ResidualPanel(
            r0=y[0] - u[:, 0],
            r1=y[1] - (u[:, 1] + config.gamma * u[:, 2]),
            rd=rd,
            rd_bar=LatticeService.neighbor_mean(rd, nb),
            isolated=LatticeService.isolated_pixels(rd, nb),
        )

    @staticmethod
    def oracle_estimate(data: GridDataset, truth: TruthRecord, config):
        """STDML second stage on the true conditional means of a simulated dataset"""
        return DMLService.run_stdml(data, config, predictions=truth.oracle, method="ORACLE")
