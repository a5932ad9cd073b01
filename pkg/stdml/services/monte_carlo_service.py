"""
Monte Carlo service - paired method comparisons over simulated replicates,
metric summaries with Monte Carlo standard errors, tables and presets
"""
import hashlib
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from stdml.core.config import settings
from stdml.core.constants import MAX_METHOD_FAILURE_FRAC, TABLE_COLUMNS
from stdml.core.exceptions import ConfigurationError, StdmlException, SweepAbortedError
from stdml.models.dataset import GridDataset, TruthRecord
from stdml.models.estimate import EffectEstimate
from stdml.models.lattice import NeighborScheme
from stdml.models.method import CrossFitMode, EstimatorKind, FeatureSet, RandomEffectsMode
from stdml.models.summary import MetricSummary, SweepResult
from stdml.schemas.learner import LearnerConfig
from stdml.schemas.method import MethodSpec
from stdml.schemas.simulation import BlockSimConfig, PixelSimConfig
from stdml.services.baseline_service import BaselineService
from stdml.services.dml_service import DMLService
from stdml.services.grid_file_service import GridFileService
from stdml.services.lattice_service import LatticeService
from stdml.services.simulation_service import SimulationService

logger = logging.getLogger(__name__)

Scenario = Union[PixelSimConfig, BlockSimConfig]

SUMMARY_FIELDS = [
    "method", "bias", "mse", "ci_length", "coverage", "n_replicates", "n_failures",
    "bias_se", "mse_se", "ci_length_se", "coverage_se",
]
REPLICATE_FIELDS = [
    "replicate", "method", "gamma_hat", "se", "ci_lower", "ci_upper", "covered", "dataset_hash", "error",
]


def dataset_hash(data: GridDataset) -> str:
    """Digest of every array a method can see"""
    digest = hashlib.sha256()
    for arr in (data.y0, data.y1, data.d, data.X, data.grid.coords):
        digest.update(np.ascontiguousarray(arr, dtype=float).tobytes())
    if data.blocks is not None:
        digest.update(data.blocks.labels.astype(np.int64).tobytes())
    return digest.hexdigest()[:16]


def simulate(scenario: Scenario) -> Tuple[GridDataset, TruthRecord]:
    if isinstance(scenario, BlockSimConfig):
        return SimulationService.simulate_block(scenario)
    return SimulationService.simulate_pixel(scenario)


def evaluate_method(
    spec: MethodSpec,
    data: GridDataset,
    truth: Optional[TruthRecord],
    seed: int,
    learner: Optional[LearnerConfig] = None,
    nb_scheme: NeighborScheme = NeighborScheme.QUEEN8,
    max_workers: Optional[int] = None,
) -> EffectEstimate:
    """One estimator on one dataset; `max_workers` bounds the first-stage pool"""
    if spec.kind == EstimatorKind.OLS:
        return BaselineService.baseline_ols(data)
    if spec.kind == EstimatorKind.DID:
        return BaselineService.baseline_did(data, LatticeService.build_neighborhood(data.grid, nb_scheme))
    config = spec.stdml_config(seed, learner, nb_scheme)
    if spec.kind == EstimatorKind.ORACLE:
        if truth is None:
            raise ConfigurationError("the oracle estimator needs simulated ground truth")
        return DMLService.run_stdml(data, config, predictions=truth.oracle, method=spec.name)
    return DMLService.run_stdml(data, config, method=spec.name, max_workers=max_workers)


def _run_replicate(task: Dict[str, Any]) -> List[Dict[str, Any]]:
    """Generate one dataset and evaluate every method on it (runs in worker processes)"""
    rep = task["replicate"]
    data, truth = simulate(task["scenario"])
    digest = dataset_hash(data)
    method_seeds = np.random.SeedSequence(task["seed"]).generate_state(len(task["methods"]))
    rows = []
    for spec, method_seed in zip(task["methods"], method_seeds):
        row = {"replicate": rep, "method": spec.name, "dataset_hash": digest, "error": ""}
        try:
            est = evaluate_method(
                spec, data, truth, int(method_seed), task["learner"], task["nb_scheme"], task["first_stage_workers"]
            )
            row.update(
                gamma_hat=est.gamma,
                se=est.se,
                ci_lower=est.ci_lower,
                ci_upper=est.ci_upper,
                covered=bool(est.covers(truth.gamma)),
            )
        except StdmlException as exc:
            logger.warning(
                f"{spec.name} failed on replicate {rep}: {exc.message}",
                extra={"method": spec.name, "replicate": rep, "error_code": exc.error_code},
            )
            row.update(gamma_hat=np.nan, se=np.nan, ci_lower=np.nan, ci_upper=np.nan, covered=False, error=exc.message)
        rows.append(row)
    return rows


class MonteCarloService:
    """Service class for Monte Carlo sweeps"""

    @staticmethod
    def summarize(
        method: str,
        estimates: np.ndarray,
        ci_lower: np.ndarray,
        ci_upper: np.ndarray,
        gamma: float,
        n_failures: int = 0,
    ) -> MetricSummary:
        """Metrics over successful replicates; coverage uses each replicate's own interval"""
        est = np.asarray(estimates, dtype=float)
        lower = np.asarray(ci_lower, dtype=float)
        upper = np.asarray(ci_upper, dtype=float)
        R = len(est)
        if R == 0:
            nan = float("nan")
            return MetricSummary(
                method=method, bias=nan, mse=nan, ci_length=nan, coverage=0.0, n_replicates=0,
                n_failures=n_failures, bias_se=nan, mse_se=nan, ci_length_se=nan, coverage_se=nan,
            )
        err = est - gamma
        sq = err ** 2
        length = upper - lower
        covered = (lower <= gamma) & (gamma <= upper)
        coverage = float(covered.mean())

        def mc_se(values: np.ndarray) -> float:
            return float(values.std(ddof=1) / np.sqrt(R)) if R > 1 else float("nan")

        return MetricSummary(
            method=method,
            bias=float(err.mean()),
            mse=float(sq.mean()),
            ci_length=float(length.mean()),
            coverage=coverage,
            n_replicates=R,
            n_failures=n_failures,
            bias_se=mc_se(est),
            mse_se=mc_se(sq),
            ci_length_se=mc_se(length),
            coverage_se=float(np.sqrt(coverage * (1.0 - coverage) / R)),
        )

    @staticmethod
    def run_sweep(
        scenario: Scenario,
        methods: Sequence[MethodSpec],
        n_reps: int,
        seed: int,
        learner: Optional[LearnerConfig] = None,
        nb_scheme: NeighborScheme = NeighborScheme.QUEEN8,
        config: Optional[Dict[str, Any]] = None,
    ) -> SweepResult:
        """
        Every replicate generates one dataset shared by all methods. Replicate seeds
        come from the master seed, so serial and parallel schedules agree.
        """
        if n_reps < 2:
            raise ConfigurationError(f"a sweep needs at least 2 replicates, got {n_reps}")
        if not methods:
            raise ConfigurationError("a sweep needs at least one method")
        names = [m.name for m in methods]
        if len(set(names)) != len(names):
            raise ConfigurationError("method names must be unique", details={"methods": names})
        if any(m.needs_blocks for m in methods) and not isinstance(scenario, BlockSimConfig):
            raise ConfigurationError("block cross-fitting or random effects need the block design")

        learner = learner or LearnerConfig()
        workers = min(settings.MAX_WORKERS, n_reps)
        # one pool level only: replicate workers fit their folds serially
        first_stage_workers = 1 if workers > 1 else None
        rep_seeds = np.random.SeedSequence(seed).generate_state(n_reps)
        tasks = []
        for rep, rep_seed in enumerate(rep_seeds, start=1):
            data_seed, method_seed = (int(s) for s in np.random.SeedSequence(int(rep_seed)).generate_state(2))
            tasks.append({
                "replicate": rep,
                "scenario": scenario.with_seed(data_seed),
                "methods": list(methods),
                "seed": method_seed,
                "learner": learner,
                "nb_scheme": NeighborScheme(nb_scheme),
                "first_stage_workers": first_stage_workers,
            })

        logger.info(
            f"Sweep {scenario.scenario}: {n_reps} replicates x {len(methods)} methods",
            extra={"scenario": scenario.scenario, "n_reps": n_reps, "workers": workers},
        )
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                batches = list(pool.map(_run_replicate, tasks))
        else:
            batches = [_run_replicate(task) for task in tasks]

        frame = pd.DataFrame([row for batch in batches for row in batch], columns=REPLICATE_FIELDS)
        summaries = []
        failures_log = {}
        for name in names:
            rows = frame[frame["method"] == name]
            failed = rows["error"] != ""
            if failed.sum() > MAX_METHOD_FAILURE_FRAC * n_reps:
                failures_log[name] = rows.loc[failed, ["replicate", "error"]].to_dict("records")
            ok = rows[~failed]
            summaries.append(
                MonteCarloService.summarize(
                    name,
                    ok["gamma_hat"].to_numpy(),
                    ok["ci_lower"].to_numpy(),
                    ok["ci_upper"].to_numpy(),
                    scenario.gamma,
                    n_failures=int(failed.sum()),
                )
            )
        if failures_log:
            raise SweepAbortedError(
                f"Methods failed on more than {MAX_METHOD_FAILURE_FRAC:.0%} of replicates: "
                f"{', '.join(failures_log)}",
                failures=failures_log,
            )

        return SweepResult(
            scenario=scenario.scenario,
            gamma=scenario.gamma,
            n_reps=n_reps,
            seed=seed,
            summaries=summaries,
            replicates=frame,
            config=dict(config or {}),
        )

    @staticmethod
    def render_table(summaries: Sequence[MetricSummary]) -> str:
        """Methods as rows; Bias, MSE, CI length, Coverage with three decimals"""
        if not summaries:
            raise ConfigurationError("nothing to render")
        width = max(len("Method"), *(len(s.method) for s in summaries))
        lines = [f"{'Method':<{width}}" + "".join(f"{col:>12}" for col in TABLE_COLUMNS)]
        for s in summaries:
            values = (s.bias, s.mse, s.ci_length, s.coverage)
            lines.append(f"{s.method:<{width}}" + "".join(f"{v:>12.3f}" for v in values))
        return "\n".join(lines) + "\n"

    @staticmethod
    def table_csv(summaries: Sequence[MetricSummary], config: Optional[Dict[str, Any]] = None) -> str:
        """Full-precision summary CSV, preceded by the configuration header"""
        frame = pd.DataFrame([s.model_dump() for s in summaries], columns=SUMMARY_FIELDS)
        buffer = io.StringIO()
        frame.to_csv(buffer, index=False, lineterminator="\n")
        return GridFileService.header_block(config or {}) + buffer.getvalue()

    @staticmethod
    def replicates_csv(result: SweepResult) -> str:
        buffer = io.StringIO()
        result.replicates.to_csv(buffer, index=False, lineterminator="\n")
        return GridFileService.header_block(result.config) + buffer.getvalue()

    @staticmethod
    def parse_table_csv(text: str) -> Tuple[List[MetricSummary], Dict[str, str]]:
        """Inverse of table_csv: (summaries, header configuration)"""
        config = {}
        for line in text.splitlines():
            if line.startswith("# "):
                key, _, value = line[2:].partition("=")
                config[key] = value
        frame = pd.read_csv(
            io.StringIO(text),
            comment="#",
            float_precision="round_trip",
            dtype={"method": str},
        )
        missing = [c for c in SUMMARY_FIELDS if c not in frame.columns]
        if missing:
            raise ConfigurationError(f"not a sweep table; missing columns: {', '.join(missing)}")
        summaries = [MetricSummary(**record) for record in frame[SUMMARY_FIELDS].to_dict("records")]
        return summaries, config

    @staticmethod
    def stdml_methods(
        feature_sets: Sequence[FeatureSet] = (FeatureSet.X, FeatureSet.XS, FeatureSet.XSZ),
        L: int = 100,
        K: int = 10,
    ) -> List[MethodSpec]:
        """Each feature set without and with cross-fitting by pixel"""
        methods = []
        for features in feature_sets:
            for cf_mode, suffix in ((CrossFitMode.NONE, ""), (CrossFitMode.BY_PIXEL, " - CF")):
                methods.append(MethodSpec(
                    name=f"DML - {features.value}{suffix}",
                    kind=EstimatorKind.STDML,
                    features=features,
                    cf_mode=cf_mode,
                    L=L,
                    K=K,
                ))
        return methods

    @staticmethod
    def block_methods(L: int = 100, K: int = 10) -> List[MethodSpec]:
        """XSZ with and without block random effects, under each cross-fitting mode"""
        methods = []
        for re_mode, re_label in ((RandomEffectsMode.NONE, "no RE"), (RandomEffectsMode.BLOCK_RE, "RE")):
            for cf_mode, cf_label in (
                (CrossFitMode.NONE, "no CF"),
                (CrossFitMode.BY_PIXEL, "pixel CF"),
                (CrossFitMode.BY_BLOCK, "block CF"),
            ):
                methods.append(MethodSpec(
                    name=f"DML - {re_label} - {cf_label}",
                    kind=EstimatorKind.STDML,
                    features=FeatureSet.XSZ,
                    cf_mode=cf_mode,
                    re_mode=re_mode,
                    L=L,
                    K=K,
                ))
        return methods

    @staticmethod
    def preset(name: str, L: int = 100, K: int = 10, with_oracle: bool = False) -> Tuple[Scenario, List[MethodSpec]]:
        """Named scenario plus method list"""
        baselines = [MethodSpec(name="OLS", kind=EstimatorKind.OLS), MethodSpec(name="DID", kind=EstimatorKind.DID)]
        if name == "pixel":
            scenario, methods = PixelSimConfig(nu=2.0), baselines + MonteCarloService.stdml_methods(L=L, K=K)
        elif name == "pixel-nu1":
            scenario, methods = PixelSimConfig(nu=1.0), baselines + MonteCarloService.stdml_methods(L=L, K=K)
        elif name == "pixel-nu5":
            scenario, methods = PixelSimConfig(nu=5.0), baselines + MonteCarloService.stdml_methods(L=L, K=K)
        elif name == "block":
            scenario, methods = BlockSimConfig(nu=2.0), baselines + MonteCarloService.block_methods(L=L, K=K)
        else:
            raise ConfigurationError(
                f"Unknown preset '{name}'",
                details={"presets": ["pixel", "pixel-nu1", "pixel-nu5", "block"]},
            )
        if with_oracle:
            methods.append(MethodSpec(name="ORACLE", kind=EstimatorKind.ORACLE, cf_mode=CrossFitMode.NONE))
        return scenario, methods
