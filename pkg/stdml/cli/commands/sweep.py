"""
sweep - Monte Carlo comparison of estimators over simulated replicates
"""
import argparse
import sys
from typing import List, TextIO

from stdml.cli import deps
from stdml.core.exceptions import ConfigurationError
from stdml.models.method import CrossFitMode, EstimatorKind
from stdml.schemas.method import MethodSpec
from stdml.schemas.run import RunConfig
from stdml.services.monte_carlo_service import MonteCarloService
from stdml.services.plot_service import PlotService


def register(subparsers) -> None:
    parser = subparsers.add_parser("sweep", help="run a Monte Carlo sweep (preset=pixel|pixel-nu1|pixel-nu5|block)")
    deps.add_config_arguments(parser)
    parser.set_defaults(handler=cmd_sweep)


def configured_methods(config: RunConfig) -> List[MethodSpec]:
    """Methods named in the config; STDML uses the configured options"""
    methods = []
    for kind in config.methods:
        if kind == EstimatorKind.STDML:
            suffix = " - CF" if config.cf_mode == CrossFitMode.BY_PIXEL else (
                " - block CF" if config.cf_mode == CrossFitMode.BY_BLOCK else ""
            )
            re_label = " - RE" if config.re_mode.value == "block_re" else ""
            methods.append(MethodSpec(
                name=f"DML - {config.features.value}{re_label}{suffix}",
                kind=kind,
                features=config.features,
                cf_mode=config.cf_mode,
                re_mode=config.re_mode,
                L=config.L,
                K=config.K,
                include_neighbors=config.include_neighbors,
            ))
        elif kind == EstimatorKind.ORACLE:
            methods.append(MethodSpec(name="ORACLE", kind=kind, cf_mode=CrossFitMode.NONE))
        else:
            methods.append(MethodSpec(name=kind.value, kind=kind))
    if config.with_oracle and not any(m.kind == EstimatorKind.ORACLE for m in methods):
        methods.append(MethodSpec(name="ORACLE", kind=EstimatorKind.ORACLE, cf_mode=CrossFitMode.NONE))
    return methods


def cmd_sweep(args: argparse.Namespace, out: TextIO = sys.stdout) -> int:
    config = deps.get_run_config(args)
    if config.preset:
        scenario, methods = MonteCarloService.preset(config.preset, L=config.L, K=config.K, with_oracle=config.with_oracle)
        overrides = config.scenario_overrides()
        if overrides:
            scenario = type(scenario)(**{**scenario.model_dump(), **overrides})
    else:
        scenario, methods = config.scenario(), configured_methods(config)
    if not methods:
        raise ConfigurationError("no methods selected")

    header = {**config.resolved(), "scenario": scenario.scenario, "true_gamma": repr(scenario.gamma)}
    result = MonteCarloService.run_sweep(
        scenario,
        methods,
        n_reps=config.n_reps,
        seed=config.seed,
        learner=config.learner(),
        nb_scheme=config.nb_scheme,
        config=header,
    )

    path = deps.resolve_output(config, "sweep.csv")
    deps.write_text(path, MonteCarloService.table_csv(result.summaries, header))
    deps.write_text(deps.sibling(path, "_replicates", ".csv"), MonteCarloService.replicates_csv(result))
    svg = PlotService.estimate_boxplot(result.replicates, result.gamma, [m.name for m in methods], header)
    deps.write_text(path.with_suffix(".svg"), svg)

    out.write(MonteCarloService.render_table(result.summaries))
    failures = {s.method: s.n_failures for s in result.summaries if s.n_failures}
    for name, count in failures.items():
        out.write(f"{name}: {count} failed replicate(s) excluded\n")
    return 0
