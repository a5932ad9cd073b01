"""CLI verbs"""
from stdml.cli.commands import fit, importance, knot_sweep, report, simulate, sweep

VERBS = [simulate, sweep, fit, importance, knot_sweep, report]

__all__ = ["VERBS"]
