"""
Plot service - SVG figures for sweeps and knot sweeps

Figures are rendered with the Agg backend and written without timestamps, so the
same inputs give byte-identical files.
"""
import io
import logging
from typing import Any, Dict, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from stdml.core.constants import Z_CRIT_95  # noqa: E402
from stdml.models.estimate import EffectEstimate  # noqa: E402
from stdml.models.summary import MetricSummary  # noqa: E402

logger = logging.getLogger(__name__)

FIG_WIDTH = 7.0


class PlotService:
    """Service class for SVG figures"""

    @staticmethod
    def to_svg(fig, config: Optional[Dict[str, Any]] = None) -> str:
        """Serialize and close a figure; the configuration goes into an XML comment block"""
        with plt.rc_context({"svg.hashsalt": "stdml", "svg.fonttype": "none"}):
            buffer = io.StringIO()
            fig.savefig(buffer, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)
        svg = buffer.getvalue()
        if config:
            comment = "<!--\n" + "".join(f"  {k}={v}\n" for k, v in sorted(config.items())) + "-->\n"
            head, sep, rest = svg.partition("\n")
            svg = head + sep + comment + rest
        return svg

    @staticmethod
    def estimate_boxplot(
        replicates: pd.DataFrame,
        gamma: float,
        methods: Optional[Sequence[str]] = None,
        config: Optional[Dict[str, Any]] = None,
    ) -> str:
        """Distribution of gamma-hat per method across replicates, true effect dashed"""
        ok = replicates[replicates["error"].fillna("") == ""]
        methods = list(methods) if methods is not None else list(dict.fromkeys(ok["method"]))
        data = [ok.loc[ok["method"] == m, "gamma_hat"].to_numpy(dtype=float) for m in methods]

        keep = [j for j, values in enumerate(data) if values.size]
        fig, ax = plt.subplots(figsize=(FIG_WIDTH, 4.5))
        ax.boxplot([data[j] for j in keep])
        ax.set_xticks(np.arange(1, len(keep) + 1))
        ax.set_xticklabels([methods[j] for j in keep], rotation=45, ha="right")
        ax.axhline(gamma, color="black", linestyle="--", linewidth=1)
        ax.set_ylabel("Estimated treatment effect")
        fig.tight_layout()
        return PlotService.to_svg(fig, config)

    @staticmethod
    def bias_plot(summaries: Sequence[MetricSummary], config: Optional[Dict[str, Any]] = None) -> str:
        """Bias per method with a 95% Monte Carlo interval"""
        names = [s.method for s in summaries]
        bias = np.array([s.bias for s in summaries])
        half = Z_CRIT_95 * np.array([s.bias_se for s in summaries])
        y = np.arange(len(names))

        fig, ax = plt.subplots(figsize=(FIG_WIDTH, max(3.0, 0.45 * len(names))))
        ax.errorbar(bias, y, xerr=half, fmt="o", color="black", capsize=3)
        ax.axvline(0.0, color="grey", linestyle="--", linewidth=1)
        ax.set_yticks(y)
        ax.set_yticklabels(names)
        ax.set_xlabel("Bias")
        ax.invert_yaxis()
        fig.tight_layout()
        return PlotService.to_svg(fig, config)

    @staticmethod
    def knot_plot(
        L_values: Sequence[int],
        estimates: Sequence[EffectEstimate],
        config: Optional[Dict[str, Any]] = None,
    ) -> str:
        """Point estimate and 95% interval per number of basis functions"""
        x = np.arange(len(L_values))
        gamma = np.array([e.gamma for e in estimates])
        lower = gamma - np.array([e.ci_lower for e in estimates])
        upper = np.array([e.ci_upper for e in estimates]) - gamma

        fig, ax = plt.subplots(figsize=(FIG_WIDTH, 4.0))
        ax.errorbar(x, gamma, yerr=[lower, upper], fmt="o", color="black", capsize=4)
        ax.axhline(0.0, color="grey", linestyle="--", linewidth=1)
        ax.set_xticks(x)
        ax.set_xticklabels([str(L) for L in L_values])
        ax.set_xlabel("Number of basis functions L")
        ax.set_ylabel("Estimated treatment effect")
        fig.tight_layout()
        return PlotService.to_svg(fig, config)
