"""
Estimate model - coefficient vector, HC0 covariance, interval for gamma and run metadata

Record format (`to_record` / `from_record`): one `key=value` per line with keys
method, n_rows, gamma, se, ci_lower, ci_upper, coef.<name>, cov.<i>.<j>, meta.<key>.
Floats are written with repr so records round-trip exactly.
"""
from typing import Any, Dict, List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class EffectEstimate(BaseModel):
    """Least-squares fit with robust covariance; gamma is the treatment effect"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    method: str
    coef_names: List[str]
    coef: np.ndarray
    cov: np.ndarray
    gamma: float
    se: float
    ci_lower: float
    ci_upper: float
    n_rows: int
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @property
    def ci_length(self) -> float:
        return self.ci_upper - self.ci_lower

    def covers(self, value: float) -> bool:
        return self.ci_lower <= value <= self.ci_upper

    def coefficient(self, name: str) -> float:
        return float(self.coef[self.coef_names.index(name)])

    def to_record(self) -> str:
        lines = [
            f"method={self.method}",
            f"n_rows={self.n_rows}",
            f"gamma={float(self.gamma)!r}",
            f"se={float(self.se)!r}",
            f"ci_lower={float(self.ci_lower)!r}",
            f"ci_upper={float(self.ci_upper)!r}",
        ]
        lines += [f"coef.{name}={float(v)!r}" for name, v in zip(self.coef_names, self.coef)]
        k = len(self.coef_names)
        lines += [f"cov.{i}.{j}={float(self.cov[i, j])!r}" for i in range(k) for j in range(k)]
        lines += [f"meta.{key}={value}" for key, value in sorted(self.metadata.items())]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_record(cls, text: str) -> "EffectEstimate":
        values: Dict[str, str] = {}
        for line in text.splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()

        names = [key[len("coef."):] for key in values if key.startswith("coef.")]
        coef = np.array([float(values[f"coef.{name}"]) for name in names])
        k = len(names)
        cov = np.array([[float(values[f"cov.{i}.{j}"]) for j in range(k)] for i in range(k)]).reshape(k, k)
        metadata = {key[len("meta."):]: value for key, value in values.items() if key.startswith("meta.")}
        return cls(
            method=values["method"],
            coef_names=names,
            coef=coef,
            cov=cov,
            gamma=float(values["gamma"]),
            se=float(values["se"]),
            ci_lower=float(values["ci_lower"]),
            ci_upper=float(values["ci_upper"]),
            n_rows=int(values["n_rows"]),
            metadata=metadata,
        )
