"""Numerical values with uncertainties, limit reports and extrapolation."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

__all__ = ["Estimate", "LimitReport", "extrapolate", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Estimate:
    """A value with a nonnegative error and the method that produced it.

    ``error`` is a standard error for Monte Carlo values and an a-posteriori
    bound (refinement difference) for quadrature values.  ``breakdown`` keeps
    per-source error terms; extrapolated values keep the input sequence.
    """

    value: float
    error: float = 0.0
    method: str = "quadrature"
    breakdown: dict = field(default_factory=dict)
    sequence: tuple = ()

    def __post_init__(self):
        if not np.all(np.asarray(self.error) >= 0):
            raise ValueError(f"error must be nonnegative, got {self.error}")

    def __float__(self):
        return float(self.value)

    def within(self, target, k: float = 3.0, extra: float = 0.0) -> bool:
        """``|value - target| <= k * error + extra`` (elementwise for arrays)."""
        return bool(np.all(np.abs(np.asarray(self.value) - target)
                           <= k * np.asarray(self.error) + extra))

    def scaled(self, factor: float) -> Estimate:
        return Estimate(self.value * factor, self.error * abs(factor), self.method,
                        {k: v * abs(factor) for k, v in self.breakdown.items()},
                        self.sequence)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["sequence"] = [list(s) if isinstance(s, tuple) else s for s in self.sequence]
        return out


def extrapolate(params, values, errors=None, rate: float = 0.5, limit_at: float = 0.0):
    """Least-squares fit of ``a + b * |x - limit_at|**rate``; returns an Estimate of ``a``.

    ``errors`` weight the fit.  The reported error combines the propagated
    statistical error of the intercept with the spread between the full fit
    and the fit on the points nearest the limit (a model-adequacy term); both
    are kept in ``breakdown`` together with the fit residuals.
    """
    x = np.abs(np.asarray(params, dtype=float) - limit_at) ** rate
    y = np.asarray(values, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two points to extrapolate")
    sig = np.ones_like(y) if errors is None else np.asarray(errors, dtype=float)
    sig = np.where(sig > 0, sig, max(np.max(sig), 1e-300) if np.any(sig > 0) else 1.0)

    def fit(idx):
        a_mat = np.stack([np.ones(idx.size), x[idx]], axis=-1) / sig[idx, None]
        coef, *_ = np.linalg.lstsq(a_mat, y[idx] / sig[idx], rcond=None)
        cov = np.linalg.pinv(a_mat.T @ a_mat)
        return coef, cov

    idx = np.arange(x.size)
    coef, cov = fit(idx)
    resid = y - (coef[0] + coef[1] * x)
    stat = math.sqrt(max(cov[0, 0], 0.0)) if errors is not None else 0.0
    if x.size >= 3:
        near = np.argsort(x)[:2]
        coef2, _ = fit(near)
        model = abs(coef2[0] - coef[0])
    else:
        model = 0.0
    return Estimate(
        float(coef[0]), float(math.hypot(stat, model)), "extrapolation",
        {"statistical": stat, "model": model, "slope": float(coef[1]),
         "max_residual": float(np.max(np.abs(resid)))},
        tuple(zip(np.asarray(params, dtype=float).tolist(), y.tolist(),
                  (np.zeros_like(y) if errors is None else np.asarray(errors)).tolist())),
    )


@dataclass
class LimitReport:
    """Functional values on a parameter grid plus the extrapolated limit."""

    name: str
    param_name: str
    params: list
    values: list
    errors: list
    limit: Estimate
    limit_param: float
    target: float
    flags: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        p = np.asarray(self.params, dtype=float)
        d = np.diff(p)
        if p.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("parameter grid must be strictly monotone")

    @property
    def ratio(self) -> float:
        return self.limit.value / self.target if self.target else math.nan

    @property
    def ratio_error(self) -> float:
        return self.limit.error / abs(self.target) if self.target else math.nan

    def rows(self):
        def ratio(v):
            return v / self.target if self.target else math.nan
        for p, v, e in zip(self.params, self.values, self.errors):
            yield p, v, e, self.target, ratio(v)
        yield self.limit_param, self.limit.value, self.limit.error, self.target, self.ratio

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["param", "value", "error", "target", "ratio"])
        for row in self.rows():
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "param_name": self.param_name,
            "params": list(map(float, self.params)),
            "values": list(map(float, self.values)),
            "errors": list(map(float, self.errors)),
            "limit": self.limit.as_dict(),
            "limit_param": self.limit_param,
            "target": self.target,
            "ratio": self.ratio,
            "flags": list(self.flags),
            "metadata": self.metadata,
        }
        return json.dumps(doc, indent=2, sort_keys=True, default=float)
