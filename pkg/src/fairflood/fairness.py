"""Performance and fairness metrics for damage predictions.

Group metrics treat the district set as the whole population, so variances
use the population convention. Degenerate single-group inputs return 0
with a logged warning instead of aborting ablation runs on sliced data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

__all__ = [
    "PerformanceReport",
    "FairnessReport",
    "performance_metrics",
    "statistical_parity_difference",
    "prediction_variance",
    "regional_fairness_gap",
    "equal_opportunity",
    "improvement_pct",
    "fairness_report",
]


@dataclass
class PerformanceReport:
    """Regression quality in raw USD millions (mse/rmse in USD M^2 / USD M)."""

    mse: float
    mae: float
    rmse: float
    r2: float

    def to_dict(self):
        return {"mse": self.mse, "mae": self.mae, "rmse": self.rmse, "r2": self.r2}


@dataclass
class FairnessReport:
    """District- and region-level disparity measures, all non-negative."""

    spd: float
    prediction_variance: float
    regional_gap: float
    equal_opportunity: float
    mae_std_across_districts: float
    per_district_mae: dict
    per_district_mean_prediction: dict

    def to_dict(self):
        return {
            "spd": self.spd,
            "prediction_variance": self.prediction_variance,
            "regional_gap": self.regional_gap,
            "equal_opportunity": self.equal_opportunity,
            "mae_std_across_districts": self.mae_std_across_districts,
            "per_district_mae": dict(self.per_district_mae),
            "per_district_mean_prediction": dict(self.per_district_mean_prediction),
        }


def _as_vector(values, name):
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise DataError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    return arr


def performance_metrics(actual, predicted):
    """MSE, MAE, RMSE and R^2 (R^2 = 1 - SS_res / SS_tot against the
    actual-mean baseline). Zero-variance actuals are an error, not NaN."""
    y = _as_vector(actual, "actual")
    yhat = _as_vector(predicted, "predicted")
    if y.shape != yhat.shape:
        raise DataError("actual and predicted lengths differ")
    err = y - yhat
    mse = float(np.mean(err * err))
    mae = float(np.mean(np.abs(err)))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise DataError("R^2 undefined: actual values have zero variance")
    r2 = 1.0 - float(np.sum(err * err)) / ss_tot
    return PerformanceReport(mse=mse, mae=mae, rmse=float(np.sqrt(mse)), r2=r2)


def _group_arrays(values, groups, name):
    values = _as_vector(values, name)
    groups = list(groups)
    if len(groups) != values.size:
        raise DataError(f"group labels do not align with {name}")
    buckets = {}
    for v, g in zip(values, groups):
        buckets.setdefault(g, []).append(v)
    return {g: np.asarray(vs) for g, vs in buckets.items()}


def statistical_parity_difference(predicted, groups):
    """Largest gap between group-conditional mean predictions."""
    buckets = _group_arrays(predicted, groups, "predicted")
    if len(buckets) < 2:
        logger.warning("statistical parity over a single group is 0 by convention")
        return 0.0
    means = [float(vs.mean()) for vs in buckets.values()]
    return max(means) - min(means)


def prediction_variance(predicted, groups):
    """Population variance of the per-group mean predictions."""
    buckets = _group_arrays(predicted, groups, "predicted")
    if len(buckets) < 2:
        logger.warning("prediction variance over a single group is 0 by convention")
        return 0.0
    means = np.array([vs.mean() for vs in buckets.values()])
    return float(means.var())


def _group_maes(actual, predicted, groups):
    y = _as_vector(actual, "actual")
    yhat = _as_vector(predicted, "predicted")
    if y.shape != yhat.shape:
        raise DataError("actual and predicted lengths differ")
    buckets = _group_arrays(np.abs(y - yhat), groups, "errors")
    return {g: float(vs.mean()) for g, vs in buckets.items()}


def regional_fairness_gap(actual, predicted, haor_flags):
    """Absolute MAE difference between the haor and non-haor regions."""
    flags = np.asarray(list(haor_flags), dtype=bool)
    groups = ["haor" if f else "non_haor" for f in flags]
    maes = _group_maes(actual, predicted, groups)
    if "haor" not in maes or "non_haor" not in maes:
        raise DataError("both regions must be represented")
    return abs(maes["haor"] - maes["non_haor"])


def equal_opportunity(actual, predicted, groups):
    """Largest gap between per-group MAEs (regression adaptation)."""
    maes = _group_maes(actual, predicted, groups)
    if len(maes) < 2:
        logger.warning("equal opportunity over a single group is 0 by convention")
        return 0.0
    values = list(maes.values())
    return max(values) - min(values)


def improvement_pct(fair_value, baseline_value):
    """Percent reduction relative to the baseline; negative when the fair
    value is worse (intentional redistribution shows up that way)."""
    if baseline_value <= 0.0:
        raise ValueError("baseline value must be positive")
    return 100.0 * (baseline_value - fair_value) / baseline_value


def fairness_report(actual, predicted, groups, haor_flags):
    """All fairness metrics plus the per-district tables."""
    groups = list(groups)
    maes = _group_maes(actual, predicted, groups)
    mean_preds = {
        g: float(vs.mean())
        for g, vs in _group_arrays(predicted, groups, "predicted").items()}
    mae_values = np.array(list(maes.values()))
    return FairnessReport(
        spd=statistical_parity_difference(predicted, groups),
        prediction_variance=prediction_variance(predicted, groups),
        regional_gap=regional_fairness_gap(actual, predicted, haor_flags),
        equal_opportunity=equal_opportunity(actual, predicted, groups),
        mae_std_across_districts=float(mae_values.std()) if len(mae_values) > 1 else 0.0,
        per_district_mae=maes,
        per_district_mean_prediction=mean_preds,
    )
