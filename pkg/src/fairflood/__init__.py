"""Fairness-aware flood aid prioritization.

Tabular damage regression with adversarial debiasing (a gradient reversal
layer pitted against a district classifier), fairness metrics, and priority
rankings, plus a calibrated synthetic data generator for desk-scale runs.
"""

from .dataset import (Dataset, FeatureTarget, NormContext,
                      StandardizationParams, SyntheticConfig, UpazilaRecord,
                      engineer_features, fit_standardization,
                      generate_synthetic, load_csv, stratified_split,
                      write_csv)
from .errors import DataError, FairfloodError, NumericError, UsageError
from .fairness import (FairnessReport, PerformanceReport, equal_opportunity,
                       fairness_report, improvement_pct, performance_metrics,
                       prediction_variance, regional_fairness_gap,
                       statistical_parity_difference)
from .model import (FairModel, ModelConfig, init_model, load_checkpoint,
                    predict, save_checkpoint, training_step)
from .priority import (PriorityEntry, RankShiftReport, build_ranking,
                       compare_rankings, min_max_norm, priority_scores)
from .trainer import TrainConfig, TrainingLog, evaluate, train

__version__ = "0.1.0"
