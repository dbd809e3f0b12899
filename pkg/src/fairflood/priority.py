"""Priority scores, rankings, and rank-shift diagnostics.

The priority score blends 0.6 x min-max normalized predicted damage with
0.4 x the vulnerability composite; rows are ranked descending (rank 1 =
highest priority) with deterministic tie-breaking: higher vulnerability
first, then lexical upazila id.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .dataset import REGION_HAOR, vulnerability_vector

logger = logging.getLogger(__name__)

__all__ = [
    "PRED_WEIGHT",
    "VULN_WEIGHT",
    "PriorityEntry",
    "RankShiftReport",
    "min_max_norm",
    "priority_scores",
    "build_ranking",
    "compare_rankings",
    "pearson",
    "spearman",
    "write_ranking_csv",
    "read_ranking_csv",
]

PRED_WEIGHT = 0.6
VULN_WEIGHT = 0.4

RANKING_CSV_COLUMNS = ("upazila_id", "district", "region", "predicted_damage",
                       "vulnerability_score", "priority_score", "rank")


@dataclass(frozen=True)
class PriorityEntry:
    upazila_id: str
    district: str
    region: str
    predicted_damage: float
    vulnerability_score: float
    priority_score: float
    rank: int


def min_max_norm(values):
    """Scale to [0, 1]; an all-equal input maps to all zeros by convention."""
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise DataError("cannot normalize an empty vector")
    if not np.all(np.isfinite(arr)):
        raise DataError("cannot normalize non-finite values")
    lo, hi = arr.min(), arr.max()
    if hi == lo:
        return np.zeros_like(arr)
    return (arr - lo) / (hi - lo)


def priority_scores(predictions, vulnerabilities):
    """Composite scores: PRED_WEIGHT * norm(pred) + VULN_WEIGHT * vuln."""
    preds = np.asarray(predictions, dtype=np.float64).reshape(-1)
    vuln = np.asarray(vulnerabilities, dtype=np.float64).reshape(-1)
    if preds.shape != vuln.shape:
        raise DataError("predictions and vulnerabilities must align")
    if np.any(vuln < 0.0) or np.any(vuln > 1.0):
        raise DataError("vulnerability scores must lie in [0, 1]")
    return PRED_WEIGHT * min_max_norm(preds) + VULN_WEIGHT * vuln


def build_ranking(dataset, predictions, vulnerabilities=None):
    """Ranked priority entries for every dataset row.

    Vulnerabilities default to the composite computed over the given
    dataset's own min-max context; pass them explicitly when ranking a
    subset so the normalization context stays shared.
    """
    preds = np.asarray(predictions, dtype=np.float64).reshape(-1)
    if len(preds) != len(dataset):
        raise DataError("predictions do not align with dataset rows")
    if vulnerabilities is None:
        vulnerabilities = vulnerability_vector(dataset)
    vuln = np.asarray(vulnerabilities, dtype=np.float64).reshape(-1)
    scores = priority_scores(preds, vuln)
    ids = dataset.upazila_ids()
    order = sorted(range(len(preds)),
                   key=lambda i: (-scores[i], -vuln[i], ids[i]))
    entries = []
    for rank, i in enumerate(order, start=1):
        rec = dataset.records[i]
        entries.append(PriorityEntry(
            upazila_id=rec.upazila_id, district=rec.district, region=rec.region,
            predicted_damage=float(preds[i]), vulnerability_score=float(vuln[i]),
            priority_score=float(scores[i]), rank=rank))
    return entries


def _rankdata(values):
    """Average ranks (1-based) with ties sharing their mean rank."""
    arr = np.asarray(values, dtype=np.float64)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(arr.size, dtype=np.float64)
    i = 0
    while i < arr.size:
        j = i
        while j + 1 < arr.size and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def pearson(x, y):
    """Pearson correlation; raises on zero-variance input."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape != y.shape or x.size < 2:
        raise DataError("correlation needs two aligned vectors of length >= 2")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0.0:
        raise DataError("correlation undefined for a constant vector")
    return float(xc @ yc) / denom


def spearman(x, y):
    """Spearman rank correlation (Pearson over average ranks)."""
    return pearson(_rankdata(x), _rankdata(y))


def _safe_corr(fn, x, y):
    try:
        return fn(x, y)
    except DataError:
        identical = np.array_equal(np.asarray(x, dtype=np.float64),
                                   np.asarray(y, dtype=np.float64))
        logger.warning("constant vector in correlation; reporting %s by convention",
                       1.0 if identical else 0.0)
        return 1.0 if identical else 0.0


@dataclass
class RankShiftReport:
    """How a candidate ranking moved relative to a reference.

    Shifts are reference_rank - candidate_rank, so positive means the row
    moved toward higher priority under the candidate. ``pct_reranked``
    counts any rank change; ``pct_reranked_3plus`` is the stricter >= 3
    position variant.
    """

    pct_reranked: float
    pct_reranked_3plus: float
    score_correlation: float
    rank_correlation: float
    mean_shift_overall: float
    mean_shift_haor: float | None
    mean_shift_high_poverty: float | None
    top_tier_size: int
    top_tier_entered: int
    top_tier_exited: int

    def to_dict(self):
        return {
            "pct_reranked": self.pct_reranked,
            "pct_reranked_3plus": self.pct_reranked_3plus,
            "score_correlation": self.score_correlation,
            "rank_correlation": self.rank_correlation,
            "mean_shift_overall": self.mean_shift_overall,
            "mean_shift_haor": self.mean_shift_haor,
            "mean_shift_high_poverty": self.mean_shift_high_poverty,
            "top_tier_size": self.top_tier_size,
            "top_tier_entered": self.top_tier_entered,
            "top_tier_exited": self.top_tier_exited,
        }


HIGH_POVERTY_THRESHOLD = 35.0


def compare_rankings(reference, candidate, poverty_by_id=None):
    """Rank-shift diagnostics between two rankings of the same upazilas.

    ``poverty_by_id`` optionally maps upazila ids to poverty rates so the
    high-poverty (> 35%) subgroup shift can be reported.
    """
    ref = {e.upazila_id: e for e in reference}
    cand = {e.upazila_id: e for e in candidate}
    if set(ref) != set(cand):
        raise DataError("rankings cover different upazila id sets")
    if not ref:
        raise DataError("rankings are empty")
    ids = sorted(ref)
    shifts = np.array([ref[i].rank - cand[i].rank for i in ids], dtype=np.float64)
    ref_scores = [ref[i].priority_score for i in ids]
    cand_scores = [cand[i].priority_score for i in ids]
    n = len(ids)

    haor_mask = np.array([ref[i].region == REGION_HAOR for i in ids])
    mean_shift_haor = float(shifts[haor_mask].mean()) if haor_mask.any() else None

    mean_shift_pov = None
    if poverty_by_id is not None:
        missing = [i for i in ids if i not in poverty_by_id]
        if missing:
            raise DataError(f"poverty rates missing for ids: {missing[:3]}")
        pov_mask = np.array(
            [poverty_by_id[i] > HIGH_POVERTY_THRESHOLD for i in ids])
        if pov_mask.any():
            mean_shift_pov = float(shifts[pov_mask].mean())

    tier = math.ceil(0.2 * n)
    entered = sum(1 for i in ids if cand[i].rank <= tier < ref[i].rank)
    exited = sum(1 for i in ids if ref[i].rank <= tier < cand[i].rank)

    return RankShiftReport(
        pct_reranked=100.0 * float(np.mean(shifts != 0.0)),
        pct_reranked_3plus=100.0 * float(np.mean(np.abs(shifts) >= 3.0)),
        score_correlation=_safe_corr(pearson, ref_scores, cand_scores),
        rank_correlation=_safe_corr(spearman, ref_scores, cand_scores),
        mean_shift_overall=float(shifts.mean()),
        mean_shift_haor=mean_shift_haor,
        mean_shift_high_poverty=mean_shift_pov,
        top_tier_size=tier,
        top_tier_entered=entered,
        top_tier_exited=exited,
    )


def write_ranking_csv(entries, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RANKING_CSV_COLUMNS)
        for e in sorted(entries, key=lambda e: e.rank):
            writer.writerow([
                e.upazila_id, e.district, e.region, repr(e.predicted_damage),
                repr(e.vulnerability_score), repr(e.priority_score), e.rank])


def read_ranking_csv(path):
    entries = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != RANKING_CSV_COLUMNS:
            raise DataError(f"ranking header mismatch in {path}")
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(RANKING_CSV_COLUMNS):
                raise DataError("malformed ranking row", row=line_no)
            try:
                entries.append(PriorityEntry(
                    upazila_id=row[0], district=row[1], region=row[2],
                    predicted_damage=float(row[3]), vulnerability_score=float(row[4]),
                    priority_score=float(row[5]), rank=int(row[6])))
            except ValueError as exc:
                raise DataError(f"malformed ranking value: {exc}", row=line_no) from exc
    if not entries:
        raise DataError(f"{path} contains no ranking rows")
    return entries
