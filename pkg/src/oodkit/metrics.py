"""Standard OoD detection metrics: TNR@TPR95, AUROC, DTACC, AUPR.

All four are reported in percent and assume the package-wide orientation:
larger score = more in-distribution.  A sample is classified in-distribution
when its score >= threshold.  AUPR treats in-distribution as the positive
class; every report carries that note since the convention is ambiguous in
the literature.  All metrics depend only on score ranks, so any strictly
increasing transform of the scores leaves them unchanged.
"""

import json
from dataclasses import dataclass, asdict

import numpy as np
from scipy.stats import rankdata

from .data import ScoreSet
from .errors import ValidationError

AUPR_POSITIVE_CLASS = "in-distribution"


def _percent(x: float) -> float:
    """Clip float-epsilon overshoot; genuine range bugs still trip EvalReport."""
    return float(min(100.0, max(0.0, x)))


@dataclass(frozen=True)
class EvalReport:
    tnr_at_tpr95: float
    auroc: float
    dtacc: float
    aupr: float
    n_in: int
    n_out: int
    detector: str = ""
    benchmark: str = ""
    aupr_positive_class: str = AUPR_POSITIVE_CLASS

    def __post_init__(self):
        for name in ("tnr_at_tpr95", "auroc", "dtacc", "aupr"):
            v = getattr(self, name)
            if not 0.0 <= v <= 100.0:
                raise ValidationError(f"{name}={v} outside [0, 100]")
        if self.n_in < 1 or self.n_out < 1:
            raise ValidationError("counts must be >= 1")

    def as_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def tnr_at_tpr95(scores: ScoreSet) -> float:
    """TNR in percent at the threshold keeping >= 95% of in-scores accepted.

    The threshold is the largest value tau with at least 95% of in_scores
    >= tau: an exact order statistic of the empirical distribution, no
    interpolation.
    """
    tau = _tpr95_threshold(scores.in_scores)
    return _percent(100.0 * float(np.mean(scores.out_scores < tau)))


def _tpr95_threshold(in_scores: np.ndarray) -> float:
    n = in_scores.shape[0]
    m = int(np.ceil(0.95 * n))  # accepted count required
    return float(np.sort(in_scores)[n - m])


def auroc(scores: ScoreSet) -> float:
    """Percent probability a random in-score exceeds a random out-score.

    Rank-based (Mann-Whitney U), ties counted 0.5 - exact, no curve
    integration.
    """
    n_in = scores.in_scores.shape[0]
    n_out = scores.out_scores.shape[0]
    ranks = rankdata(np.concatenate([scores.in_scores, scores.out_scores]))
    u = ranks[:n_in].sum() - n_in * (n_in + 1) / 2.0
    return _percent(100.0 * float(u / (n_in * n_out)))


def dtacc(scores: ScoreSet) -> float:
    """Best balanced accuracy over all thresholds, in percent (>= 50 always)."""
    in_sorted = np.sort(scores.in_scores)
    out_sorted = np.sort(scores.out_scores)
    n_in, n_out = in_sorted.shape[0], out_sorted.shape[0]
    # candidate thresholds: every distinct score; +inf covers "reject all"
    taus = np.unique(np.concatenate([in_sorted, out_sorted]))
    tpr = (n_in - np.searchsorted(in_sorted, taus, side="left")) / n_in
    tnr = np.searchsorted(out_sorted, taus, side="left") / n_out
    best = max(np.max(0.5 * tpr + 0.5 * tnr), 0.5)
    return _percent(100.0 * float(best))


def aupr(scores: ScoreSet) -> float:
    """Area under precision-recall, in-distribution positive, in percent.

    Step-wise integral over all distinct thresholds (descending): sums
    precision * recall-increment, the standard average-precision form.
    """
    in_sorted = np.sort(scores.in_scores)
    out_sorted = np.sort(scores.out_scores)
    n_in, n_out = in_sorted.shape[0], out_sorted.shape[0]
    taus = np.unique(np.concatenate([in_sorted, out_sorted]))[::-1]
    tp = n_in - np.searchsorted(in_sorted, taus, side="left")
    fp = n_out - np.searchsorted(out_sorted, taus, side="left")
    recall = tp / n_in
    precision = tp / np.maximum(tp + fp, 1)
    steps = np.diff(recall, prepend=0.0)
    # cumsum keeps strictly sequential accumulation, so the value is
    # bit-identical to a plain threshold-sweep loop
    return _percent(100.0 * float(np.cumsum(steps * precision)[-1]))


def evaluate(scores: ScoreSet, detector: str = "", benchmark: str = "") -> EvalReport:
    """All four metrics for one detector/benchmark pair."""
    return EvalReport(
        tnr_at_tpr95=tnr_at_tpr95(scores),
        auroc=auroc(scores),
        dtacc=dtacc(scores),
        aupr=aupr(scores),
        n_in=int(scores.in_scores.shape[0]),
        n_out=int(scores.out_scores.shape[0]),
        detector=detector,
        benchmark=benchmark,
    )


def format_table(reports) -> str:
    """Aligned text table over a list of reports (Table-1 style columns)."""
    header = ("Benchmark", "Method", "TNR at TPR 95%", "AUROC", "DTACC", "AUPR")
    rows = [header]
    for r in reports:
        rows.append(
            (
                r.benchmark or "-",
                r.detector or "-",
                f"{r.tnr_at_tpr95:.2f}",
                f"{r.auroc:.2f}",
                f"{r.dtacc:.2f}",
                f"{r.aupr:.2f}",
            )
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = [f"# AUPR positive class: {AUPR_POSITIVE_CLASS}"]
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)
