"""Evaluation: confusion counts, rates, splits, threshold sweeps, curves.

Polarity warning: **benign is the positive class** throughout this module.
A true positive is a benign session detected as benign, and a false
positive is a malicious session that slipped through as benign.  On top of
that, ``precision_paper`` is the true-negative rate TN / (TN + FP), i.e.
what is conventionally called specificity; it is kept under this name
because every downstream report and the f_score definition build on it.
The conventional TP / (TP + FP) ratio is also computed, as
``precision_conventional``, so nobody has to re-derive it.

Rates with a zero denominator are reported as None and flag the report as
degenerate instead of masquerading as 0.0.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence, TypeVar

from .bayes import ActivitySet, BayesConfig, classify_bayes, session_score
from .errors import DegenerateCounts, ProfileInvalid, TooFewSessions
from .markov import MarkovConfig, TransitionModel, longest_malicious_run
from .preprocess import StateSequence
from .profiles import DeviceProfile

SWEEP_HEADER = (
    "threshold",
    "recall",
    "fnr",
    "precision_paper",
    "fpr",
    "accuracy",
    "f_score",
)
CURVE_HEADER = ("x", "y", "threshold")

# Score threshold grid used for the posterior detector by default.
DEFAULT_BAYES_THRESHOLDS = (0.55, 0.57, 0.60, 0.62, 0.65, 0.67)
DEFAULT_MARKOV_T_VALUES = (0, 1, 2, 3, 4, 5, 6)


@dataclass(frozen=True)
class ConfusionCounts:
    """Session counts with benign as the positive class."""

    tp: int  # benign detected benign
    fn: int  # benign detected malicious
    tn: int  # malicious detected malicious
    fp: int  # malicious detected benign

    def __post_init__(self) -> None:
        for name in ("tp", "fn", "tn", "fp"):
            if getattr(self, name) < 0:
                raise ProfileInvalid(f"confusion count {name} must be >= 0")

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.tn + self.fp


def confusion(pairs: Iterable[tuple[str, str]]) -> ConfusionCounts:
    """Tally (true label, predicted label) pairs, labels benign/malicious."""
    tp = fn = tn = fp = 0
    for truth, predicted in pairs:
        if truth == "benign":
            if predicted == "benign":
                tp += 1
            else:
                fn += 1
        else:
            if predicted == "malicious":
                tn += 1
            else:
                fp += 1
    return ConfusionCounts(tp=tp, fn=fn, tn=tn, fp=fp)


@dataclass(frozen=True)
class MetricsReport:
    recall: float | None
    fnr: float | None
    precision_paper: float | None
    fpr: float | None
    accuracy: float | None
    f_score: float | None
    precision_conventional: float | None
    degenerate: bool


def metrics(c: ConfusionCounts) -> MetricsReport:
    """All rates from one confusion table; None where undefined."""
    benign = c.tp + c.fn
    malicious = c.tn + c.fp
    predicted_benign = c.tp + c.fp
    degenerate = benign == 0 or malicious == 0

    recall = c.tp / benign if benign else None
    fnr = c.fn / benign if benign else None
    precision_paper = c.tn / malicious if malicious else None
    fpr = c.fp / malicious if malicious else None
    accuracy = (c.tp + c.tn) / c.total if c.total else None
    precision_conventional = (
        c.tp / predicted_benign if predicted_benign else None
    )
    if recall is None or precision_paper is None:
        f_score = None
    elif recall + precision_paper == 0.0:
        f_score = 0.0
    else:
        f_score = 2 * recall * precision_paper / (recall + precision_paper)
    return MetricsReport(
        recall=recall,
        fnr=fnr,
        precision_paper=precision_paper,
        fpr=fpr,
        accuracy=accuracy,
        f_score=f_score,
        precision_conventional=precision_conventional,
        degenerate=degenerate,
    )


@dataclass
class SplitSpec:
    train_fraction: float = 0.75
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise ProfileInvalid(
                f"train_fraction must be in (0, 1), got {self.train_fraction}"
            )


S = TypeVar("S")


def split(sessions: Sequence[S], spec: SplitSpec) -> tuple[list[S], list[S]]:
    """Deterministic benign train/test split; malicious always go to test.

    Benign sessions are shuffled with the seeded generator, the first
    ``floor(train_fraction * len(benign))`` become the training partition,
    and the remainder plus every malicious session form the test partition.
    Anything with a ``label`` attribute splits; order within partitions is
    reproducible for a given seed.
    """
    benign = [s for s in sessions if s.label == "benign"]
    malicious = [s for s in sessions if s.label != "benign"]
    if len(benign) < 2:
        raise TooFewSessions(
            f"need at least 2 benign sessions to split, got {len(benign)}"
        )
    rng = random.Random(spec.rng_seed)
    shuffled = list(benign)
    rng.shuffle(shuffled)
    cut = int(spec.train_fraction * len(shuffled))
    train = shuffled[:cut]
    test = shuffled[cut:] + malicious
    return train, test


def sweep_markov(
    model: TransitionModel,
    sessions: Sequence[StateSequence],
    t_values: Sequence[int] = DEFAULT_MARKOV_T_VALUES,
    base_config: MarkovConfig | None = None,
) -> list[tuple[int, MetricsReport]]:
    """Evaluate the run-length rule at several thresholds T.

    Per-step maliciousness does not depend on T, so each session's longest
    malicious run is computed once and every row is just ``run >= T``.
    T = 0 therefore labels every session malicious.  Verify-friendly: any
    single row must match an independent one-threshold evaluation.
    """
    for t in t_values:
        if t < 0:
            raise ProfileInvalid(f"threshold T must be >= 0, got {t}")
    config = base_config or MarkovConfig()
    runs = [
        (seq.label or "benign", longest_malicious_run(model, config, seq.states))
        for seq in sessions
    ]
    rows = []
    for t in t_values:
        pairs = [
            (label, "malicious" if run >= t else "benign") for label, run in runs
        ]
        rows.append((t, metrics(confusion(pairs))))
    return rows


def sweep_bayes(
    aset: ActivitySet,
    sessions: Sequence[StateSequence],
    thresholds: Sequence[float] = DEFAULT_BAYES_THRESHOLDS,
    floor: float | None = None,
) -> list[tuple[float, MetricsReport]]:
    """Evaluate the score rule at several thresholds.

    Scores are computed once per session; thresholds only re-cut them.
    """
    for t in thresholds:
        if not 0.0 <= t <= 1.0:
            raise ProfileInvalid(f"score threshold must be in [0, 1], got {t}")
    kwargs = {} if floor is None else {"floor": floor}
    scored = []
    for seq in sessions:
        scores = session_score(aset, seq, **kwargs)
        scored.append((seq.label or "benign", max(scores.values())))
    rows = []
    for t in thresholds:
        pairs = [
            (label, "benign" if score >= t else "malicious")
            for label, score in scored
        ]
        rows.append((t, metrics(confusion(pairs))))
    return rows


class CurvePoint(NamedTuple):
    x: float
    y: float
    threshold: float


@dataclass
class Curve:
    points: list[CurvePoint]
    au: float


def _trapezoid(points: Sequence[CurvePoint]) -> float:
    terms = []
    for a, b in zip(points, points[1:]):
        terms.append((b.x - a.x) * (a.y + b.y) / 2.0)
    return math.fsum(terms)


def _sweep_scores(
    session_scores: Sequence[tuple[str, float]]
) -> list[tuple[float, ConfusionCounts]]:
    """Confusion counts at every distinct score threshold.

    The rule is benign iff score >= threshold.  Thresholds run from +inf
    (nothing passes) down through each distinct score, so recall and fpr
    are non-decreasing along the returned list.
    """
    benign_total = sum(1 for label, _ in session_scores if label == "benign")
    malicious_total = len(session_scores) - benign_total
    if benign_total == 0 or malicious_total == 0:
        raise DegenerateCounts(
            "curves need at least one benign and one malicious session"
        )
    by_score: dict[float, list[int]] = {}
    for label, score in session_scores:
        bucket = by_score.setdefault(score, [0, 0])
        bucket[0 if label == "benign" else 1] += 1
    out: list[tuple[float, ConfusionCounts]] = []
    tp = fp = 0
    out.append(
        (
            math.inf,
            ConfusionCounts(tp=0, fn=benign_total, tn=malicious_total, fp=0),
        )
    )
    for score in sorted(by_score, reverse=True):
        b, m = by_score[score]
        tp += b
        fp += m
        out.append(
            (
                score,
                ConfusionCounts(
                    tp=tp,
                    fn=benign_total - tp,
                    tn=malicious_total - fp,
                    fp=fp,
                ),
            )
        )
    return out


def curves(
    session_scores: Sequence[tuple[str, float]]
) -> tuple[Curve, Curve, float]:
    """ROC and precision-recall curves over all distinct score thresholds.

    Returns ``(roc, prc, auprc)``.  ROC points are (fpr, recall); the
    recall-precision curve uses the TN-rate vocabulary of this package, so
    its points are (recall, precision_paper).  Areas are trapezoidal over
    the x axis.  See :func:`conventional_prc` for the TP/(TP+FP) variant.
    """
    swept = _sweep_scores(session_scores)
    roc_points = []
    prc_points = []
    for threshold, c in swept:
        r = metrics(c)
        roc_points.append(CurvePoint(x=r.fpr, y=r.recall, threshold=threshold))
        prc_points.append(
            CurvePoint(x=r.recall, y=r.precision_paper, threshold=threshold)
        )
    roc = Curve(points=roc_points, au=_trapezoid(roc_points))
    prc = Curve(points=prc_points, au=_trapezoid(prc_points))
    return roc, prc, prc.au


def conventional_prc(session_scores: Sequence[tuple[str, float]]) -> Curve:
    """Recall vs TP/(TP+FP) precision, skipping the empty-prediction point.

    Under labels independent of scores its area approximates the benign
    prevalence, which makes it the natural sanity check for scored output.
    """
    swept = _sweep_scores(session_scores)
    points = []
    for threshold, c in swept:
        r = metrics(c)
        if r.precision_conventional is None:
            continue
        points.append(
            CurvePoint(x=r.recall, y=r.precision_conventional, threshold=threshold)
        )
    return Curve(points=points, au=_trapezoid(points))


def markov_session_scores(
    model: TransitionModel,
    sessions: Sequence[StateSequence],
    config: MarkovConfig | None = None,
) -> list[tuple[str, float]]:
    """Sessions scored for curve plotting: higher must mean more benign,
    so the score is the negated longest malicious run."""
    config = config or MarkovConfig()
    return [
        (
            seq.label or "benign",
            -float(longest_malicious_run(model, config, seq.states)),
        )
        for seq in sessions
    ]


def bayes_session_scores(
    aset: ActivitySet,
    sessions: Sequence[StateSequence],
    floor: float | None = None,
) -> list[tuple[str, float]]:
    kwargs = {} if floor is None else {"floor": floor}
    return [
        (seq.label or "benign", max(session_score(aset, seq, **kwargs).values()))
        for seq in sessions
    ]


def write_sweep_csv(
    rows: Sequence[tuple[float, MetricsReport]], path: str | Path
) -> None:
    def cell(v: float | None) -> str:
        return "" if v is None else repr(v)

    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for threshold, r in rows:
            writer.writerow(
                [
                    threshold,
                    cell(r.recall),
                    cell(r.fnr),
                    cell(r.precision_paper),
                    cell(r.fpr),
                    cell(r.accuracy),
                    cell(r.f_score),
                ]
            )


def write_curve_csv(curve: Curve, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVE_HEADER)
        for p in curve.points:
            writer.writerow([repr(p.x), repr(p.y), repr(p.threshold)])


def export_features(
    sessions: Sequence[StateSequence], profile: DeviceProfile, path: str | Path
) -> int:
    """Write per-second labelled bit rows for offline experimentation.

    Header is the sensor ids plus ``label``; returns data rows written.
    """
    rows = 0
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*profile.sensor_ids(), "label"])
        for seq in sessions:
            label = seq.label or "benign"
            for v in seq.conditions:
                writer.writerow([*v.bits, label])
                rows += 1
    return rows
