"""Per-activity Bernoulli condition models with posterior averaging.

Each activity gets an independent-bit model over condition vectors.  With
``ones[j]`` the number of training seconds where bit j was set and ``S`` the
activity's total training seconds::

    theta[j] = (ones[j] + alpha) / (S + 2 * alpha)        # add-alpha smoothing
    prior    = S / total_seconds                          # or uniform

A second's likelihood under an activity multiplies ``theta[j]`` or
``1 - theta[j]`` per bit (accumulated in log space, floored in linear
space), posteriors normalise those across activities, and a session scores
each activity by the arithmetic mean of its per-second posteriors.  The
session is benign when the best mean posterior reaches the score threshold.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .errors import NoTrainingData, ProfileInvalid, ProfileMismatch, TooShort
from .preprocess import StateSequence
from .profiles import ConditionVector, DeviceProfile

MODEL_FORMAT_VERSION = 1
DEFAULT_ALPHA = 1.0
DEFAULT_SCORE_THRESHOLD = 0.60
DEFAULT_LIKELIHOOD_FLOOR = 1e-30


@dataclass
class BayesConfig:
    score_threshold: float = DEFAULT_SCORE_THRESHOLD
    likelihood_floor: float = DEFAULT_LIKELIHOOD_FLOOR

    def __post_init__(self) -> None:
        if not 0.0 <= self.score_threshold <= 1.0:
            raise ProfileInvalid(
                f"score_threshold must be in [0, 1], got {self.score_threshold}"
            )
        if self.likelihood_floor <= 0.0:
            raise ProfileInvalid(
                f"likelihood_floor must be > 0, got {self.likelihood_floor}"
            )


@dataclass(frozen=True)
class ActivityModel:
    """Bernoulli parameters for one activity."""

    activity: str
    theta: tuple[float, ...]
    prior: float
    seconds_trained: int


@dataclass
class ActivitySet:
    """All activity models for one profile, sorted by activity name."""

    profile_name: str
    models: list[ActivityModel]
    smoothing_alpha: float = DEFAULT_ALPHA

    def __post_init__(self) -> None:
        if not self.models:
            raise NoTrainingData("activity set needs at least one model")
        names = [m.activity for m in self.models]
        if len(set(names)) != len(names):
            raise ProfileInvalid(f"duplicate activity names in {names}")
        widths = {len(m.theta) for m in self.models}
        if len(widths) != 1:
            raise ProfileInvalid(f"inconsistent theta widths {sorted(widths)}")
        self.models = sorted(self.models, key=lambda m: m.activity)

    @property
    def n(self) -> int:
        return len(self.models[0].theta)

    def activities(self) -> list[str]:
        return [m.activity for m in self.models]


def group_by_activity(
    sequences: Sequence[StateSequence],
) -> dict[str, list[StateSequence]]:
    """Bucket training sequences by their session tag."""
    groups: dict[str, list[StateSequence]] = {}
    for seq in sequences:
        if not seq.tag:
            raise NoTrainingData(
                f"sequence {seq.source_id!r} has no activity tag"
            )
        groups.setdefault(seq.tag, []).append(seq)
    return groups


def fit_bayes(
    train_by_activity: Mapping[str, Sequence[StateSequence]],
    profile: DeviceProfile,
    alpha: float = DEFAULT_ALPHA,
    uniform_priors: bool = False,
) -> ActivitySet:
    """Fit one Bernoulli model per activity group."""
    if alpha <= 0:
        raise ProfileInvalid(f"smoothing alpha must be > 0, got {alpha}")
    if not train_by_activity:
        raise NoTrainingData("no activity groups to fit")
    n = profile.n
    per_activity: list[tuple[str, list[int], int]] = []
    total_seconds = 0
    for activity in sorted(train_by_activity):
        seqs = train_by_activity[activity]
        ones = [0] * n
        seconds = 0
        for seq in seqs:
            if seq.profile_name != profile.name:
                raise ProfileMismatch(
                    f"sequence {seq.source_id!r} built against "
                    f"{seq.profile_name!r}, fitting against {profile.name!r}"
                )
            for v in seq.conditions:
                for j, b in enumerate(v.bits):
                    if b:
                        ones[j] += 1
                seconds += 1
        if seconds == 0:
            raise NoTrainingData(f"activity {activity!r} has no training seconds")
        per_activity.append((activity, ones, seconds))
        total_seconds += seconds
    models = []
    for activity, ones, seconds in per_activity:
        theta = tuple((o + alpha) / (seconds + 2 * alpha) for o in ones)
        prior = (
            1.0 / len(per_activity) if uniform_priors else seconds / total_seconds
        )
        models.append(
            ActivityModel(
                activity=activity,
                theta=theta,
                prior=prior,
                seconds_trained=seconds,
            )
        )
    return ActivitySet(
        profile_name=profile.name, models=models, smoothing_alpha=alpha
    )


def _bits_of(v: ConditionVector | Sequence[int]) -> tuple[int, ...]:
    if isinstance(v, ConditionVector):
        return v.bits
    return tuple(v)


def second_likelihood(
    aset: ActivitySet,
    v: ConditionVector | Sequence[int],
    floor: float = DEFAULT_LIKELIHOOD_FLOOR,
) -> dict[str, float]:
    """P(condition vector | activity) per activity, floored below."""
    bits = _bits_of(v)
    if len(bits) != aset.n:
        raise ProfileMismatch(
            f"condition vector has {len(bits)} bits, activity set over "
            f"profile {aset.profile_name!r} expects {aset.n}"
        )
    out: dict[str, float] = {}
    for m in aset.models:
        logp = 0.0
        for b, t in zip(bits, m.theta):
            logp += math.log(t if b else 1.0 - t)
        out[m.activity] = max(math.exp(logp), floor)
    return out


def second_posterior(
    aset: ActivitySet,
    v: ConditionVector | Sequence[int],
    floor: float = DEFAULT_LIKELIHOOD_FLOOR,
) -> dict[str, float]:
    """Prior-weighted likelihoods normalised to sum to one."""
    like = second_likelihood(aset, v, floor)
    weighted = {m.activity: m.prior * like[m.activity] for m in aset.models}
    total = sum(weighted.values())
    if total <= 0.0:
        # All posteriors floored away; fall back to an even split.
        even = 1.0 / len(weighted)
        return {a: even for a in weighted}
    return {a: w / total for a, w in weighted.items()}


def session_score(
    aset: ActivitySet,
    seq: StateSequence,
    floor: float = DEFAULT_LIKELIHOOD_FLOOR,
) -> dict[str, float]:
    """Arithmetic mean of per-second posteriors, one score per activity."""
    if seq.profile_name != aset.profile_name:
        raise ProfileMismatch(
            f"sequence built against {seq.profile_name!r}, scoring against "
            f"{aset.profile_name!r}"
        )
    if not seq.conditions:
        raise TooShort("cannot score a session with no conditions")
    sums = {m.activity: 0.0 for m in aset.models}
    for v in seq.conditions:
        post = second_posterior(aset, v, floor)
        for a, p in post.items():
            sums[a] += p
    count = len(seq.conditions)
    return {a: s / count for a, s in sums.items()}


@dataclass
class BayesVerdict:
    per_activity_score: dict[str, float]
    best_activity: str
    best_score: float
    classification: str


def classify_bayes(
    aset: ActivitySet, config: BayesConfig, seq: StateSequence
) -> BayesVerdict:
    """Benign iff the best mean posterior reaches the score threshold.

    Ties on the score break toward the lexicographically smallest activity
    name so results never depend on dict ordering.
    """
    scores = session_score(aset, seq, config.likelihood_floor)
    best_activity = min(scores, key=lambda a: (-scores[a], a))
    best_score = scores[best_activity]
    classification = (
        "benign" if best_score >= config.score_threshold else "malicious"
    )
    return BayesVerdict(
        per_activity_score=scores,
        best_activity=best_activity,
        best_score=best_score,
        classification=classification,
    )


def activity_set_to_dict(aset: ActivitySet) -> dict:
    return {
        "profile_name": aset.profile_name,
        "alpha": aset.smoothing_alpha,
        "activities": [
            {
                "name": m.activity,
                "prior": m.prior,
                "theta": list(m.theta),
                "seconds_trained": m.seconds_trained,
            }
            for m in aset.models
        ],
        "format_version": MODEL_FORMAT_VERSION,
    }


def activity_set_from_dict(doc: dict) -> ActivitySet:
    try:
        version = doc["format_version"]
        if version != MODEL_FORMAT_VERSION:
            raise ProfileInvalid(
                f"unsupported activity model format_version {version!r}"
            )
        profile_name = str(doc["profile_name"])
        alpha = float(doc["alpha"])
        entries = doc["activities"]
    except KeyError as exc:
        raise ProfileInvalid(
            f"activity model document missing field {exc.args[0]!r}"
        ) from None
    models = []
    for entry in entries:
        try:
            theta = tuple(float(t) for t in entry["theta"])
            prior = float(entry["prior"])
            name = str(entry["name"])
            seconds = int(entry["seconds_trained"])
        except KeyError as exc:
            raise ProfileInvalid(
                f"activity entry missing field {exc.args[0]!r}"
            ) from None
        for t in theta:
            if not 0.0 < t < 1.0:
                raise ProfileInvalid(
                    f"activity {name!r}: theta value {t} outside (0, 1)"
                )
        if not 0.0 <= prior <= 1.0:
            raise ProfileInvalid(f"activity {name!r}: prior {prior} outside [0, 1]")
        models.append(
            ActivityModel(
                activity=name, theta=theta, prior=prior, seconds_trained=seconds
            )
        )
    return ActivitySet(
        profile_name=profile_name, models=models, smoothing_alpha=alpha
    )


def save_activity_set(aset: ActivitySet, path: str | Path) -> None:
    Path(path).write_text(json.dumps(activity_set_to_dict(aset), indent=2) + "\n")


def load_activity_set(path: str | Path) -> ActivitySet:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ProfileInvalid(f"cannot read model {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ProfileInvalid(f"model {path} is not valid JSON: {exc}") from exc
    return activity_set_from_dict(doc)
