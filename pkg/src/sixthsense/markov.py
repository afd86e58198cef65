"""Benign-transition model and unseen-transition run detection.

Training counts adjacent state pairs over benign sequences.  Row-normalised
counts give the transition probabilities and sequence-leading states give
the start distribution::

    probs[(i, j)]  = counts[(i, j)] / row_totals[i]
    initial[s]     = (# training sequences starting in s) / (# sequences)

Scoring walks a session left to right.  A transition is malicious when its
trained probability is missing (default ``zero_prob`` policy) or below a
small epsilon (``epsilon`` policy), and the session is flagged once a run of
``consecutive_threshold`` malicious transitions in a row appears.  The first
state of a session has no predecessor and is never malicious by itself.

Counts are stored sparsely: state spaces run to 2**16 codes but a benign
corpus touches a tiny fraction of them.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from .errors import (
    NoTrainingData,
    ProfileInvalid,
    ProfileMismatch,
    StateOutOfRange,
    TooShort,
)
from .preprocess import StateSequence
from .profiles import DeviceProfile

MODEL_FORMAT_VERSION = 1
UNSEEN_POLICIES = ("zero_prob", "epsilon")
MAX_EPSILON = 1e-3


@dataclass
class MarkovConfig:
    """Detection knobs.  ``consecutive_threshold`` is the run length T."""

    consecutive_threshold: int = 3
    unseen_policy: str = "zero_prob"
    epsilon: float = 1e-6

    def __post_init__(self) -> None:
        if self.consecutive_threshold < 1:
            raise ProfileInvalid(
                f"consecutive_threshold must be >= 1, got {self.consecutive_threshold}"
            )
        if self.unseen_policy not in UNSEEN_POLICIES:
            raise ProfileInvalid(
                f"unseen_policy must be one of {UNSEEN_POLICIES}, "
                f"got {self.unseen_policy!r}"
            )
        if not 0.0 < self.epsilon <= MAX_EPSILON:
            raise ProfileInvalid(
                f"epsilon must be in (0, {MAX_EPSILON}], got {self.epsilon}"
            )


@dataclass
class TransitionModel:
    """Fitted transition statistics.  Treat as immutable once fitted."""

    profile_name: str
    n: int
    counts: dict[tuple[int, int], int] = field(default_factory=dict)
    row_totals: dict[int, int] = field(default_factory=dict)
    probs: dict[tuple[int, int], float] = field(default_factory=dict)
    initial: dict[int, float] = field(default_factory=dict)
    trained_transitions: int = 0

    @property
    def state_count(self) -> int:
        return 1 << self.n

    def check_state(self, code: int) -> None:
        if not 0 <= code < self.state_count:
            raise StateOutOfRange(
                f"state code {code} outside [0, {self.state_count}) for "
                f"model over profile {self.profile_name!r}"
            )


def fit_markov(
    train: Sequence[StateSequence], profile: DeviceProfile
) -> TransitionModel:
    """Count adjacent state pairs and leading states over the training set."""
    counts: dict[tuple[int, int], int] = defaultdict(int)
    leading: dict[int, int] = defaultdict(int)
    total_transitions = 0
    n_sequences = 0
    limit = profile.state_count
    for seq in train:
        if seq.profile_name != profile.name:
            raise ProfileMismatch(
                f"sequence {seq.source_id!r} built against {seq.profile_name!r}, "
                f"fitting against {profile.name!r}"
            )
        states = seq.states
        if not states:
            continue
        for code in states:
            if not 0 <= code < limit:
                raise StateOutOfRange(
                    f"state code {code} outside [0, {limit}) in "
                    f"sequence {seq.source_id!r}"
                )
        n_sequences += 1
        leading[states[0]] += 1
        for a, b in zip(states, states[1:]):
            counts[(a, b)] += 1
            total_transitions += 1
    if total_transitions == 0:
        raise NoTrainingData("training set contains no transitions")
    row_totals: dict[int, int] = defaultdict(int)
    for (a, _), c in counts.items():
        row_totals[a] += c
    probs = {pair: c / row_totals[pair[0]] for pair, c in counts.items()}
    initial = {s: c / n_sequences for s, c in leading.items()}
    return TransitionModel(
        profile_name=profile.name,
        n=profile.n,
        counts=dict(counts),
        row_totals=dict(row_totals),
        probs=probs,
        initial=initial,
        trained_transitions=total_transitions,
    )


def transition_prob(
    model: TransitionModel,
    a: int,
    b: int,
    unseen_policy: str = "zero_prob",
    epsilon: float = 1e-6,
) -> float:
    """Trained probability of a -> b; unseen pairs map to 0 or epsilon."""
    p = model.probs.get((a, b))
    if p is not None:
        return p
    return epsilon if unseen_policy == "epsilon" else 0.0


def sequence_probability(
    model: TransitionModel,
    states: Sequence[int],
    unseen_policy: str = "zero_prob",
    epsilon: float = 1e-6,
) -> float:
    """Log probability of a full session path.

    The linear-space value is ``initial[x0] * prod(probs[x(t-1), xt])``; the
    product is accumulated in log space so long sessions cannot underflow.
    Returns ``-inf`` when any factor is zero under the zero_prob policy.
    """
    if not states:
        raise TooShort("cannot score an empty sequence")
    for code in states:
        model.check_state(code)
    q = model.initial.get(states[0], 0.0)
    if q == 0.0:
        if unseen_policy != "epsilon":
            return -math.inf
        q = epsilon
    logp = math.log(q)
    for a, b in zip(states, states[1:]):
        p = transition_prob(model, a, b, unseen_policy, epsilon)
        if p == 0.0:
            return -math.inf
        logp += math.log(p)
    return logp


class StepVerdict(NamedTuple):
    """Outcome of feeding one state to the streaming detector."""

    from_state: int | None
    to_state: int
    prob: float | None
    malicious: bool
    alarm: bool


@dataclass(frozen=True)
class DetectorState:
    """Streaming fold state: previous code, current malicious run, position.

    ``position`` counts states consumed so far; the transition examined by
    a step lands at sequence index ``position`` (0-based) of its session.
    """

    prev: int | None = None
    run: int = 0
    position: int = 0
    first_alarm: int | None = None


def _is_malicious(model: TransitionModel, config: MarkovConfig, a: int, b: int) -> bool:
    if config.unseen_policy == "epsilon":
        return model.probs.get((a, b), 0.0) < config.epsilon
    return (a, b) not in model.probs


def step(
    model: TransitionModel,
    config: MarkovConfig,
    state: DetectorState,
    code: int,
) -> tuple[DetectorState, StepVerdict]:
    """Advance the streaming detector by one observed state code."""
    model.check_state(code)
    if state.prev is None:
        # First observation: nothing to compare against.
        verdict = StepVerdict(None, code, None, False, False)
        return DetectorState(prev=code, run=0, position=1, first_alarm=None), verdict
    malicious = _is_malicious(model, config, state.prev, code)
    prob = transition_prob(
        model, state.prev, code, config.unseen_policy, config.epsilon
    )
    run = state.run + 1 if malicious else 0
    first_alarm = state.first_alarm
    alarm = False
    if malicious and run >= config.consecutive_threshold and first_alarm is None:
        first_alarm = state.position
        alarm = True
    next_state = DetectorState(
        prev=code, run=run, position=state.position + 1, first_alarm=first_alarm
    )
    return next_state, StepVerdict(state.prev, code, prob, malicious, alarm)


@dataclass
class MarkovVerdict:
    """Batch classification result for one session."""

    per_step: list[StepVerdict]
    longest_run: int
    classification: str
    first_alarm_second: int | None = None


def classify_markov(
    model: TransitionModel, config: MarkovConfig, states: Sequence[int]
) -> MarkovVerdict:
    """Classify a whole session.

    Equivalent to folding :func:`step` over the sequence; kept as a direct
    loop so the streaming path and the batch path check each other.
    """
    if len(states) < 2:
        raise TooShort(f"need at least 2 states to classify, got {len(states)}")
    per_step: list[StepVerdict] = []
    run = 0
    longest = 0
    first_alarm: int | None = None
    threshold = config.consecutive_threshold
    prev = states[0]
    model.check_state(prev)
    for pos in range(1, len(states)):
        code = states[pos]
        model.check_state(code)
        malicious = _is_malicious(model, config, prev, code)
        prob = transition_prob(
            model, prev, code, config.unseen_policy, config.epsilon
        )
        if malicious:
            run += 1
            if run > longest:
                longest = run
        else:
            run = 0
        alarm = False
        if malicious and run >= threshold and first_alarm is None:
            first_alarm = pos
            alarm = True
        per_step.append(StepVerdict(prev, code, prob, malicious, alarm))
        prev = code
    classification = "malicious" if longest >= threshold else "benign"
    return MarkovVerdict(
        per_step=per_step,
        longest_run=longest,
        classification=classification,
        first_alarm_second=first_alarm,
    )


def longest_malicious_run(
    model: TransitionModel, config: MarkovConfig, states: Sequence[int]
) -> int:
    """Longest run of consecutive malicious transitions in a session."""
    if len(states) < 2:
        raise TooShort(f"need at least 2 states, got {len(states)}")
    run = 0
    longest = 0
    prev = states[0]
    model.check_state(prev)
    for code in states[1:]:
        model.check_state(code)
        if _is_malicious(model, config, prev, code):
            run += 1
            if run > longest:
                longest = run
        else:
            run = 0
        prev = code
    return longest


def model_to_dict(model: TransitionModel) -> dict:
    return {
        "profile_name": model.profile_name,
        "n": model.n,
        "counts": [[a, b, c] for (a, b), c in sorted(model.counts.items())],
        "initial": [[s, p] for s, p in sorted(model.initial.items())],
        "format_version": MODEL_FORMAT_VERSION,
    }


def model_from_dict(doc: dict) -> TransitionModel:
    """Rebuild a model from its serialised form.

    Probabilities and row totals are recomputed from counts, never trusted
    from the document.
    """
    try:
        version = doc["format_version"]
        if version != MODEL_FORMAT_VERSION:
            raise ProfileInvalid(
                f"unsupported transition model format_version {version!r}"
            )
        n = int(doc["n"])
        profile_name = str(doc["profile_name"])
        raw_counts = doc["counts"]
        raw_initial = doc["initial"]
    except KeyError as exc:
        raise ProfileInvalid(
            f"transition model document missing field {exc.args[0]!r}"
        ) from None
    if not 1 <= n <= 16:
        raise ProfileInvalid(f"transition model n={n} outside 1..16")
    limit = 1 << n
    counts: dict[tuple[int, int], int] = {}
    total = 0
    for entry in raw_counts:
        a, b, c = int(entry[0]), int(entry[1]), int(entry[2])
        if not (0 <= a < limit and 0 <= b < limit):
            raise ProfileInvalid(f"count entry ({a}, {b}) outside [0, {limit})")
        if c <= 0:
            raise ProfileInvalid(f"count entry ({a}, {b}) has non-positive count {c}")
        counts[(a, b)] = c
        total += c
    row_totals: dict[int, int] = defaultdict(int)
    for (a, _), c in counts.items():
        row_totals[a] += c
    probs = {pair: c / row_totals[pair[0]] for pair, c in counts.items()}
    initial: dict[int, float] = {}
    for entry in raw_initial:
        s, p = int(entry[0]), float(entry[1])
        if not 0 <= s < limit:
            raise ProfileInvalid(f"initial state {s} outside [0, {limit})")
        if not 0.0 <= p <= 1.0:
            raise ProfileInvalid(f"initial probability {p} outside [0, 1]")
        initial[s] = p
    return TransitionModel(
        profile_name=profile_name,
        n=n,
        counts=counts,
        row_totals=dict(row_totals),
        probs=probs,
        initial=initial,
        trained_transitions=total,
    )


def save_transition_model(model: TransitionModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n")


def load_transition_model(path: str | Path) -> TransitionModel:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ProfileInvalid(f"cannot read model {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ProfileInvalid(f"model {path} is not valid JSON: {exc}") from exc
    return model_from_dict(doc)
