"""Markov transition model: fitting, scoring, streaming, serialization."""

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sixthsense import (
    DetectorState,
    MarkovConfig,
    NoTrainingData,
    ProfileInvalid,
    StateOutOfRange,
    StateSequence,
    TooShort,
    classify_markov,
    fit_markov,
    load_transition_model,
    save_transition_model,
    sequence_probability,
    step,
    transition_prob,
)
from sixthsense.markov import longest_malicious_run


def seq(states, tag="walking"):
    return StateSequence(
        profile_name="watch9", states=list(states), conditions=[], label="benign",
        tag=tag,
    )


@pytest.fixture
def tiny_model(watch):
    return fit_markov([seq([0, 1, 1, 0, 2])], watch)


def test_fit_counts_and_probs(tiny_model):
    m = tiny_model
    assert m.counts == {(0, 1): 1, (1, 1): 1, (1, 0): 1, (0, 2): 1}
    assert m.row_totals == {0: 2, 1: 2}
    assert m.probs[(0, 1)] == 0.5
    assert m.probs[(1, 1)] == 0.5
    assert m.initial == {0: 1.0}
    assert m.trained_transitions == 4


def test_fit_initial_distribution(watch):
    m = fit_markov([seq([0, 1]), seq([0, 2]), seq([3, 0]), seq([3, 1])], watch)
    assert m.initial == {0: 0.5, 3: 0.5}


def test_fit_rows_sum_to_one(watch):
    rng = random.Random(5)
    seqs = [seq([rng.randrange(16) for _ in range(50)]) for _ in range(20)]
    m = fit_markov(seqs, watch)
    for a in m.row_totals:
        total = math.fsum(p for (x, _), p in m.probs.items() if x == a)
        assert total == pytest.approx(1.0, abs=1e-9)


def test_fit_needs_transitions(watch):
    with pytest.raises(NoTrainingData):
        fit_markov([], watch)
    with pytest.raises(NoTrainingData):
        fit_markov([seq([4])], watch)


def test_fit_rejects_out_of_range(watch):
    with pytest.raises(StateOutOfRange):
        fit_markov([seq([0, 512])], watch)


def test_sequence_probability_matches_product(tiny_model):
    lp = sequence_probability(tiny_model, [0, 1, 1, 0, 2])
    assert math.exp(lp) == pytest.approx(1 / 16, abs=1e-12)


def test_sequence_probability_zero_on_unseen(tiny_model):
    assert sequence_probability(tiny_model, [0, 1, 2]) == -math.inf
    # unseen initial state
    assert sequence_probability(tiny_model, [2, 0]) == -math.inf


def test_sequence_probability_epsilon_policy(tiny_model):
    lp = sequence_probability(
        tiny_model, [0, 1, 2], unseen_policy="epsilon", epsilon=1e-4
    )
    assert math.exp(lp) == pytest.approx(0.5 * 1e-4, rel=1e-9)


def test_sequence_probability_empty(tiny_model):
    with pytest.raises(TooShort):
        sequence_probability(tiny_model, [])


def test_transition_prob_policies(tiny_model):
    assert transition_prob(tiny_model, 0, 1, "zero_prob", 0.0) == 0.5
    assert transition_prob(tiny_model, 0, 3, "zero_prob", 0.0) == 0.0
    assert transition_prob(tiny_model, 0, 3, "epsilon", 1e-5) == 1e-5


def test_config_validation():
    with pytest.raises(ProfileInvalid):
        MarkovConfig(consecutive_threshold=0)
    with pytest.raises(ProfileInvalid):
        MarkovConfig(unseen_policy="other")
    with pytest.raises(ProfileInvalid):
        MarkovConfig(unseen_policy="epsilon", epsilon=0.5)
    MarkovConfig(unseen_policy="epsilon", epsilon=1e-3)


def test_first_state_never_malicious(tiny_model):
    config = MarkovConfig(consecutive_threshold=1)
    # state 2 was never a source state, but the first observation is exempt
    verdict = classify_markov(tiny_model, config, [2, 0, 1])
    assert verdict.per_step[0].malicious is True  # 2 -> 0 unseen
    state = DetectorState()
    state, v0 = step(tiny_model, config, state, 2)
    assert v0.malicious is False


def test_runs_below_threshold_stay_benign(tiny_model):
    config = MarkovConfig(consecutive_threshold=3)
    # 0->3 and 3->1 unseen (run 2), then 1->1 seen resets
    verdict = classify_markov(tiny_model, config, [0, 3, 1, 1, 0])
    assert verdict.longest_run == 2
    assert verdict.classification == "benign"
    assert verdict.first_alarm_second is None


def test_run_at_threshold_alarms(tiny_model):
    config = MarkovConfig(consecutive_threshold=3)
    verdict = classify_markov(tiny_model, config, [0, 3, 3, 3])
    assert verdict.longest_run == 3
    assert verdict.classification == "malicious"
    # third bad transition lands at sequence index 3
    assert verdict.first_alarm_second == 3
    assert verdict.per_step[2].alarm is True


def test_interrupted_runs_do_not_accumulate(tiny_model):
    config = MarkovConfig(consecutive_threshold=3)
    # bad, bad, good, bad, bad: never 3 in a row
    verdict = classify_markov(tiny_model, config, [1, 2, 0, 1, 2, 0])
    assert verdict.longest_run == 2
    assert verdict.classification == "benign"


def test_epsilon_policy_flags_rare_transitions(watch):
    # 0->1 probability lands at 1/2000, below the 1e-3 cutoff
    states = [0] * 2000 + [1, 0]
    m = fit_markov([seq(states)], watch)
    config = MarkovConfig(
        consecutive_threshold=1, unseen_policy="epsilon", epsilon=1e-3
    )
    verdict = classify_markov(m, config, [0, 1])
    assert verdict.classification == "malicious"


def test_classify_needs_two_states(tiny_model):
    with pytest.raises(TooShort):
        classify_markov(tiny_model, MarkovConfig(), [0])


@settings(max_examples=50, deadline=None)
@given(
    data=st.data(),
    length=st.integers(min_value=2, max_value=60),
)
def test_stream_equals_batch(watch, data, length):
    train = [
        data.draw(
            st.lists(
                st.integers(min_value=0, max_value=7), min_size=2, max_size=40
            )
        )
        for _ in range(3)
    ]
    train = [t for t in train if len(t) >= 2]
    m = fit_markov([seq(t) for t in train], watch)
    states = data.draw(
        st.lists(
            st.integers(min_value=0, max_value=7),
            min_size=length,
            max_size=length,
        )
    )
    config = MarkovConfig(consecutive_threshold=3)
    batch = classify_markov(m, config, states)
    fold = DetectorState()
    per_step = []
    for code in states:
        fold, verdict = step(m, config, fold, code)
        if verdict.from_state is not None:
            per_step.append(verdict)
    assert per_step == batch.per_step
    assert fold.first_alarm == batch.first_alarm_second
    streamed = "malicious" if fold.first_alarm is not None else "benign"
    assert streamed == batch.classification


def test_longest_run_helper_matches_classify(tiny_model):
    config = MarkovConfig(consecutive_threshold=3)
    states = [0, 3, 3, 1, 3, 3, 3, 0]
    assert longest_malicious_run(tiny_model, config, states) == classify_markov(
        tiny_model, config, states
    ).longest_run


def test_serialization_roundtrip(tmp_path, watch):
    rng = random.Random(11)
    seqs = [seq([rng.randrange(32) for _ in range(100)]) for _ in range(5)]
    m = fit_markov(seqs, watch)
    path = tmp_path / "model.json"
    save_transition_model(m, path)
    loaded = load_transition_model(path)
    assert loaded.counts == m.counts
    assert loaded.probs == m.probs
    assert loaded.initial == m.initial
    assert loaded.row_totals == m.row_totals
    assert loaded.profile_name == m.profile_name
    assert loaded.n == m.n


def test_load_rejects_bad_payload(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"profile_name": "watch9", "n": 9}')
    with pytest.raises(ProfileInvalid):
        load_transition_model(path)
