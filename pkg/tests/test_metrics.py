"""Confusion-matrix rates, splits, threshold sweeps, and PR/ROC curves."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sixthsense import (
    ConfusionCounts,
    DegenerateCounts,
    MarkovConfig,
    SplitSpec,
    StateSequence,
    TooFewSessions,
    confusion,
    curves,
    fit_markov,
    split,
    sweep_bayes,
    sweep_markov,
)
from sixthsense.metrics import (
    DEFAULT_BAYES_THRESHOLDS,
    DEFAULT_MARKOV_T_VALUES,
    conventional_prc,
    export_features,
    markov_session_scores,
    metrics,
    write_curve_csv,
    write_sweep_csv,
)


def test_worked_example():
    r = metrics(ConfusionCounts(tp=9, fn=1, tn=8, fp=2))
    assert r.recall == pytest.approx(0.9)
    assert r.fnr == pytest.approx(0.1)
    assert r.precision_paper == pytest.approx(0.8)
    assert r.fpr == pytest.approx(0.2)
    assert r.accuracy == pytest.approx(17 / 20)
    assert r.f_score == pytest.approx(0.8471, abs=1e-4)
    assert r.precision_conventional == pytest.approx(9 / 11)
    assert not r.degenerate


def test_high_accuracy_row_truncates_to_published_shape():
    # 200 benign / 70 malicious with 5 misses and 1 false alarm lands on
    # the familiar 0.97/0.98 ballpark when truncated to two decimals
    r = metrics(ConfusionCounts(tp=195, fn=5, tn=69, fp=1))

    def trunc(x):
        return math.floor(x * 100) / 100

    assert trunc(r.recall) == 0.97
    assert trunc(r.fnr) == 0.02
    assert trunc(r.precision_paper) == 0.98
    assert trunc(r.fpr) == 0.01
    assert trunc(r.accuracy) == 0.97
    assert trunc(r.f_score) == 0.98


def test_zero_denominators_are_none_and_degenerate():
    r = metrics(ConfusionCounts(tp=0, fn=0, tn=3, fp=1))
    assert r.recall is None
    assert r.fnr is None
    assert r.f_score is None
    assert r.degenerate
    r = metrics(ConfusionCounts(tp=3, fn=1, tn=0, fp=0))
    assert r.precision_paper is None
    assert r.fpr is None
    assert r.degenerate


def test_f_score_zero_when_rates_zero():
    r = metrics(ConfusionCounts(tp=0, fn=5, tn=0, fp=5))
    assert r.recall == 0.0
    assert r.precision_paper == 0.0
    assert r.f_score == 0.0


def test_confusion_from_pairs():
    pairs = [
        ("benign", "benign"),
        ("benign", "malicious"),
        ("malicious", "malicious"),
        ("malicious", "benign"),
        ("benign", "benign"),
    ]
    c = confusion(pairs)
    assert (c.tp, c.fn, c.tn, c.fp) == (2, 1, 1, 1)


@settings(max_examples=200, deadline=None)
@given(
    tp=st.integers(min_value=0, max_value=500),
    fn=st.integers(min_value=0, max_value=500),
    tn=st.integers(min_value=0, max_value=500),
    fp=st.integers(min_value=0, max_value=500),
)
def test_rate_identities(tp, fn, tn, fp):
    r = metrics(ConfusionCounts(tp=tp, fn=fn, tn=tn, fp=fp))
    if r.recall is not None:
        assert r.recall + r.fnr == pytest.approx(1.0, abs=1e-12)
    if r.precision_paper is not None:
        assert r.precision_paper + r.fpr == pytest.approx(1.0, abs=1e-12)
    total = tp + fn + tn + fp
    if total:
        assert r.accuracy == pytest.approx((tp + tn) / total, abs=1e-12)


class FakeSession:
    def __init__(self, label, name):
        self.label = label
        self.name = name

    def __repr__(self):
        return self.name


def test_split_shapes_and_membership():
    benign = [FakeSession("benign", f"b{i}") for i in range(8)]
    malicious = [FakeSession("malicious", f"m{i}") for i in range(2)]
    train, test = split(benign + malicious, SplitSpec(rng_seed=3))
    assert len(train) == 6
    assert len(test) == 4
    assert all(s.label == "benign" for s in train)
    assert sum(1 for s in test if s.label == "malicious") == 2
    # no session lost or duplicated
    names = sorted(s.name for s in train + test)
    assert names == sorted(s.name for s in benign + malicious)


def test_split_is_seed_deterministic():
    sessions = [FakeSession("benign", f"b{i}") for i in range(9)]
    a_train, a_test = split(sessions, SplitSpec(rng_seed=42))
    b_train, b_test = split(sessions, SplitSpec(rng_seed=42))
    assert [s.name for s in a_train] == [s.name for s in b_train]
    c_train, _ = split(sessions, SplitSpec(rng_seed=43))
    assert [s.name for s in a_train] != [s.name for s in c_train]


def test_split_needs_two_benign():
    with pytest.raises(TooFewSessions):
        split([FakeSession("benign", "b0")], SplitSpec())


def mkstates(states, label):
    return StateSequence(
        profile_name="watch9",
        states=list(states),
        conditions=[],
        label=label,
        tag="walking" if label == "benign" else "trigger_via_sensor",
    )


@pytest.fixture
def sweep_fixture(watch):
    train = [mkstates([0, 1, 0, 1, 0, 1], "benign")]
    model = fit_markov(train, watch)
    sessions = [
        mkstates([0, 1, 0, 1], "benign"),
        mkstates([0, 2, 3, 2, 3], "malicious"),  # one long unseen run
        mkstates([0, 1, 2, 1, 0, 1], "benign"),  # brief unseen excursion
    ]
    return model, sessions


def test_sweep_markov_rows(sweep_fixture):
    model, sessions = sweep_fixture
    rows = sweep_markov(model, sessions, t_values=[0, 1, 2, 3])
    assert [t for t, _ in rows] == [0, 1, 2, 3]
    by_t = dict(rows)
    # T=0: a run of zero or more is always reached, everything malicious
    assert by_t[0].recall == 0.0
    # T=1 flags the benign session with a single unseen transition
    assert by_t[1].recall == pytest.approx(0.5)
    assert by_t[1].fpr == 0.0
    # T=3: excursion of length 2 forgiven, threat run of 4 still caught
    assert by_t[3].recall == 1.0
    assert by_t[3].fpr == 0.0


def test_sweep_matches_direct_classification(sweep_fixture, watch):
    from sixthsense import classify_markov

    model, sessions = sweep_fixture
    rows = sweep_markov(model, sessions, t_values=[2])
    config = MarkovConfig(consecutive_threshold=2)
    pairs = [
        (s.label, classify_markov(model, config, s.states).classification)
        for s in sessions
    ]
    direct = metrics(confusion(pairs))
    assert rows[0][1] == direct


def test_sweep_markov_rejects_negative_t(sweep_fixture):
    model, sessions = sweep_fixture
    with pytest.raises(Exception):
        sweep_markov(model, sessions, t_values=[-1])


def scored(pairs):
    return list(pairs)


def brute_force_curves(session_scores):
    """Oracle: recompute each point with an explicit confusion matrix."""
    thresholds = [math.inf] + sorted(
        {s for _, s in session_scores}, reverse=True
    )
    roc, prc = [], []
    for theta in thresholds:
        tp = sum(1 for l, s in session_scores if l == "benign" and s >= theta)
        fn = sum(1 for l, s in session_scores if l == "benign" and s < theta)
        tn = sum(1 for l, s in session_scores if l == "malicious" and s < theta)
        fp = sum(1 for l, s in session_scores if l == "malicious" and s >= theta)
        r = metrics(ConfusionCounts(tp=tp, fn=fn, tn=tn, fp=fp))
        roc.append((r.fpr, r.recall, theta))
        prc.append((r.recall, r.precision_paper, theta))
    return roc, prc


def test_curves_match_brute_force():
    import random

    rng = random.Random(0)
    session_scores = [
        ("benign" if rng.random() < 0.6 else "malicious", rng.choice([0.1, 0.3, 0.5, 0.7, 0.9]))
        for _ in range(50)
    ]
    roc, prc, auprc = curves(session_scores)
    oracle_roc, oracle_prc = brute_force_curves(session_scores)
    assert [(p.x, p.y, p.threshold) for p in roc.points] == oracle_roc
    assert [(p.x, p.y, p.threshold) for p in prc.points] == oracle_prc


def test_perfect_separator_auprc_exactly_one():
    session_scores = [("benign", 1.0)] * 32 + [("malicious", 0.0)] * 16
    _, prc, auprc = curves(session_scores)
    assert auprc == 1.0
    assert prc.au == 1.0


def test_curves_need_both_labels():
    with pytest.raises(DegenerateCounts):
        curves([("benign", 0.5), ("benign", 0.7)])


def test_conventional_prc_area_tracks_prevalence():
    import random

    rng = random.Random(7)
    # labels independent of scores: area under the conventional PR curve
    # stays near the benign prevalence
    session_scores = [
        ("benign" if rng.random() < 0.7 else "malicious", rng.random())
        for _ in range(400)
    ]
    curve = conventional_prc(session_scores)
    assert curve.au == pytest.approx(0.7, abs=0.1)


def test_markov_session_scores_are_negated_runs(sweep_fixture):
    model, sessions = sweep_fixture
    scores = markov_session_scores(model, sessions, MarkovConfig())
    assert [l for l, _ in scores] == [s.label for s in sessions]
    assert scores[0][1] == 0.0  # all transitions seen
    assert scores[1][1] == -4.0
    assert scores[2][1] == -2.0


def test_write_sweep_csv(tmp_path, sweep_fixture):
    model, sessions = sweep_fixture
    rows = sweep_markov(model, sessions, t_values=[0, 1])
    out = tmp_path / "sweep.csv"
    write_sweep_csv(rows, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "threshold,recall,fnr,precision_paper,fpr,accuracy,f_score"
    assert len(lines) == 3
    assert lines[1].startswith("0,")


def test_write_sweep_csv_blanks_none(tmp_path):
    rows = [(1, metrics(ConfusionCounts(tp=0, fn=0, tn=1, fp=0)))]
    out = tmp_path / "sweep.csv"
    write_sweep_csv(rows, out)
    assert ",," in out.read_text().splitlines()[1]


def test_write_curve_csv(tmp_path):
    session_scores = [("benign", 0.9), ("malicious", 0.1)]
    roc, _, _ = curves(session_scores)
    out = tmp_path / "roc.csv"
    write_curve_csv(roc, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "x,y,threshold"
    assert lines[1].endswith(",inf")


def test_export_features(tmp_path, watch, small_sessions):
    out = tmp_path / "features.csv"
    rows = export_features(small_sessions, watch, out)
    lines = out.read_text().splitlines()
    assert rows == sum(len(s.conditions) for s in small_sessions)
    assert len(lines) == rows + 1
    assert lines[0].split(",")[:2] == ["accelerometer", "gyroscope"]
    assert lines[0].split(",")[-1] == "label"
    assert set(lines[1].split(",")[0:1]) <= {"0", "1"}
