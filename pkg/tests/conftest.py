"""Shared fixtures: profiles, tiny hand-built traces, a small generated corpus.

The corpus fixture is session-scoped because generation plus parsing is the
slow part of the suite; tests must not mutate it on disk.
"""

import pytest

from sixthsense import builtin_profile, synth
from sixthsense.ingest import load_manifest
from sixthsense.preprocess import prepare_session


@pytest.fixture(scope="session")
def watch():
    return builtin_profile("watch9")


@pytest.fixture(scope="session")
def phone():
    return builtin_profile("phone10")


@pytest.fixture(scope="session")
def activity_profiles():
    return synth.load_activity_profiles()


def small_spec(seed=21):
    """Cut-down corpus: 60 s sessions, 2 per benign activity, 1 per threat."""
    return synth.CorpusSpec(
        master_seed=seed,
        duration_s=60,
        profile="watch9",
        benign=tuple(
            synth.BenignGroup(activity=a, count=2)
            for a in (
                "walking",
                "gaming",
                "browsing",
                "phone_call",
                "sleeping",
                "driving_driver",
                "driving_passenger",
            )
        ),
        threats=(
            synth.ThreatGroup(
                kind="trigger_via_sensor", count=1, base_activity="browsing"
            ),
            synth.ThreatGroup(kind="leak_via_sensor", count=1, base_activity="walking"),
            synth.ThreatGroup(kind="steal_when_idle", count=1, base_activity="sleeping"),
        ),
    )


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    manifest = synth.generate_corpus(small_spec(), out)
    return manifest


@pytest.fixture(scope="session")
def small_sessions(small_corpus, watch):
    records = load_manifest(small_corpus, watch)
    return [prepare_session(r, watch) for r in records]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    lines = []
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            name = getattr(report, "nodeid", "")
            if "test_acceptance.py::test_criterion_" in name:
                test = name.split("::", 1)[1]
                label = test.replace("test_criterion_", "").replace("_", " ")
                ok = "PASS" if status == "passed" else "FAIL"
                lines.append((label, f"[{ok}] acceptance criterion {label}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
