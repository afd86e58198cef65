"""Command line: simulate, train, detect, eval, export-features.

Exit codes: 0 success, 2 input or configuration problem, 3 model/profile
mismatch, 4 data out of range.  The SIXTHSENSE_LOG environment variable
sets the log level (DEBUG, INFO, WARNING, ERROR).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import bayes, markov, metrics, preprocess, synth
from .errors import (
    DegenerateCounts,
    ProfileMismatch,
    SixthSenseError,
    StateOutOfRange,
)
from .ingest import load_manifest, parse_trace
from .profiles import DeviceProfile, decode_state, resolve_profile

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_MISMATCH = 3
EXIT_RANGE = 4


@dataclass
class RunConfig:
    """Defaults shared by the subcommands; a --config JSON overrides these,
    and explicit flags override the config file."""

    profile: str = "watch9"
    detector: str = "markov"
    consecutive_threshold: int = 3
    unseen_policy: str = "zero_prob"
    epsilon: float = 1e-6
    score_threshold: float = bayes.DEFAULT_SCORE_THRESHOLD
    likelihood_floor: float = bayes.DEFAULT_LIKELIHOOD_FLOOR
    smoothing_alpha: float = bayes.DEFAULT_ALPHA
    train_fraction: float = 0.75
    window_s: int = 300
    seed: int = 0
    log_level: str | None = None

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except OSError as exc:
            raise SixthSenseError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise SixthSenseError(f"config {path} is not valid JSON: {exc}") from exc
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise SixthSenseError(
                f"config {path}: unknown keys {sorted(unknown)}; "
                f"known: {sorted(known)}"
            )
        return cls(**doc)


def _load_run_config(args: argparse.Namespace) -> RunConfig:
    if getattr(args, "config", None):
        return RunConfig.from_file(args.config)
    return RunConfig()


def _pick(cli_value, config_value):
    return config_value if cli_value is None else cli_value


def _setup_logging(config: RunConfig) -> None:
    level_name = os.environ.get("SIXTHSENSE_LOG") or config.log_level or "WARNING"
    level = getattr(logging, level_name.upper(), None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )


def _fail(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


def _load_model(path: str | Path):
    """Model files self-describe: transition models carry counts, activity
    sets carry activities."""
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise SixthSenseError(f"cannot read model {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SixthSenseError(f"model {path} is not valid JSON: {exc}") from exc
    if "counts" in doc:
        return markov.model_from_dict(doc)
    if "activities" in doc:
        return bayes.activity_set_from_dict(doc)
    raise SixthSenseError(
        f"model {path} has neither transition counts nor activity models"
    )


def _profile_for_model(args_profile: str | None, config: RunConfig, model) -> DeviceProfile:
    ref = args_profile or model.profile_name
    try:
        profile = resolve_profile(ref)
    except SixthSenseError:
        # Model names a non-built-in profile; fall back to the configured one.
        profile = resolve_profile(config.profile)
    if profile.name != model.profile_name or profile.n != model.n:
        raise ProfileMismatch(
            f"model was fitted against {model.profile_name!r} (n={model.n}), "
            f"got profile {profile.name!r} (n={profile.n})"
        )
    return profile


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _load_run_config(args)
    _setup_logging(config)
    if args.spec and args.spec != "default":
        spec = synth.load_corpus_spec(args.spec)
    else:
        spec = synth.CorpusSpec()
    if args.seed is not None:
        spec = synth.CorpusSpec.from_dict({**spec.to_dict(), "master_seed": args.seed})
    if args.profile is not None:
        spec = synth.CorpusSpec.from_dict({**spec.to_dict(), "profile": args.profile})
    profile = resolve_profile(spec.profile)
    manifest = synth.generate_corpus(spec, args.out, profile=profile)
    n_benign = sum(g.count for g in spec.benign)
    n_threat = sum(g.count for g in spec.threats)
    print(
        f"wrote {n_benign + n_threat} sessions ({n_benign} benign, "
        f"{n_threat} malicious) to {manifest}"
    )
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    config = _load_run_config(args)
    _setup_logging(config)
    profile = resolve_profile(_pick(args.profile, config.profile))
    records = load_manifest(args.manifest, profile)
    seed = _pick(args.seed, config.seed)
    fraction = _pick(args.train_fraction, config.train_fraction)
    train_records, test_records = metrics.split(
        records, metrics.SplitSpec(train_fraction=fraction, rng_seed=seed)
    )
    train_seqs = [preprocess.prepare_session(r, profile) for r in train_records]
    detector = _pick(args.detector, config.detector)
    out = Path(args.out)
    if detector == "markov":
        model = markov.fit_markov(train_seqs, profile)
        markov.save_transition_model(model, out)
        summary = (
            f"transition model: {len(model.counts)} transitions over "
            f"{len(model.row_totals)} states"
        )
    elif detector == "bayes":
        alpha = _pick(args.alpha, config.smoothing_alpha)
        groups = bayes.group_by_activity(train_seqs)
        aset = bayes.fit_bayes(groups, profile, alpha=alpha)
        bayes.save_activity_set(aset, out)
        summary = f"activity set: {len(aset.models)} activities"
    else:
        _fail(f"unknown detector {detector!r}")
        return EXIT_INPUT
    split_record = {
        "rng_seed": seed,
        "train_fraction": fraction,
        "train": [r.source_id for r in train_records],
        "test": [r.source_id for r in test_records],
    }
    split_path = out.with_suffix(out.suffix + ".split.json")
    split_path.write_text(json.dumps(split_record, indent=2) + "\n")
    print(
        f"trained on {len(train_records)} sessions, held out "
        f"{len(test_records)}; {summary}\nmodel: {out}\nsplit: {split_path}"
    )
    return EXIT_OK


def _detect_batch(model, profile: DeviceProfile, args, config: RunConfig) -> int:
    input_path = Path(args.input)
    with input_path.open() as fh:
        first = fh.readline()
    if first.startswith("trace_path"):
        records = load_manifest(input_path, profile)
        sessions = [preprocess.prepare_session(r, profile) for r in records]
    else:
        trace = parse_trace(input_path, profile)
        frames = preprocess.resample(trace, profile)
        seq = preprocess.binarize(frames, profile)
        seq.source_id = input_path.name
        sessions = [seq]
    if isinstance(model, markov.TransitionModel):
        mconfig = markov.MarkovConfig(
            consecutive_threshold=_pick(args.threshold, config.consecutive_threshold),
            unseen_policy=_pick(args.policy, config.unseen_policy),
            epsilon=_pick(args.epsilon, config.epsilon),
        )
        for seq in sessions:
            v = markov.classify_markov(model, mconfig, seq.states)
            alarm = "-" if v.first_alarm_second is None else str(v.first_alarm_second)
            print(
                f"{seq.source_id},{v.classification},"
                f"longest_run={v.longest_run};first_alarm={alarm}"
            )
    else:
        bconfig = bayes.BayesConfig(
            score_threshold=_pick(args.score_threshold, config.score_threshold),
            likelihood_floor=config.likelihood_floor,
        )
        for seq in sessions:
            v = bayes.classify_bayes(model, bconfig, seq)
            print(
                f"{seq.source_id},{v.classification},"
                f"best={v.best_activity};score={v.best_score:.6f}"
            )
    return EXIT_OK


def _detect_stream(model, profile: DeviceProfile, args, config: RunConfig) -> int:
    """Consume ``second,state_code`` lines; emit one verdict line each.

    Output: ``second,malicious_flag,value`` with value the current run
    length (transition model) or the running best mean posterior (activity
    set), then a final ``ALARM,<second>`` line if the session trips.
    """
    source = sys.stdin if args.input == "-" else open(args.input)
    is_markov = isinstance(model, markov.TransitionModel)
    if is_markov:
        mconfig = markov.MarkovConfig(
            consecutive_threshold=_pick(args.threshold, config.consecutive_threshold),
            unseen_policy=_pick(args.policy, config.unseen_policy),
            epsilon=_pick(args.epsilon, config.epsilon),
        )
        det = markov.DetectorState()
    else:
        bconfig = bayes.BayesConfig(
            score_threshold=_pick(args.score_threshold, config.score_threshold),
            likelihood_floor=config.likelihood_floor,
        )
        sums = {m.activity: 0.0 for m in model.models}
        count = 0
    alarm_second: int | None = None
    last_second: int | None = None
    try:
        for raw in source:
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise SixthSenseError(
                    f"stream line {line!r} is not 'second,state_code'"
                )
            try:
                second, code = int(parts[0]), int(parts[1])
            except ValueError:
                raise SixthSenseError(
                    f"stream line {line!r} is not 'second,state_code'"
                ) from None
            last_second = second
            if is_markov:
                before_alarm = det.first_alarm
                det, verdict = markov.step(model, mconfig, det, code)
                if det.first_alarm is not None and before_alarm is None:
                    alarm_second = second
                print(f"{second},{1 if verdict.malicious else 0},{det.run}")
            else:
                bits = decode_state(code, profile).bits
                post = bayes.second_posterior(model, bits, bconfig.likelihood_floor)
                for a, p in post.items():
                    sums[a] += p
                count += 1
                best_mean = max(sums.values()) / count
                flagged = max(post.values()) < bconfig.score_threshold
                print(f"{second},{1 if flagged else 0},{best_mean:.6f}")
    finally:
        if source is not sys.stdin:
            source.close()
    if is_markov:
        if alarm_second is not None:
            print(f"ALARM,{alarm_second}")
    else:
        if count and max(sums.values()) / count < bconfig.score_threshold:
            print(f"ALARM,{last_second}")
    return EXIT_OK


def cmd_detect(args: argparse.Namespace) -> int:
    config = _load_run_config(args)
    _setup_logging(config)
    model = _load_model(args.model)
    profile = _profile_for_model(args.profile, config, model)
    if args.mode == "stream":
        return _detect_stream(model, profile, args, config)
    return _detect_batch(model, profile, args, config)


def _parse_thresholds(raw: str | None, is_markov: bool):
    if raw is None:
        return None
    try:
        if is_markov:
            return [int(x) for x in raw.split(",") if x.strip() != ""]
        return [float(x) for x in raw.split(",") if x.strip() != ""]
    except ValueError:
        raise SixthSenseError(f"bad threshold list {raw!r}") from None


def cmd_eval(args: argparse.Namespace) -> int:
    config = _load_run_config(args)
    _setup_logging(config)
    model = _load_model(args.model)
    profile = _profile_for_model(args.profile, config, model)
    records = load_manifest(args.manifest, profile)
    if args.split:
        try:
            doc = json.loads(Path(args.split).read_text())
            keep = set(doc["test"])
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise SixthSenseError(f"bad split record {args.split}: {exc}") from exc
        records = [r for r in records if r.source_id in keep]
    if not records:
        _fail("no sessions to evaluate")
        return EXIT_INPUT
    sessions = [preprocess.prepare_session(r, profile) for r in records]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    is_markov = isinstance(model, markov.TransitionModel)
    notes: list[str] = []
    if is_markov:
        mconfig = markov.MarkovConfig(
            consecutive_threshold=config.consecutive_threshold,
            unseen_policy=_pick(args.policy, config.unseen_policy),
            epsilon=_pick(args.epsilon, config.epsilon),
        )
        t_values = _parse_thresholds(args.thresholds, True) or list(
            metrics.DEFAULT_MARKOV_T_VALUES
        )
        rows = metrics.sweep_markov(model, sessions, t_values, mconfig)
        scores = metrics.markov_session_scores(model, sessions, mconfig)
    else:
        thresholds = _parse_thresholds(args.thresholds, False) or list(
            metrics.DEFAULT_BAYES_THRESHOLDS
        )
        rows = metrics.sweep_bayes(
            model, sessions, thresholds, config.likelihood_floor
        )
        scores = metrics.bayes_session_scores(
            model, sessions, config.likelihood_floor
        )
    metrics.write_sweep_csv(rows, out / "sweep.csv")
    try:
        roc, prc, auprc = metrics.curves(scores)
        metrics.write_curve_csv(roc, out / "roc.csv")
        metrics.write_curve_csv(prc, out / "prc.csv")
        curve_note = f"auprc={auprc!r}"
    except DegenerateCounts as exc:
        notes.append(f"curves skipped: {exc}")
        curve_note = "auprc=undefined (single-label evaluation set)"

    def fmt(v: float | None) -> str:
        return "-" if v is None else f"{v:.4f}"

    best_t, best = max(
        rows, key=lambda row: -1.0 if row[1].f_score is None else row[1].f_score
    )
    best_line = (
        f"best threshold={best_t} recall={fmt(best.recall)} "
        f"precision_paper={fmt(best.precision_paper)} fpr={fmt(best.fpr)} "
        f"accuracy={fmt(best.accuracy)} f_score={fmt(best.f_score)}"
    )
    degenerate_rows = [t for t, r in rows if r.degenerate]
    if degenerate_rows:
        notes.append(
            "evaluation set is missing a label class; affected rates are "
            "blank in sweep.csv"
        )
    n_benign = sum(1 for s in sessions if s.label == "benign")
    summary_lines = [
        f"model: {args.model}",
        f"manifest: {args.manifest}",
        f"sessions: {len(sessions)} ({n_benign} benign, "
        f"{len(sessions) - n_benign} malicious)",
        f"detector: {'markov' if is_markov else 'bayes'}",
        curve_note,
        best_line,
        *notes,
    ]
    (out / "summary.txt").write_text("\n".join(summary_lines) + "\n")
    print(best_line)
    for note in notes:
        print(f"note: {note}")
    return EXIT_OK


def cmd_export_features(args: argparse.Namespace) -> int:
    config = _load_run_config(args)
    _setup_logging(config)
    profile = resolve_profile(_pick(args.profile, config.profile))
    records = load_manifest(args.manifest, profile)
    sessions = [preprocess.prepare_session(r, profile) for r in records]
    rows = metrics.export_features(sessions, profile, args.out)
    print(f"wrote {rows} rows for {len(sessions)} sessions to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sixthsense",
        description="Sensor-activity modelling and anomaly detection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--profile", help="built-in profile name or profile JSON path")
        p.add_argument("--seed", type=int, help="random seed")
        p.add_argument("--config", help="RunConfig JSON path")

    p = sub.add_parser("simulate", help="generate a labelled synthetic corpus")
    p.add_argument("--spec", help="corpus spec JSON path, or 'default'")
    p.add_argument("--out", required=True, help="output directory")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="split a corpus and fit a detector")
    p.add_argument("--manifest", required=True)
    p.add_argument("--detector", choices=["markov", "bayes"])
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--train-fraction", type=float, dest="train_fraction")
    p.add_argument("--alpha", type=float, help="Bernoulli smoothing")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="classify sessions or a state stream")
    p.add_argument("--model", required=True)
    p.add_argument(
        "--input",
        required=True,
        help="trace CSV or manifest CSV (batch), state lines or '-' (stream)",
    )
    p.add_argument("--mode", choices=["batch", "stream"], default="batch")
    p.add_argument("--threshold", type=int, help="run length T")
    p.add_argument("--score-threshold", type=float, dest="score_threshold")
    p.add_argument("--policy", choices=list(markov.UNSEEN_POLICIES))
    p.add_argument("--epsilon", type=float)
    common(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="threshold sweep and curves on a corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--split", help="split record JSON; evaluate its test ids only")
    p.add_argument("--thresholds", help="comma-separated threshold list")
    p.add_argument("--policy", choices=list(markov.UNSEEN_POLICIES))
    p.add_argument("--epsilon", type=float)
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser(
        "export-features", help="per-second labelled bit matrix as CSV"
    )
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    common(p)
    p.set_defaults(func=cmd_export_features)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StateOutOfRange as exc:
        _fail(str(exc))
        return EXIT_RANGE
    except ProfileMismatch as exc:
        _fail(str(exc))
        return EXIT_MISMATCH
    except SixthSenseError as exc:
        _fail(str(exc))
        return EXIT_INPUT
    except OSError as exc:
        _fail(str(exc))
        return EXIT_INPUT


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
