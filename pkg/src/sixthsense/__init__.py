"""Context-aware sensor modelling and anomaly detection.

Per-second sensor condition vectors are encoded as small integers; benign
usage is modelled either as a Markov chain over those states or as
per-activity Bernoulli models, and sessions are scored against the model.
"""

from .bayes import (
    ActivityModel,
    ActivitySet,
    BayesConfig,
    BayesVerdict,
    classify_bayes,
    fit_bayes,
    group_by_activity,
    load_activity_set,
    save_activity_set,
    second_likelihood,
    second_posterior,
    session_score,
)
from .errors import (
    DegenerateCounts,
    EmptyTrace,
    ManifestError,
    NoTrainingData,
    ParseError,
    ProfileInvalid,
    ProfileMismatch,
    SixthSenseError,
    StateOutOfRange,
    ThreatSpecInvalid,
    TooFewSessions,
    TooShort,
    UnknownSensor,
)
from .ingest import (
    RawTrace,
    SensorReading,
    SessionRecord,
    load_manifest,
    parse_trace,
)
from .markov import (
    DetectorState,
    MarkovConfig,
    MarkovVerdict,
    TransitionModel,
    classify_markov,
    fit_markov,
    load_transition_model,
    save_transition_model,
    sequence_probability,
    step,
    transition_prob,
)
# The metrics() function itself stays at sixthsense.metrics.metrics so the
# submodule name is not shadowed by a package attribute.
from .metrics import (
    ConfusionCounts,
    Curve,
    MetricsReport,
    SplitSpec,
    confusion,
    curves,
    split,
    sweep_bayes,
    sweep_markov,
)
from .preprocess import (
    SecondFrame,
    StateSequence,
    binarize,
    prepare_session,
    resample,
)
from .profiles import (
    ConditionVector,
    DeviceProfile,
    SensorKind,
    SensorSpec,
    builtin_profile,
    decode_state,
    encode_state,
    load_profile,
    resolve_profile,
    save_profile,
)
from .synth import (
    ActivityProfile,
    CorpusSpec,
    ThreatSpec,
    generate_benign,
    generate_corpus,
    generate_threat,
    load_activity_profiles,
    write_trace,
)

__version__ = "0.1.0"

__all__ = [
    "ActivityModel",
    "ActivityProfile",
    "ActivitySet",
    "BayesConfig",
    "BayesVerdict",
    "ConditionVector",
    "ConfusionCounts",
    "CorpusSpec",
    "Curve",
    "DegenerateCounts",
    "DetectorState",
    "DeviceProfile",
    "EmptyTrace",
    "ManifestError",
    "MarkovConfig",
    "MarkovVerdict",
    "MetricsReport",
    "NoTrainingData",
    "ParseError",
    "ProfileInvalid",
    "ProfileMismatch",
    "RawTrace",
    "SecondFrame",
    "SensorKind",
    "SensorReading",
    "SensorSpec",
    "SessionRecord",
    "SixthSenseError",
    "SplitSpec",
    "StateOutOfRange",
    "StateSequence",
    "ThreatSpec",
    "ThreatSpecInvalid",
    "TooFewSessions",
    "TooShort",
    "TransitionModel",
    "UnknownSensor",
    "binarize",
    "builtin_profile",
    "classify_bayes",
    "classify_markov",
    "confusion",
    "curves",
    "decode_state",
    "encode_state",
    "fit_bayes",
    "fit_markov",
    "generate_benign",
    "generate_corpus",
    "generate_threat",
    "group_by_activity",
    "load_activity_profiles",
    "load_activity_set",
    "load_manifest",
    "load_profile",
    "load_transition_model",
    "parse_trace",
    "prepare_session",
    "resample",
    "resolve_profile",
    "save_activity_set",
    "save_profile",
    "save_transition_model",
    "second_likelihood",
    "second_posterior",
    "sequence_probability",
    "session_score",
    "split",
    "step",
    "sweep_bayes",
    "sweep_markov",
    "transition_prob",
    "write_trace",
]
