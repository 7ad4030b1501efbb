"""ASR-free keyword spotting toolkit.

Query-by-example DTW search from isolated keyword templates, distillation
of DTW scores into a fast CNN (CNN-DTW), autoencoder / correspondence-
autoencoder feature learning, evaluation metrics, and a complexity
profiler, plus a synthetic benchmark corpus and a pipeline CLI.
"""

__version__ = "0.1.0"

from .features import (
    AudioBuffer,
    FeatureKind,
    FeatureSequence,
    MfccConfig,
    apply_cmvn,
    delta_features,
    extract_mfcc,
    read_features,
    write_features,
)
from .dtw import (
    DtwAlignment,
    KeywordTemplate,
    ScoreVector,
    SearchConfig,
    batch_score,
    dtw_align,
    frame_similarity,
    score_utterance,
    sweep_template,
)

__all__ = [
    "AudioBuffer",
    "FeatureKind",
    "FeatureSequence",
    "MfccConfig",
    "apply_cmvn",
    "delta_features",
    "extract_mfcc",
    "read_features",
    "write_features",
    "DtwAlignment",
    "KeywordTemplate",
    "ScoreVector",
    "SearchConfig",
    "batch_score",
    "dtw_align",
    "frame_similarity",
    "score_utterance",
    "sweep_template",
]
