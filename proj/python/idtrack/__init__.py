"""Multi-object tracking as in-context ID prediction.

A learnable ID dictionary plus a transformer ID decoder classify each
detection into the label of its historical trajectory. This package wraps
the C++ core: synthetic scene generation, training, online tracking, and
CLEAR/IDF1 evaluation.
"""

from ._idtrack import (  # noqa: F401
    BaselineConfig,
    Box,
    CapacityError,
    ConfigError,
    DataError,
    DecoderConfig,
    Detection,
    EvalCounts,
    EvalReport,
    InferenceConfig,
    LabeledDetection,
    LabeledSequence,
    Model,
    MotLine,
    NumericError,
    SceneConfig,
    TrainConfig,
    TrainResult,
    association_accuracy,
    evaluate_dataset,
    evaluate_sequence,
    generate_corpus,
    generate_sequence,
    hungarian,
    id_loss,
    idf1,
    init_model,
    iou,
    load_model,
    mota,
    read_dataset,
    read_mot_file,
    reid_baseline_tracker,
    run_sequence,
    save_model,
    train,
    write_dataset,
    write_mot_file,
)

__all__ = [name for name in dir() if not name.startswith("_")]
