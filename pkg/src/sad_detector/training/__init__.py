"""訓練模組

時間順序小批次訓練、檢查點存取與推論。
"""

from sad_detector.training.trainer import (
    CHECKPOINT_NAME,
    REPORT_NAME,
    EpochRecord,
    Predictions,
    TrainReport,
    Trainer,
    embed_events,
    infer_scores,
    load_model,
    predict_events,
    save_model,
    train,
)

__all__ = [
    "CHECKPOINT_NAME",
    "REPORT_NAME",
    "EpochRecord",
    "Predictions",
    "TrainReport",
    "Trainer",
    "embed_events",
    "infer_scores",
    "load_model",
    "predict_events",
    "save_model",
    "train",
]
