"""模型模組

時間注意力編碼器、異常偵測器、投影網路與損失函數。
"""

from sad_detector.model.losses import (
    PairWeights,
    combine,
    contrastive_loss,
    cross_entropy,
    deviation_loss,
    pseudo_groups,
)
from sad_detector.model.networks import (
    AnomalyDetector,
    AttentionTrace,
    ProjectionHead,
    SADModel,
    TemporalAttentionEncoder,
    TimeEncoder,
    class_probability,
    time_encode,
)

__all__ = [
    "AnomalyDetector",
    "AttentionTrace",
    "PairWeights",
    "ProjectionHead",
    "SADModel",
    "TemporalAttentionEncoder",
    "TimeEncoder",
    "class_probability",
    "combine",
    "contrastive_loss",
    "cross_entropy",
    "deviation_loss",
    "pseudo_groups",
    "time_encode",
]
