"""核心模組

實驗配置與時間衰減記憶庫。
"""

from sad_detector.core.config import (
    ABLATIONS,
    CONFIG_ENV_VAR,
    MODE_ANOMALY,
    MODE_DOWNSTREAM,
    MODES,
    ConfigManager,
    ExperimentConfig,
    LossConfig,
)
from sad_detector.core.memory_bank import (
    SIGMA_FLOOR,
    BankStats,
    MemoryBank,
    Message,
    ReferenceScore,
    decay_weight,
    decay_weights,
    deviation,
)

__all__ = [
    "ABLATIONS",
    "CONFIG_ENV_VAR",
    "MODES",
    "MODE_ANOMALY",
    "MODE_DOWNSTREAM",
    "SIGMA_FLOOR",
    "BankStats",
    "ConfigManager",
    "ExperimentConfig",
    "LossConfig",
    "MemoryBank",
    "Message",
    "ReferenceScore",
    "decay_weight",
    "decay_weights",
    "deviation",
]
