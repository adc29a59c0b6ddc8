"""工具模組

包含錯誤類別、日誌配置、進度追蹤器等。
"""

# 導出錯誤類別
from sad_detector.utils.errors import (
    AppError,
    CheckpointError,
    ConfigError,
    DataFormatError,
    FileError,
    MemoryBankEmptyError,
    NumericError,
    ShapeError,
    TrainingError,
    ValidationError,
)

# 導出工具函數和類別
from sad_detector.utils.helpers import ProgressTracker, format_elapsed_time, format_exception

# 導出日誌配置
from sad_detector.utils.logging_config import set_package_level, setup_logger, setup_root_logger

__all__ = [
    # 錯誤類別
    "AppError",
    "CheckpointError",
    "ConfigError",
    "DataFormatError",
    "FileError",
    "MemoryBankEmptyError",
    "NumericError",
    # 進度追蹤工具
    "ProgressTracker",
    "ShapeError",
    "TrainingError",
    "ValidationError",
    "format_elapsed_time",
    "format_exception",
    # 日誌配置
    "set_package_level",
    "setup_logger",
    "setup_root_logger",
]
