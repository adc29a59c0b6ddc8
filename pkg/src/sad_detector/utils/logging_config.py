"""日誌配置模組

集中管理專案的日誌配置，避免重複代碼。
主控台輸出一律寫到標準錯誤，標準輸出保留給 CLI 的表格與報告。
"""

import logging
import os
import sys
from logging.handlers import TimedRotatingFileHandler
from typing import Any

# 全局日誌格式設定
LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s:%(lineno)d - %(message)s"


def setup_logger(
    name: str, log_file: str | None = None, level: int = logging.INFO, log_dir: str = "logs"
) -> logging.Logger:
    """設定並返回日誌記錄器

    參數:
        name: 日誌記錄器名稱（通常使用 __name__）
        log_file: 日誌檔案名稱（相對於 log_dir），未指定時輸出到標準錯誤
        level: 日誌等級（預設 INFO）
        log_dir: 日誌目錄（預設 'logs'，僅在 log_file 有值時建立）

    回傳:
        配置好的日誌記錄器
    """
    logger = logging.getLogger(name)
    logger.setLevel(level)

    # 使用自定義屬性標記已配置的 logger，避免重複配置
    if getattr(logger, "_sad_detector_configured", False):
        return logger

    if not logger.handlers:
        handler: TimedRotatingFileHandler | logging.StreamHandler[Any]
        if log_file:
            os.makedirs(log_dir, exist_ok=True)
            # 檔案處理程序（每日輪替）
            file_path = os.path.join(log_dir, log_file)
            handler = TimedRotatingFileHandler(
                filename=file_path, when="midnight", interval=1, backupCount=7, encoding="utf-8"
            )
        else:
            handler = logging.StreamHandler(sys.stderr)

        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(handler)
        # 交由本處理程序輸出，避免根記錄器重複列印
        logger.propagate = False

    setattr(logger, "_sad_detector_configured", True)  # noqa: B010

    return logger


def setup_root_logger(log_file: str | None = None, level: int = logging.INFO, log_dir: str = "logs") -> None:
    """設定根日誌記錄器

    參數:
        log_file: 根日誌檔案名稱，未指定時只輸出到標準錯誤
        level: 日誌等級
        log_dir: 日誌目錄
    """
    root_logger = logging.getLogger()
    root_logger.setLevel(level)

    formatter = logging.Formatter(LOG_FORMAT)
    # 已有處理程序時不再加主控台；日誌檔案另行檢查
    if not root_logger.handlers:
        console = logging.StreamHandler(sys.stderr)
        console.setFormatter(formatter)
        root_logger.addHandler(console)

    if log_file:
        os.makedirs(log_dir, exist_ok=True)
        path = os.path.abspath(os.path.join(log_dir, log_file))
        if any(getattr(h, "baseFilename", None) == path for h in root_logger.handlers):
            return
        handler = TimedRotatingFileHandler(filename=path, when="midnight", interval=1, backupCount=7, encoding="utf-8")
        handler.setFormatter(formatter)
        root_logger.addHandler(handler)


def set_package_level(level: int) -> None:
    """調整本套件所有記錄器的日誌等級（CLI 的 --verbose/--quiet 使用）"""
    logging.getLogger().setLevel(level)
    for name, candidate in logging.Logger.manager.loggerDict.items():
        if name.startswith("sad_detector") and isinstance(candidate, logging.Logger):
            candidate.setLevel(level)
