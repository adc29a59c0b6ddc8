"""工具函數模組

- format_exception: 日誌用的單行例外摘要
- format_elapsed_time: 秒數轉成「1 小時 1 分 5 秒」
- ProgressTracker: 以最近的批次速率估計訓練剩餘時間
"""

import time
import traceback
from collections import deque
from collections.abc import Callable
from typing import Any

from sad_detector.utils.errors import AppError
from sad_detector.utils.logging_config import setup_logger

logger = setup_logger(__name__)


def format_exception(e: Exception) -> str:
    """AppError 直接輸出 "[code] message"，其他例外附上發生位置"""
    if isinstance(e, AppError):
        return str(e)
    frames = traceback.extract_tb(e.__traceback__)
    if not frames:
        return f"{type(e).__name__}: {e!s}"
    last = frames[-1]
    return f"{type(e).__name__}: {e!s}\n最後調用: {last.filename}:{last.lineno} in {last.name}"


def format_elapsed_time(seconds: float) -> str:
    total = int(seconds)
    hours, rest = divmod(total, 3600)
    minutes, secs = divmod(rest, 60)
    if hours:
        return f"{hours} 小時 {minutes} 分 {secs} 秒"
    if minutes:
        return f"{minutes} 分 {secs} 秒"
    return f"{secs} 秒"


class ProgressTracker:
    """訓練進度追踪器

    每次更新都會以關鍵字參數呼叫 callback：
    current、total、description、elapsed、remaining（秒）。

    參數:
        total: 總步數（訓練時為 epochs × 每 epoch 批次數）
        description: 顯示用描述
        callback: 進度回調
        window: 估計速率時採用的最近更新筆數
    """

    def __init__(
        self,
        total: int = 0,
        description: str = "",
        callback: Callable[..., Any] | None = None,
        window: int = 20,
    ):
        self.total = total
        self.current = 0
        self.description = description
        self.callback = callback
        self.start_time: float | None = None
        # (時間點, 進度) 的滑動視窗
        self._samples: deque[tuple[float, int]] = deque(maxlen=max(window, 2))

    def start(self) -> None:
        self.start_time = time.perf_counter()
        self.current = 0
        self._samples.clear()
        self._samples.append((self.start_time, 0))
        self._notify()
        logger.debug(f"進度追踪開始: {self.description}, 共 {self.total} 步")

    def update(self, current: int | None = None, increment: int | None = None, description: str | None = None) -> None:
        """設定目前進度（current）或累加（increment）"""
        if description:
            self.description = description
        if current is not None:
            self.current = current
        elif increment is not None:
            self.current += increment
        self._samples.append((time.perf_counter(), self.current))
        self._notify()

    def increment(self, amount: int = 1, description: str | None = None) -> None:
        self.update(increment=amount, description=description)

    def complete(self, description: str | None = None) -> None:
        self.update(current=self.total, description=description)
        logger.debug(f"進度追踪完成: {self.description}, 總耗時: {self.get_elapsed_time_str()}")

    def _notify(self) -> None:
        if self.callback is None:
            return
        self.callback(
            current=self.current,
            total=self.total,
            description=self.description,
            elapsed=self.get_elapsed_time(),
            remaining=self.get_estimated_remaining_time(),
        )

    def get_elapsed_time(self) -> float:
        if self.start_time is None:
            return 0.0
        return time.perf_counter() - self.start_time

    def get_elapsed_time_str(self) -> str:
        return format_elapsed_time(self.get_elapsed_time())

    def get_estimated_remaining_time(self) -> float:
        """以視窗內的平均速率估計剩餘秒數；無法估計時為 0"""
        left = self.total - self.current
        if self.start_time is None or left <= 0 or self.current <= 0 or len(self._samples) < 2:
            return 0.0
        (t0, p0), (t1, p1) = self._samples[0], self._samples[-1]
        if p1 <= p0 or t1 <= t0:
            return 0.0
        return left * (t1 - t0) / (p1 - p0)

    def get_progress_percentage(self) -> float:
        if self.total <= 0:
            return 0.0
        return 100.0 * self.current / self.total

    def get_status_text(self) -> str:
        elapsed = self.get_elapsed_time_str()
        if self.current >= self.total:
            return f"{self.description}: 完成! ({elapsed})"
        remaining = format_elapsed_time(self.get_estimated_remaining_time())
        return (
            f"{self.description}: {self.current}/{self.total} ({self.get_progress_percentage():.1f}%)"
            f" - 已用: {elapsed}, 剩餘: {remaining}"
        )
