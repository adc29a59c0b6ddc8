"""時間衰減記憶庫

以容量 M 的 FIFO 佇列保存正常/未標註樣本的 (異常分數, 儲存時間) 訊息，
每次抽樣 M_s 筆計算加權參考統計量 (μ_r, σ_r)，供偏差分數使用。

參考統計量（預設，逐字依加權公式）:
    μ_r = (1/k)·Σ w_i·r_i
    σ_r = sqrt( Σ w_i·(r_i − μ_r)² / (k − 1) )
其中 w_i = 1/(ln(t − t_i + 1) + 1)，且權重不以 Σw 正規化。
`normalized=True` 改用 Σw 作為分母的加權平均與加權變異數。
"""

from __future__ import annotations

import logging
import math
from collections import deque
from collections.abc import Iterable
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, NamedTuple, overload

import numpy as np
import pandas as pd

from sad_detector.graph.events import LABEL_ANOMALY, LABEL_NORMAL, LABEL_UNLABELED
from sad_detector.numeric.tensor import Tensor
from sad_detector.utils.errors import FileError, MemoryBankEmptyError, ValidationError

logger = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-6


class Message(NamedTuple):
    """記憶庫中的一筆訊息"""

    score: float
    t: float


@dataclass(frozen=True)
class ReferenceScore:
    """某一時間點的參考分數統計量"""

    mu_r: float
    sigma_r: float
    t: float
    k: int

    @classmethod
    def standard_normal(cls, t: float = 0.0) -> ReferenceScore:
        """冷啟動使用的標準常態參考 (μ=0, σ=1)"""
        return cls(mu_r=0.0, sigma_r=1.0, t=t, k=0)


@dataclass
class BankStats:
    """記憶庫狀態摘要"""

    size: int
    capacity: int
    mean_score: float | None
    min_score: float | None
    max_score: float | None
    oldest_t: float | None
    newest_t: float | None

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def decay_weight(t: float, t_i: float) -> float:
    """時間衰減權重 w = 1/(ln(t − t_i + 1) + 1)"""
    if t < t_i:
        raise ValidationError(f"查詢時間 {t} 早於儲存時間 {t_i}")
    return 1.0 / (math.log(t - t_i + 1.0) + 1.0)


def decay_weights(t: float, times: np.ndarray) -> np.ndarray:
    """向量化的時間衰減權重"""
    times = np.asarray(times, dtype=np.float64)
    if times.size and np.max(times) > t:
        raise ValidationError(f"查詢時間 {t} 早於部分儲存時間（最晚為 {np.max(times)}）")
    return 1.0 / (np.log1p(t - times) + 1.0)


class MemoryBank:
    """容量有限的 FIFO 分數記憶庫

    參數:
        capacity: 佇列容量 M
        sample_size: 每次參考抽樣數 M_s
        time_decay: False 時所有權重固定為 1
        normalized: True 時以 Σw 正規化加權統計量
    """

    def __init__(
        self,
        capacity: int = 4000,
        sample_size: int = 1000,
        time_decay: bool = True,
        normalized: bool = False,
    ):
        if capacity < 1:
            raise ValidationError(f"記憶庫容量必須至少為 1，目前為 {capacity}")
        if sample_size < 1:
            raise ValidationError(f"抽樣數必須至少為 1，目前為 {sample_size}")
        self.capacity = capacity
        self.sample_size = sample_size
        self.time_decay = time_decay
        self.normalized = normalized
        self._queue: deque[Message] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._queue)

    def __repr__(self) -> str:
        return f"MemoryBank(size={len(self)}, capacity={self.capacity}, sample_size={self.sample_size})"

    @property
    def last_time(self) -> float | None:
        return self._queue[-1].t if self._queue else None

    def entries(self) -> list[Message]:
        return list(self._queue)

    def clear(self) -> None:
        self._queue.clear()

    def push(self, score: float, t: float, label: int) -> bool:
        """存入一筆訊息；只有標籤 0 或 −1 會被保存

        回傳:
            是否實際存入
        """
        if label == LABEL_ANOMALY:
            return False
        if label not in (LABEL_NORMAL, LABEL_UNLABELED):
            raise ValidationError(f"未知的標籤值: {label}")
        last = self.last_time
        if last is not None and t < last:
            raise ValidationError(f"記憶庫需依時間順序寫入: {t} 早於上一筆 {last}")
        self._queue.append(Message(float(score), float(t)))
        return True

    def push_many(self, scores: Iterable[float], times: Iterable[float], labels: Iterable[int]) -> int:
        """依序存入多筆訊息，回傳實際存入筆數"""
        return sum(self.push(s, t, y) for s, t, y in zip(scores, times, labels, strict=True))

    def reference(self, t: float, rng: np.random.Generator) -> ReferenceScore:
        """在時間 t 抽樣計算參考分數

        例外:
            MemoryBankEmptyError: 記憶庫為空（冷啟動）
        """
        if not self._queue:
            raise MemoryBankEmptyError("記憶庫為空，無法計算參考分數", details={"t": t})

        size = len(self._queue)
        k = min(self.sample_size, size)
        chosen = rng.choice(size, size=k, replace=False)
        scores = np.fromiter((self._queue[i].score for i in chosen), dtype=np.float64, count=k)
        times = np.fromiter((self._queue[i].t for i in chosen), dtype=np.float64, count=k)

        weights = decay_weights(t, times) if self.time_decay else np.ones(k)
        if self.normalized:
            total = weights.sum()
            mu = float(np.dot(weights, scores) / total)
            variance = float(np.dot(weights, (scores - mu) ** 2) / total)
        else:
            mu = float(np.dot(weights, scores) / k)
            variance = float(np.dot(weights, (scores - mu) ** 2) / (k - 1)) if k > 1 else 0.0
        sigma = max(math.sqrt(variance), SIGMA_FLOOR)
        return ReferenceScore(mu_r=mu, sigma_r=sigma, t=float(t), k=k)

    def stats(self) -> BankStats:
        if not self._queue:
            return BankStats(len(self), self.capacity, None, None, None, None, None)
        scores = np.array([m.score for m in self._queue])
        return BankStats(
            size=len(self),
            capacity=self.capacity,
            mean_score=float(scores.mean()),
            min_score=float(scores.min()),
            max_score=float(scores.max()),
            oldest_t=self._queue[0].t,
            newest_t=self._queue[-1].t,
        )

    def dump_csv(self, path: str | Path) -> Path:
        """將記憶庫內容寫成 (score, t) CSV"""
        path = Path(path)
        frame = pd.DataFrame(self.entries(), columns=["score", "t"])
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            frame.to_csv(path, index=False)
        except OSError as e:
            raise FileError(f"無法寫入記憶庫內容: {path}", details={"error": str(e)}) from e
        logger.debug(f"已匯出記憶庫 {len(frame)} 筆訊息至 {path}")
        return path


@overload
def deviation(s: Tensor, ref: ReferenceScore) -> Tensor: ...


@overload
def deviation(s: float, ref: ReferenceScore) -> float: ...


def deviation(s: Tensor | float, ref: ReferenceScore) -> Tensor | float:
    """偏差分數 dev = (s − μ_r) / σ_r；μ_r、σ_r 視為常數"""
    if isinstance(s, Tensor):
        return (s - ref.mu_r) * (1.0 / ref.sigma_r)
    return (float(s) - ref.mu_r) / ref.sigma_r
