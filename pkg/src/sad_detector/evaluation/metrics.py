"""評估指標"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from scipy.stats import rankdata

from sad_detector.utils.errors import ValidationError


def auc_roc(scores: np.ndarray, labels: np.ndarray) -> float:
    """以秩和法計算 ROC AUC（同分以平均秩計，相當於 0.5）

    參數:
        scores: 分數，越大越異常
        labels: 0/1 標籤

    例外:
        ValidationError: 標籤只有單一類別或長度不符
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise ValidationError(f"分數數量 {scores.size} 與標籤數量 {labels.size} 不符")
    if not np.all(np.isin(labels, (0, 1))):
        raise ValidationError("AUC 的標籤只能是 0 或 1")
    positive = labels == 1
    num_positive = int(positive.sum())
    num_negative = labels.size - num_positive
    if num_positive == 0 or num_negative == 0:
        raise ValidationError(
            f"AUC 需要正負兩類樣本（正 {num_positive}、負 {num_negative}）",
            details={"positives": num_positive, "negatives": num_negative},
        )
    ranks = rankdata(scores, method="average")
    rank_sum = float(ranks[positive].sum())
    return (rank_sum - num_positive * (num_positive + 1) / 2.0) / (num_positive * num_negative)


def safe_auc(scores: np.ndarray, labels: np.ndarray) -> float | None:
    """單一類別時回傳 None 而不拋出例外"""
    try:
        return auc_roc(scores, labels)
    except ValidationError:
        return None


@dataclass
class MetricsReport:
    """多種子的 AUC 彙整"""

    auc: float
    auc_std: float
    per_seed: dict[int, float] = field(default_factory=dict)
    config: dict[str, Any] = field(default_factory=dict)
    embeddings_path: str | None = None

    @property
    def num_seeds(self) -> int:
        return len(self.per_seed)

    @classmethod
    def from_values(
        cls, per_seed: dict[int, float], config: dict[str, Any] | None = None
    ) -> MetricsReport:
        if not per_seed:
            raise ValidationError("至少需要一個種子的結果")
        values = np.array(list(per_seed.values()), dtype=np.float64)
        return cls(
            auc=float(values.mean()),
            auc_std=float(values.std(ddof=0)),
            per_seed=dict(per_seed),
            config=dict(config or {}),
        )

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["per_seed"] = {str(k): v for k, v in self.per_seed.items()}
        data["num_seeds"] = self.num_seeds
        return data
