"""合成動態圖產生器

每個使用者的事件時間來自強度 λ(t) = base_rate·(1 + A·sin(2πt/86400)) 的
非齊次卜瓦松過程（以 thinning 取樣），互動物品均勻抽取。
部分使用者的異常視窗開始於前半段觀測期內某天的強度峰值，
視窗內的邊特徵平移 anomaly_feature_shift 且事件標籤為 1。
未指定視窗長度時，異常行為持續到觀測結束。
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from sad_detector.graph.events import LABEL_ANOMALY, LABEL_NORMAL, EventStream
from sad_detector.utils.errors import ValidationError

logger = logging.getLogger(__name__)

SECONDS_PER_DAY = 86400.0

# sin(2πt/86400) 在每天 6 點達到峰值
PEAK_OFFSET_SECONDS = SECONDS_PER_DAY / 4


@dataclass
class SynthConfig:
    """合成資料設定

    base_rate 單位為「每使用者每天事件數」。
    anomaly_window_seconds 為 None 時，異常視窗延續到 horizon_seconds。
    """

    num_users: int = 200
    num_items: int = 50
    horizon_seconds: float = 14 * SECONDS_PER_DAY
    base_rate: float = 4.0
    daily_cycle_amplitude: float = 0.5
    anomaly_user_fraction: float = 0.05
    anomaly_feature_shift: float | tuple[float, ...] = 2.0
    edge_feature_dim: int = 8
    anomaly_window_seconds: float | None = None
    seed: int = 0

    def validate(self) -> list[str]:
        errors = []
        if self.num_users <= 0:
            errors.append("num_users 必須為正整數")
        if self.num_items <= 0:
            errors.append("num_items 必須為正整數")
        if self.horizon_seconds <= 0:
            errors.append("horizon_seconds 必須為正數")
        if self.base_rate <= 0:
            errors.append("base_rate 必須為正數")
        if not 0.0 <= self.daily_cycle_amplitude < 1.0:
            errors.append("daily_cycle_amplitude 必須介於 [0, 1)")
        if not 0.0 <= self.anomaly_user_fraction <= 1.0:
            errors.append("anomaly_user_fraction 必須介於 [0, 1]")
        if self.edge_feature_dim <= 0:
            errors.append("edge_feature_dim 必須為正整數")
        if self.anomaly_window_seconds is not None and self.anomaly_window_seconds <= 0:
            errors.append("anomaly_window_seconds 必須為正數")
        shift = np.atleast_1d(np.asarray(self.anomaly_feature_shift, dtype=np.float64))
        if shift.size not in (1, self.edge_feature_dim):
            errors.append(f"anomaly_feature_shift 長度必須為 1 或 {self.edge_feature_dim}")
        return errors

    def shift_vector(self) -> np.ndarray:
        shift = np.atleast_1d(np.asarray(self.anomaly_feature_shift, dtype=np.float64))
        return np.broadcast_to(shift, (self.edge_feature_dim,)).copy()

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def intensity(t: np.ndarray | float, config: SynthConfig) -> np.ndarray:
    """每使用者每秒的事件強度"""
    phase = 2.0 * np.pi * np.asarray(t, dtype=np.float64) / SECONDS_PER_DAY
    return config.base_rate / SECONDS_PER_DAY * (1.0 + config.daily_cycle_amplitude * np.sin(phase))


def _thinned_times(rng: np.random.Generator, config: SynthConfig) -> np.ndarray:
    """以 thinning 取樣單一使用者的事件時間"""
    rate_max = config.base_rate / SECONDS_PER_DAY * (1.0 + config.daily_cycle_amplitude)
    count = rng.poisson(rate_max * config.horizon_seconds)
    candidates = np.sort(rng.uniform(0.0, config.horizon_seconds, size=count))
    accept = rng.uniform(0.0, rate_max, size=count) < intensity(candidates, config)
    return candidates[accept]


def _window_starts(config: SynthConfig) -> np.ndarray:
    """可能的視窗起點：前半段觀測期每天的強度峰值"""
    days = max(1, math.ceil(config.horizon_seconds / SECONDS_PER_DAY) // 2)
    starts = PEAK_OFFSET_SECONDS + SECONDS_PER_DAY * np.arange(days)
    return np.minimum(starts, config.horizon_seconds)


def _window_end(start: float, config: SynthConfig) -> float:
    if config.anomaly_window_seconds is None:
        return config.horizon_seconds
    return min(start + config.anomaly_window_seconds, config.horizon_seconds)


def _anomaly_window(rng: np.random.Generator, config: SynthConfig) -> tuple[float, float]:
    """在隨機一天的強度峰值開啟異常視窗"""
    starts = _window_starts(config)
    start = float(starts[int(rng.integers(len(starts)))])
    return start, _window_end(start, config)


def generate(config: SynthConfig) -> EventStream:
    """依設定產生帶標籤的事件流；相同種子產生相同結果"""
    errors = config.validate()
    if errors:
        raise ValidationError("合成資料設定無效: " + "; ".join(errors), details={"errors": errors})

    rng = np.random.default_rng(config.seed)
    num_anomalous = round(config.anomaly_user_fraction * config.num_users)
    anomalous_users = set(rng.choice(config.num_users, size=num_anomalous, replace=False).tolist())
    shift = config.shift_vector()

    srcs: list[np.ndarray] = []
    dsts: list[np.ndarray] = []
    times: list[np.ndarray] = []
    features: list[np.ndarray] = []
    labels: list[np.ndarray] = []
    for user in range(config.num_users):
        user_times = _thinned_times(rng, config)
        n = len(user_times)
        items = rng.integers(config.num_items, size=n) + config.num_users
        user_features = rng.standard_normal((n, config.edge_feature_dim))
        user_labels = np.full(n, LABEL_NORMAL, dtype=np.int64)
        if user in anomalous_users:
            start, end = _anomaly_window(rng, config)
            inside = (user_times >= start) & (user_times < end)
            user_features[inside] += shift
            user_labels[inside] = LABEL_ANOMALY
        srcs.append(np.full(n, user, dtype=np.int64))
        dsts.append(items)
        times.append(user_times)
        features.append(user_features)
        labels.append(user_labels)

    all_times = np.concatenate(times)
    order = np.argsort(all_times, kind="mergesort")
    stream = EventStream(
        src=np.concatenate(srcs)[order],
        dst=np.concatenate(dsts)[order],
        t=all_times[order],
        features=np.concatenate(features, axis=0).reshape(-1, config.edge_feature_dim)[order],
        labels=np.concatenate(labels)[order],
        num_nodes=config.num_users + config.num_items,
        num_users=config.num_users,
    )
    anomalies = int(np.count_nonzero(stream.labels == LABEL_ANOMALY))
    logger.info(
        f"已產生合成事件流: {len(stream)} 個事件、{num_anomalous} 個異常使用者、{anomalies} 個異常事件 "
        f"(seed={config.seed})"
    )
    return stream


def expected_anomaly_share(config: SynthConfig) -> float:
    """異常事件占比的近似期望值（視窗內平均強度視為 base_rate）"""
    num_anomalous = round(config.anomaly_user_fraction * config.num_users)
    starts = _window_starts(config)
    covered = np.mean([_window_end(float(s), config) - s for s in starts])
    return num_anomalous / config.num_users * float(covered) / config.horizon_seconds
