"""損失函數

- deviation_loss: 已標註樣本的偏差損失 (1−y)·|dev| + y·max(0, m − |dev|)
- pseudo_groups: 依偏差分數差距 < 門檻分組，權重 1/(1+Δd)
- contrastive_loss: 以偽分組為正樣本對的監督式對比損失
- cross_entropy: 下游節點分類損失
- combine: anomaly 模式 L^dev + α·L^scl；downstream 模式 L^sup + α·L^dev + β·L^scl
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sad_detector.core.config import MODE_ANOMALY, MODE_DOWNSTREAM, LossConfig
from sad_detector.numeric import tensor as ops
from sad_detector.numeric.tensor import MASK_VALUE, Tensor
from sad_detector.utils.errors import ValidationError


def _zero() -> Tensor:
    return Tensor(0.0)


def _binary_labels(y: np.ndarray, what: str) -> np.ndarray:
    labels = np.asarray(y, dtype=np.int64).reshape(-1)
    if np.any(labels == -1):
        raise ValidationError(f"{what} 不接受未標註樣本 (y = -1)")
    if not np.all(np.isin(labels, (0, 1))):
        raise ValidationError(f"{what} 的標籤只能是 0 或 1")
    return labels


def deviation_loss(dev: Tensor, y: np.ndarray, margin: float = 5.0) -> Tensor:
    """已標註樣本偏差損失的平均值；沒有樣本時為 0

    參數:
        dev: (n,) 偏差分數
        y: (n,) 標籤，只能是 0 或 1
        margin: 異常樣本的 Z 分數邊界 m
    """
    labels = _binary_labels(y, "偏差損失")
    if dev.shape != labels.shape:
        raise ValidationError(f"偏差分數形狀 {dev.shape} 與標籤數 {labels.shape} 不符")
    if labels.size == 0:
        return _zero()
    y_t = Tensor(labels.astype(np.float64))
    magnitude = ops.tabs(dev)
    per_sample = (1.0 - y_t) * magnitude + y_t * ops.hinge(margin - magnitude)
    return ops.mean(per_sample)


@dataclass(frozen=True, eq=False)
class PairWeights:
    """偽分組結果

    參數:
        active: (N, N) 布林矩陣，1[Δd_ij < 門檻]，對角線為 False
        weights: (N, N) 權重 1/(1 + Δd_ij)，對角線為 0
    """

    active: np.ndarray
    weights: np.ndarray

    @property
    def effective(self) -> np.ndarray:
        return self.active * self.weights


def pseudo_groups(devs: np.ndarray, threshold: float = 1.0) -> PairWeights:
    """依偏差分數距離建立成對權重（偏差分數視為常數）"""
    values = np.asarray(devs, dtype=np.float64).reshape(-1)
    if values.size < 2:
        raise ValidationError(f"偽分組至少需要 2 個樣本，目前為 {values.size}")
    gap = np.abs(values[:, None] - values[None, :])
    off_diagonal = ~np.eye(values.size, dtype=bool)
    active = (gap < threshold) & off_diagonal
    weights = np.where(off_diagonal, 1.0 / (1.0 + gap), 0.0)
    return PairWeights(active=active, weights=weights)


def contrastive_loss(
    z: Tensor,
    devs: np.ndarray,
    temperature: float = 0.5,
    threshold: float = 1.0,
    normalize: bool = True,
) -> Tensor:
    """偽標籤監督式對比損失

    L_i = −1/(N−1) · Σ_{j≠i} 1[Δd_ij<門檻]·w_ij·ln( exp(ẑ_i·ẑ_j/τ) / Σ_{k≠i} exp(ẑ_i·ẑ_k/τ) )
    總損失為 Σ_i L_i；分母包含同組樣本。

    參數:
        z: (N, D) 節點表示
        devs: (N,) 偏差分數（不傳遞梯度）
        temperature: 溫度 τ
        threshold: 分組門檻
        normalize: 是否先做 L2 正規化（False 時直接使用原始內積）
    """
    if temperature <= 0:
        raise ValidationError(f"溫度必須為正數，目前為 {temperature}")
    if z.ndim != 2:
        raise ValidationError(f"對比損失需要 (N, D) 的表示矩陣，目前形狀為 {z.shape}")
    n = z.shape[0]
    values = np.asarray(devs, dtype=np.float64).reshape(-1)
    if values.size != n:
        raise ValidationError(f"偏差分數數量 {values.size} 與表示數 {n} 不符")
    pair_weights = pseudo_groups(values, threshold).effective
    if not pair_weights.any():
        return _zero()

    embedded = ops.l2_normalize(z, axis=-1) if normalize else z
    similarity = (embedded @ embedded.T) * (1.0 / temperature)

    off_diagonal = ~np.eye(n, dtype=bool)
    row_max = np.where(off_diagonal, similarity.data, -np.inf).max(axis=1, keepdims=True)
    diagonal_bias = np.where(off_diagonal, 0.0, MASK_VALUE)
    shifted = similarity - Tensor(row_max)
    denominator = ops.tsum(ops.exp(shifted + Tensor(diagonal_bias)), axis=1, keepdims=True)
    log_prob = shifted - ops.log(denominator)

    per_anchor = ops.tsum(Tensor(pair_weights) * log_prob, axis=1) * (-1.0 / (n - 1))
    return ops.tsum(per_anchor)


def cross_entropy(logits: Tensor, y: np.ndarray) -> Tensor:
    """2 類交叉熵的平均值；沒有樣本時為 0"""
    labels = _binary_labels(y, "交叉熵")
    if labels.size == 0:
        return _zero()
    if logits.shape != (labels.size, 2):
        raise ValidationError(f"logits 形狀 {logits.shape} 與標籤數 {labels.size} 不符")
    shifted = logits - Tensor(logits.data.max(axis=1, keepdims=True))
    log_normalizer = ops.log(ops.tsum(ops.exp(shifted), axis=1))
    one_hot = np.eye(2)[labels]
    picked = ops.tsum(shifted * Tensor(one_hot), axis=1)
    return ops.mean(log_normalizer - picked)


def combine(
    dev_loss: Tensor,
    scl_loss: Tensor,
    sup_loss: Tensor | None,
    cfg: LossConfig,
    mode: str = MODE_DOWNSTREAM,
) -> Tensor:
    """依模式組合損失"""
    if mode == MODE_ANOMALY:
        if sup_loss is not None:
            raise ValidationError("anomaly 模式不使用監督損失")
        return dev_loss + cfg.alpha * scl_loss
    if mode == MODE_DOWNSTREAM:
        if sup_loss is None:
            raise ValidationError("downstream 模式需要監督損失")
        return sup_loss + cfg.alpha * dev_loss + cfg.beta * scl_loss
    raise ValidationError(f"未知的模式: {mode}")
