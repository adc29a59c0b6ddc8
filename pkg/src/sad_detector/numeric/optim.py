"""Adam 最佳化器

一階/二階動差與步數計數器放在 `AdamState`，更新規則為標準的偏差校正 Adam。
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from sad_detector.numeric.tensor import Tensor
from sad_detector.utils.errors import ShapeError, ValidationError


@dataclass
class AdamState:
    """Adam 的累積狀態；動差形狀永遠與參數形狀一致"""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> tuple[dict[str, Tensor], AdamState]:
    """套用一次 Adam 更新

    參數:
        params: 名稱到參數張量的對應
        grads: 名稱到梯度的對應（形狀需與參數一致）
        state: Adam 狀態（就地更新並回傳）
        lr: 學習率

    回傳:
        (新參數張量字典, 更新後的狀態)
    """
    if lr <= 0:
        raise ValidationError(f"學習率必須為正數，目前為 {lr}")

    missing = set(params) - set(grads)
    if missing:
        raise ValidationError(f"缺少參數梯度: {', '.join(sorted(missing))}")

    for name, param in params.items():
        grad_shape = np.shape(grads[name])
        if grad_shape != param.shape:
            raise ShapeError(
                f"參數 {name} 的梯度形狀不相容: {param.shape} 與 {grad_shape}",
                details={"param": name, "left": list(param.shape), "right": list(grad_shape)},
            )
        moment = state.first_moment.get(name)
        if moment is not None and moment.shape != param.shape:
            raise ShapeError(f"參數 {name} 的動差形狀不相容: {param.shape} 與 {moment.shape}")

    state.step += 1
    bias1 = 1.0 - state.beta1**state.step
    bias2 = 1.0 - state.beta2**state.step

    updated: dict[str, Tensor] = {}
    for name, param in params.items():
        grad = np.asarray(grads[name], dtype=np.float64)
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None or v is None:
            m = np.zeros_like(param.data)
            v = np.zeros_like(param.data)

        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * (grad * grad)
        state.first_moment[name] = m
        state.second_moment[name] = v

        m_hat = m / bias1
        v_hat = v / bias2
        new_value = param.data - lr * m_hat / (np.sqrt(v_hat) + state.eps)
        updated[name] = Tensor(new_value, requires_grad=param.requires_grad, name=name)

    return updated, state
