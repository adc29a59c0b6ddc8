"""有限差分梯度檢查"""

from collections.abc import Callable, Mapping
from dataclasses import dataclass

import numpy as np

from sad_detector.numeric.tensor import Tape, Tensor


@dataclass
class GradCheckResult:
    """梯度檢查結果"""

    max_relative_error: float
    worst_param: str
    analytic: dict[str, np.ndarray]
    numeric: dict[str, np.ndarray]

    def passed(self, tolerance: float = 1e-4) -> bool:
        return self.max_relative_error < tolerance


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """max |a - n| / max(|a| + |n|, floor)，逐元素取最大"""
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), floor)
    if analytic.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric) / denom))


def check_gradients(
    fn: Callable[[Mapping[str, Tensor]], Tensor],
    params: Mapping[str, Tensor],
    h: float = 1e-5,
) -> GradCheckResult:
    """比較反向傳播梯度與中央差分

    參數:
        fn: 接收參數字典並回傳純量損失的函數
        params: 要檢查的參數
        h: 差分步長
    """
    with Tape() as tape:
        loss = fn(params)
    analytic = tape.backward(loss, params)

    numeric: dict[str, np.ndarray] = {}
    for name, param in params.items():
        base = param.numpy()
        grad = np.zeros_like(base)
        flat = grad.reshape(-1)
        for i in range(base.size):
            shifted = dict(params)
            plus = base.copy().reshape(-1)
            plus[i] += h
            shifted[name] = Tensor(plus.reshape(base.shape), requires_grad=True, name=name)
            f_plus = fn(shifted).item()
            minus = base.copy().reshape(-1)
            minus[i] -= h
            shifted[name] = Tensor(minus.reshape(base.shape), requires_grad=True, name=name)
            f_minus = fn(shifted).item()
            flat[i] = (f_plus - f_minus) / (2.0 * h)
        numeric[name] = grad

    worst_name = ""
    worst = 0.0
    for name in params:
        err = relative_error(analytic[name], numeric[name])
        if err >= worst:
            worst, worst_name = err, name
    return GradCheckResult(max_relative_error=worst, worst_param=worst_name, analytic=analytic, numeric=numeric)
