"""張量與反向自動微分

以 numpy float64 陣列為底層儲存的最小張量運算庫。運算採「邊執行邊記錄」
（define-by-run）：在 `Tape` 作用範圍內建立的運算會依序附加到磁帶上，
反向傳播時依附加順序的相反方向各走訪一次。

使用範例：
    >>> x = Tensor([3.0], requires_grad=True)
    >>> with Tape() as tape:
    ...     y = (x * x).sum()
    >>> tape.backward(y, {"x": x})["x"]
    array([6.])

數值約定：
    - log 與除法的參數/分母下限為 1e-12（EPS_CLAMP）
    - 任何公開運算的結果都必須是有限值，否則拋出 NumericError
"""

from __future__ import annotations

import contextvars
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from typing import Any, Union

import numpy as np

from sad_detector.utils.errors import NumericError, ShapeError, ValidationError

EPS_CLAMP = 1e-12

# 注意力遮罩使用的「負無限大」
MASK_VALUE = -1e9

TensorLike = Union["Tensor", np.ndarray, float, int, Sequence[Any]]

_ACTIVE_TAPE: contextvars.ContextVar[Tape | None] = contextvars.ContextVar("_ACTIVE_TAPE", default=None)


def _check_finite(array: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(array)):
        raise NumericError(f"{what} 含有非有限值 (NaN/Inf)", details={"shape": list(array.shape)})


class Tensor:
    """不可變的 float64 張量

    參數:
        data: 任意可轉成 float64 陣列的資料
        requires_grad: 是否為需要梯度的葉節點（模型參數）
        name: 參數名稱（僅供除錯與檢查點使用）
    """

    __slots__ = ("_data", "_leaf", "_tape", "name", "requires_grad")

    def __init__(self, data: TensorLike, requires_grad: bool = False, name: str | None = None):
        if isinstance(data, Tensor):
            data = data._data
        array = np.array(data, dtype=np.float64)
        _check_finite(array, "張量輸入")
        array.setflags(write=False)
        self._data = array
        self.requires_grad = requires_grad
        self.name = name
        self._tape: Tape | None = None
        self._leaf = True

    @classmethod
    def _from_op(cls, array: np.ndarray, requires_grad: bool, op: str) -> Tensor:
        """由運算結果建立張量（跳過複製）"""
        _check_finite(array, f"運算 {op} 的輸出")
        out = cls.__new__(cls)
        array = np.asarray(array, dtype=np.float64, order="C")
        array.setflags(write=False)
        out._data = array
        out.requires_grad = requires_grad
        out.name = None
        out._tape = None
        out._leaf = False
        return out

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> tuple[int, ...]:
        return self._data.shape

    @property
    def ndim(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        return int(self._data.size)

    def item(self) -> float:
        if self._data.size != 1:
            raise ShapeError(f"只有單元素張量可以轉為純量，目前形狀為 {self.shape}")
        return float(self._data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        """回傳資料的可寫複本"""
        return np.array(self._data)

    def detach(self) -> Tensor:
        """回傳不參與梯度的複本（共用資料）"""
        return Tensor._from_op(self._data, False, "detach")

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # ---- 運算子多載 ----

    def __add__(self, other: TensorLike) -> Tensor:
        return add(self, other)

    def __radd__(self, other: TensorLike) -> Tensor:
        return add(other, self)

    def __sub__(self, other: TensorLike) -> Tensor:
        return sub(self, other)

    def __rsub__(self, other: TensorLike) -> Tensor:
        return sub(other, self)

    def __mul__(self, other: TensorLike) -> Tensor:
        return mul(self, other)

    def __rmul__(self, other: TensorLike) -> Tensor:
        return mul(other, self)

    def __truediv__(self, other: TensorLike) -> Tensor:
        return div(self, other)

    def __neg__(self) -> Tensor:
        return neg(self)

    def __matmul__(self, other: TensorLike) -> Tensor:
        return matmul(self, other)

    def sum(self, axis: int | None = None, keepdims: bool = False) -> Tensor:
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: int | None = None, keepdims: bool = False) -> Tensor:
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape: int) -> Tensor:
        return reshape(self, shape)

    @property
    def T(self) -> Tensor:
        return transpose(self)


def as_tensor(value: TensorLike) -> Tensor:
    """將常數包成不需梯度的張量"""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


# ================ 磁帶 ================


@dataclass(frozen=True)
class TapeNode:
    """磁帶上的一筆運算紀錄"""

    op: str
    output: Tensor
    inputs: tuple[Tensor, ...]
    backward: Callable[[np.ndarray], tuple[np.ndarray | None, ...]]


class Tape:
    """只可附加的運算紀錄；反向傳播依附加順序的相反方向走訪"""

    def __init__(self) -> None:
        self.nodes: list[TapeNode] = []
        self._token: contextvars.Token[Tape | None] | None = None

    def __enter__(self) -> Tape:
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc: object) -> None:
        if self._token is not None:
            _ACTIVE_TAPE.reset(self._token)
            self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def record(
        self,
        op: str,
        output: Tensor,
        inputs: tuple[Tensor, ...],
        backward: Callable[[np.ndarray], tuple[np.ndarray | None, ...]],
    ) -> None:
        output._tape = self
        self.nodes.append(TapeNode(op, output, inputs, backward))

    def gradients(self, loss: Tensor) -> dict[int, np.ndarray]:
        """回傳以 id(tensor) 為鍵的梯度表（包含中間節點）"""
        if loss.size != 1:
            raise ValidationError(f"反向傳播需要純量損失，目前形狀為 {loss.shape}")
        if not loss.requires_grad:
            return {}
        if loss._tape is None and loss._leaf:
            # 損失本身就是參數
            return {id(loss): np.ones_like(loss.data)}
        if loss._tape is not self:
            raise ValidationError("損失不是在此磁帶上產生的")

        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            grad_out = grads.pop(id(node.output), None)
            if grad_out is None:
                continue
            for tensor, grad in zip(node.inputs, node.backward(grad_out), strict=True):
                if grad is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                if key in grads:
                    grads[key] = grads[key] + grad
                else:
                    grads[key] = np.array(grad, dtype=np.float64)
        return grads

    def backward(self, loss: Tensor, params: Mapping[str, Tensor]) -> dict[str, np.ndarray]:
        """計算 d(loss)/d(參數)；不在路徑上的參數得到零梯度

        參數:
            loss: 純量損失
            params: 名稱到參數張量的對應

        回傳:
            名稱到梯度陣列的對應（形狀與參數相同）
        """
        grads = self.gradients(loss)
        result: dict[str, np.ndarray] = {}
        for name, param in params.items():
            grad = grads.get(id(param))
            result[name] = np.zeros_like(param.data) if grad is None else grad.reshape(param.shape)
        return result


def backward(loss: Tensor, params: Mapping[str, Tensor]) -> dict[str, np.ndarray]:
    """以產生損失的磁帶執行反向傳播"""
    if loss.size != 1:
        raise ValidationError(f"反向傳播需要純量損失，目前形狀為 {loss.shape}")
    tape = loss._tape if loss._tape is not None else Tape()
    return tape.backward(loss, params)


def _emit(
    op: str,
    array: np.ndarray,
    inputs: tuple[Tensor, ...],
    backward_fn: Callable[[np.ndarray], tuple[np.ndarray | None, ...]],
) -> Tensor:
    requires_grad = any(t.requires_grad for t in inputs)
    out = Tensor._from_op(array, requires_grad, op)
    tape = _ACTIVE_TAPE.get()
    if requires_grad and tape is not None:
        tape.record(op, out, inputs, backward_fn)
    return out


# ================ 形狀工具 ================


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> tuple[int, ...]:
    try:
        return tuple(np.broadcast_shapes(a.shape, b.shape))
    except ValueError as e:
        raise ShapeError(
            f"{op} 的運算元形狀不相容: {a.shape} 與 {b.shape}",
            details={"op": op, "left": list(a.shape), "right": list(b.shape)},
        ) from e


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """將廣播後的梯度加總回原始形狀"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


# ================ 逐元素運算 ================


def add(a: TensorLike, b: TensorLike) -> Tensor:
    ta, tb = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", ta, tb)
    return _emit(
        "add",
        ta.data + tb.data,
        (ta, tb),
        lambda g: (_unbroadcast(g, ta.shape), _unbroadcast(g, tb.shape)),
    )


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    ta, tb = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", ta, tb)
    return _emit(
        "sub",
        ta.data - tb.data,
        (ta, tb),
        lambda g: (_unbroadcast(g, ta.shape), _unbroadcast(-g, tb.shape)),
    )


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    ta, tb = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", ta, tb)
    return _emit(
        "mul",
        ta.data * tb.data,
        (ta, tb),
        lambda g: (_unbroadcast(g * tb.data, ta.shape), _unbroadcast(g * ta.data, tb.shape)),
    )


def div(a: TensorLike, b: TensorLike) -> Tensor:
    """a / max(b, 1e-12)；分母的定義域為正數"""
    ta, tb = as_tensor(a), as_tensor(b)
    _broadcast_shape("div", ta, tb)
    denom = np.maximum(tb.data, EPS_CLAMP)
    active = tb.data >= EPS_CLAMP

    def backward_fn(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        grad_a = _unbroadcast(g / denom, ta.shape)
        grad_b = _unbroadcast(-g * ta.data / (denom * denom) * active, tb.shape)
        return grad_a, grad_b

    return _emit("div", ta.data / denom, (ta, tb), backward_fn)


def neg(a: TensorLike) -> Tensor:
    ta = as_tensor(a)
    return _emit("neg", -ta.data, (ta,), lambda g: (-g,))


def relu(a: TensorLike) -> Tensor:
    ta = as_tensor(a)
    active = ta.data > 0
    return _emit("relu", np.where(active, ta.data, 0.0), (ta,), lambda g: (g * active,))


def hinge(a: TensorLike) -> Tensor:
    """max(0, a)，用於邊界損失"""
    return relu(a)


def exp(a: TensorLike) -> Tensor:
    ta = as_tensor(a)
    with np.errstate(over="ignore"):
        out = np.exp(ta.data)
    return _emit("exp", out, (ta,), lambda g: (g * out,))


def log(a: TensorLike) -> Tensor:
    """ln(max(a, 1e-12))"""
    ta = as_tensor(a)
    clamped = np.maximum(ta.data, EPS_CLAMP)
    active = ta.data >= EPS_CLAMP
    return _emit("log", np.log(clamped), (ta,), lambda g: (g / clamped * active,))


def cos(a: TensorLike) -> Tensor:
    ta = as_tensor(a)
    return _emit("cos", np.cos(ta.data), (ta,), lambda g: (-g * np.sin(ta.data),))


def tabs(a: TensorLike) -> Tensor:
    ta = as_tensor(a)
    return _emit("abs", np.abs(ta.data), (ta,), lambda g: (g * np.sign(ta.data),))


# ================ 歸約與線性代數 ================


def matmul(a: TensorLike, b: TensorLike) -> Tensor:
    """向量或矩陣乘以矩陣：(n,)@(n,m) 或 (k,n)@(n,m)"""
    ta, tb = as_tensor(a), as_tensor(b)
    if tb.ndim != 2 or ta.ndim not in (1, 2) or ta.shape[-1] != tb.shape[0]:
        raise ShapeError(
            f"matmul 的運算元形狀不相容: {ta.shape} 與 {tb.shape}",
            details={"op": "matmul", "left": list(ta.shape), "right": list(tb.shape)},
        )

    def backward_fn(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        grad_a = g @ tb.data.T
        grad_b = np.outer(ta.data, g) if ta.ndim == 1 else ta.data.T @ g
        return grad_a, grad_b

    return _emit("matmul", ta.data @ tb.data, (ta, tb), backward_fn)


def _normalize_axis(axis: int, ndim: int) -> int:
    if not -ndim <= axis < ndim:
        raise ShapeError(f"軸 {axis} 超出 {ndim} 維張量的範圍")
    return axis % ndim


def tsum(a: TensorLike, axis: int | None = None, keepdims: bool = False) -> Tensor:
    ta = as_tensor(a)
    if axis is not None:
        axis = _normalize_axis(axis, ta.ndim)

    def backward_fn(g: np.ndarray) -> tuple[np.ndarray]:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, ta.shape).copy(),)

    return _emit("sum", np.sum(ta.data, axis=axis, keepdims=keepdims), (ta,), backward_fn)


def mean(a: TensorLike, axis: int | None = None, keepdims: bool = False) -> Tensor:
    ta = as_tensor(a)
    count = ta.size if axis is None else ta.shape[_normalize_axis(axis, ta.ndim)]
    return mul(tsum(ta, axis=axis, keepdims=keepdims), 1.0 / count)


def concat(tensors: Sequence[TensorLike], axis: int = -1) -> Tensor:
    """沿指定軸串接（預設最後一軸）"""
    parts = [as_tensor(t) for t in tensors]
    if not parts:
        raise ValidationError("concat 至少需要一個張量")
    ndim = parts[0].ndim
    axis = _normalize_axis(axis, ndim)
    for part in parts[1:]:
        if part.ndim != ndim or any(
            part.shape[d] != parts[0].shape[d] for d in range(ndim) if d != axis
        ):
            raise ShapeError(
                f"concat 的運算元形狀不相容: {parts[0].shape} 與 {part.shape}",
                details={"op": "concat", "left": list(parts[0].shape), "right": list(part.shape)},
            )
    sizes = [p.shape[axis] for p in parts]
    cuts = np.cumsum(sizes)[:-1]

    def backward_fn(g: np.ndarray) -> tuple[np.ndarray, ...]:
        return tuple(np.split(g, cuts, axis=axis))

    return _emit("concat", np.concatenate([p.data for p in parts], axis=axis), tuple(parts), backward_fn)


def softmax(a: TensorLike, axis: int = -1) -> Tensor:
    ta = as_tensor(a)
    shifted = ta.data - ta.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward_fn(g: np.ndarray) -> tuple[np.ndarray]:
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _emit("softmax", out, (ta,), backward_fn)


def l2_normalize(a: TensorLike, axis: int = -1) -> Tensor:
    """x / max(||x||, 1e-12)，沿最後一軸"""
    ta = as_tensor(a)
    raw_norm = np.sqrt((ta.data * ta.data).sum(axis=axis, keepdims=True))
    norm = np.maximum(raw_norm, EPS_CLAMP)
    out = ta.data / norm
    active = raw_norm >= EPS_CLAMP

    def backward_fn(g: np.ndarray) -> tuple[np.ndarray]:
        projected = g - out * (g * out).sum(axis=axis, keepdims=True) * active
        return (projected / norm,)

    return _emit("l2_normalize", out, (ta,), backward_fn)


# ================ 形狀運算 ================


def reshape(a: TensorLike, shape: Sequence[int]) -> Tensor:
    ta = as_tensor(a)
    if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
        shape = tuple(shape[0])
    try:
        out = ta.data.reshape(tuple(shape))
    except ValueError as e:
        raise ShapeError(f"無法將形狀 {ta.shape} 重塑為 {tuple(shape)}") from e
    return _emit("reshape", out.copy(), (ta,), lambda g: (g.reshape(ta.shape),))


def transpose(a: TensorLike) -> Tensor:
    ta = as_tensor(a)
    if ta.ndim != 2:
        raise ShapeError(f"transpose 只支援二維張量，目前形狀為 {ta.shape}")
    return _emit("transpose", ta.data.T.copy(), (ta,), lambda g: (g.T,))


def gather_rows(a: TensorLike, index: np.ndarray) -> Tensor:
    """依整數索引陣列取出第 0 軸的列；輸出形狀為 index.shape + a.shape[1:]"""
    ta = as_tensor(a)
    idx = np.asarray(index, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= ta.shape[0]):
        raise ShapeError(f"gather_rows 索引超出範圍: 來源形狀 {ta.shape}，索引範圍 [{idx.min()}, {idx.max()}]")

    def backward_fn(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.zeros(ta.shape, dtype=np.float64)
        np.add.at(grad, idx.reshape(-1), g.reshape((-1, *ta.shape[1:])))
        return (grad,)

    return _emit("gather_rows", ta.data[idx], (ta,), backward_fn)


def zeros(*shape: int) -> Tensor:
    return Tensor(np.zeros(shape, dtype=np.float64))
