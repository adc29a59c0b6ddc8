"""模型參數儲存區

所有可訓練網路共用同一個 `ParameterStore`，以穩定的點號名稱
（如 "encoder.layer0.head0.Wq"）存取參數。參數本身是不可變張量，
最佳化器產生新張量後以 `update()` 換入。
"""

from __future__ import annotations

import math
from collections.abc import Iterator, Mapping

import numpy as np

from sad_detector.numeric.tensor import Tensor
from sad_detector.utils.errors import CheckpointError, ValidationError


class ParameterStore(Mapping[str, Tensor]):
    """名稱到參數張量的有序對應"""

    def __init__(self) -> None:
        self._params: dict[str, Tensor] = {}

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def add_weight(self, name: str, fan_in: int, fan_out: int, rng: np.random.Generator) -> Tensor:
        """以 U(-1/√fan_in, 1/√fan_in) 初始化權重矩陣"""
        bound = 1.0 / math.sqrt(fan_in)
        return self.add(name, rng.uniform(-bound, bound, size=(fan_in, fan_out)))

    def add_bias(self, name: str, size: int) -> Tensor:
        """偏差一律初始化為零"""
        return self.add(name, np.zeros(size))

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValidationError(f"參數名稱重複: {name}")
        tensor = Tensor(value, requires_grad=True, name=name)
        self._params[name] = tensor
        return tensor

    def subset(self, prefix: str) -> dict[str, Tensor]:
        """取出指定前綴（如 "detector."）的參數"""
        return {name: p for name, p in self._params.items() if name.startswith(prefix)}

    def update(self, new_params: Mapping[str, Tensor]) -> None:
        """換入最佳化後的參數張量"""
        for name, tensor in new_params.items():
            current = self._params.get(name)
            if current is None:
                raise ValidationError(f"未知的參數名稱: {name}")
            if current.shape != tensor.shape:
                raise ValidationError(f"參數 {name} 形狀改變: {current.shape} → {tensor.shape}")
            tensor.requires_grad = True
            tensor.name = name
            self._params[name] = tensor

    def as_arrays(self) -> dict[str, np.ndarray]:
        """複製所有參數為 numpy 陣列（檢查點與最佳快照使用）"""
        return {name: p.numpy() for name, p in self._params.items()}

    def load_arrays(self, arrays: Mapping[str, np.ndarray]) -> None:
        """由陣列載入參數；名稱或形狀不一致時拋出 CheckpointError"""
        missing = sorted(set(self._params) - set(arrays))
        unexpected = sorted(set(arrays) - set(self._params))
        if missing or unexpected:
            raise CheckpointError(
                "檢查點參數與模型不一致",
                details={"missing": missing, "unexpected": unexpected},
            )
        for name, array in arrays.items():
            expected = self._params[name].shape
            if tuple(np.shape(array)) != expected:
                raise CheckpointError(
                    f"參數 {name} 維度不符: 模型為 {expected}，檢查點為 {tuple(np.shape(array))}",
                    details={"param": name},
                )
        for name, array in arrays.items():
            self._params[name] = Tensor(array, requires_grad=True, name=name)
