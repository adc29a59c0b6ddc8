"""測試 params 模組"""

import numpy as np
import pytest

from sad_detector.numeric.params import ParameterStore
from sad_detector.numeric.tensor import Tensor
from sad_detector.utils.errors import CheckpointError, ValidationError


class TestParameterStore:
    """測試 ParameterStore 類"""

    @pytest.fixture
    def store(self, rng):
        """提供含一個權重與一個偏差的儲存區"""
        store = ParameterStore()
        store.add_weight("detector.W1", 4, 3, rng)
        store.add_bias("detector.b1", 3)
        return store

    def test_weight_initialization_bounds(self, store):
        """測試權重落在 ±1/√fan_in 內"""
        weight = store["detector.W1"].data
        assert weight.shape == (4, 3)
        assert np.all(np.abs(weight) <= 0.5)
        np.testing.assert_array_equal(store["detector.b1"].data, np.zeros(3))

    def test_parameters_require_grad(self, store):
        """測試參數是需要梯度的葉節點"""
        assert all(p.requires_grad for p in store.values())
        assert store["detector.b1"].name == "detector.b1"

    def test_duplicate_name_rejected(self, store):
        """測試名稱重複"""
        with pytest.raises(ValidationError):
            store.add_bias("detector.b1", 3)

    def test_subset_by_prefix(self, store):
        """測試依前綴取出參數"""
        store.add_bias("projection.b1", 2)
        assert sorted(store.subset("detector.")) == ["detector.W1", "detector.b1"]

    def test_update_replaces_tensors(self, store):
        """測試換入新參數"""
        store.update({"detector.b1": Tensor(np.ones(3))})
        np.testing.assert_array_equal(store["detector.b1"].data, np.ones(3))
        assert store["detector.b1"].requires_grad

    def test_update_rejects_unknown_or_reshaped(self, store):
        """測試未知名稱與形狀改變"""
        with pytest.raises(ValidationError):
            store.update({"missing": Tensor([1.0])})
        with pytest.raises(ValidationError):
            store.update({"detector.b1": Tensor(np.ones(4))})

    def test_as_arrays_is_a_snapshot(self, store):
        """測試 as_arrays 回傳的是複本"""
        snapshot = store.as_arrays()
        snapshot["detector.b1"][0] = 7.0
        assert store["detector.b1"].data[0] == 0.0

    def test_load_arrays_roundtrip(self, store):
        """測試載入陣列後數值一致"""
        arrays = {name: value + 1.0 for name, value in store.as_arrays().items()}
        store.load_arrays(arrays)
        for name, value in arrays.items():
            np.testing.assert_array_equal(store[name].data, value)

    def test_load_arrays_rejects_mismatch(self, store):
        """測試名稱或形狀不一致時拋出 CheckpointError"""
        arrays = store.as_arrays()
        with pytest.raises(CheckpointError):
            store.load_arrays({"detector.W1": arrays["detector.W1"]})
        arrays["detector.b1"] = np.zeros(5)
        with pytest.raises(CheckpointError):
            store.load_arrays(arrays)
