"""測試 gradcheck 模組"""

import numpy as np

from sad_detector.numeric.gradcheck import check_gradients, relative_error
from sad_detector.numeric.tensor import Tensor


class TestGradCheck:
    """測試有限差分梯度檢查器"""

    def test_relative_error_floor(self):
        """測試兩者皆為零時相對誤差為 0"""
        assert relative_error(np.zeros(3), np.zeros(3)) == 0.0
        assert relative_error(np.array([1.0]), np.array([1.0])) == 0.0
        assert relative_error(np.array([1.0]), np.array([3.0])) == 0.5

    def test_correct_gradient_passes(self):
        """測試正確梯度通過檢查"""
        params = {"x": Tensor([0.5, -1.5], requires_grad=True)}
        result = check_gradients(lambda p: (p["x"] * p["x"] * p["x"]).sum(), params)
        assert result.passed()
        np.testing.assert_allclose(result.analytic["x"], [0.75, 6.75])

    def test_gradient_of_detached_path_is_caught(self):
        """測試解析梯度遺漏的路徑會被發現"""
        params = {"x": Tensor([1.0, 2.0], requires_grad=True)}
        result = check_gradients(lambda p: (p["x"].detach() * p["x"]).sum(), params)
        assert not result.passed()
        assert result.worst_param == "x"
