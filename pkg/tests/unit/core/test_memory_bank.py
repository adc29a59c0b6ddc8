"""測試 memory_bank 模組"""

import math
from collections import deque

import numpy as np
import pandas as pd
import pytest

from sad_detector.core.memory_bank import (
    SIGMA_FLOOR,
    MemoryBank,
    Message,
    ReferenceScore,
    decay_weight,
    decay_weights,
    deviation,
)
from sad_detector.numeric.tensor import Tensor
from sad_detector.utils.errors import MemoryBankEmptyError, ValidationError


def _brute_force_reference(scores, times, t, normalized):
    """逐項迴圈計算加權參考統計量"""
    k = len(scores)
    weights = [1.0 / (math.log(t - ti + 1.0) + 1.0) for ti in times]
    denom = sum(weights) if normalized else k
    mu = sum(w * s for w, s in zip(weights, scores, strict=True)) / denom
    spread = sum(w * (s - mu) ** 2 for w, s in zip(weights, scores, strict=True))
    if normalized:
        variance = spread / sum(weights)
    else:
        variance = spread / (k - 1) if k > 1 else 0.0
    return mu, max(math.sqrt(variance), SIGMA_FLOOR)


class TestDecayWeight:
    """測試時間衰減權重"""

    def test_known_values(self):
        """測試 Δt = 0 權重為 1，且隨時間遞減"""
        assert decay_weight(5.0, 5.0) == 1.0
        assert decay_weight(math.e - 1.0, 0.0) == pytest.approx(0.5)
        assert decay_weight(100.0, 0.0) < decay_weight(100.0, 50.0)

    def test_vectorized_matches_scalar(self):
        """測試向量化版本與純量版本一致"""
        times = np.array([0.0, 1.0, 10.0, 99.5])
        expected = [decay_weight(100.0, ti) for ti in times]
        np.testing.assert_allclose(decay_weights(100.0, times), expected, rtol=1e-15)

    def test_future_message_rejected(self):
        """測試儲存時間晚於查詢時間"""
        with pytest.raises(ValidationError):
            decay_weight(1.0, 2.0)
        with pytest.raises(ValidationError):
            decay_weights(1.0, np.array([0.5, 2.0]))


class TestMemoryBankPush:
    """測試記憶庫寫入"""

    def test_only_normal_and_unlabeled_are_stored(self):
        """測試異常標籤不入庫"""
        bank = MemoryBank(capacity=10, sample_size=2)
        assert bank.push(0.3, 1.0, 0)
        assert bank.push(0.5, 2.0, -1)
        assert not bank.push(9.0, 3.0, 1)
        assert bank.entries() == [Message(0.3, 1.0), Message(0.5, 2.0)]
        assert bank.push_many([1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [1, 0, 1]) == 1

    def test_rejects_unknown_label_and_time_regression(self):
        """測試未知標籤與時間倒退"""
        bank = MemoryBank(capacity=10, sample_size=2)
        bank.push(0.0, 5.0, 0)
        with pytest.raises(ValidationError):
            bank.push(0.0, 6.0, 2)
        with pytest.raises(ValidationError):
            bank.push(0.0, 4.0, 0)
        assert bank.push(0.0, 5.0, 0)

    def test_invalid_construction(self):
        """測試容量與抽樣數驗證"""
        with pytest.raises(ValidationError):
            MemoryBank(capacity=0)
        with pytest.raises(ValidationError):
            MemoryBank(capacity=5, sample_size=0)

    def test_fifo_against_deque(self, rng):
        """測試 10⁴ 次隨機寫入後內容等於 deque 模型"""
        bank = MemoryBank(capacity=37, sample_size=5)
        model: deque[Message] = deque(maxlen=37)
        t = 0.0
        for _ in range(10_000):
            t += float(rng.exponential())
            score = float(rng.normal())
            label = int(rng.choice([-1, 0, 1]))
            stored = bank.push(score, t, label)
            if label != 1:
                model.append(Message(score, t))
            assert stored is (label != 1)
            assert len(bank) == len(model) <= 37
        assert bank.entries() == list(model)

    def test_clear_and_stats(self):
        """測試統計摘要與清空"""
        bank = MemoryBank(capacity=3, sample_size=2)
        assert bank.stats().size == 0
        assert bank.stats().mean_score is None
        for i in range(5):
            bank.push(float(i), float(i), 0)
        stats = bank.stats()
        assert stats.size == 3
        assert stats.mean_score == pytest.approx(3.0)
        assert (stats.min_score, stats.max_score) == (2.0, 4.0)
        assert (stats.oldest_t, stats.newest_t) == (2.0, 4.0)
        assert stats.to_dict()["capacity"] == 3
        bank.clear()
        assert len(bank) == 0
        assert bank.last_time is None


class TestReference:
    """測試參考分數計算"""

    def test_empty_bank_raises(self, rng):
        """測試冷啟動時拋出 MemoryBankEmptyError"""
        with pytest.raises(MemoryBankEmptyError):
            MemoryBank().reference(0.0, rng)

    def test_single_message_uses_sigma_floor(self, rng):
        """測試 k = 1 時 σ 使用下限值"""
        bank = MemoryBank(capacity=5, sample_size=3)
        bank.push(2.0, 0.0, 0)
        ref = bank.reference(0.0, rng)
        assert ref.k == 1
        assert ref.mu_r == pytest.approx(2.0)
        assert ref.sigma_r == SIGMA_FLOOR

    def test_no_decay_is_plain_statistics(self, rng):
        """測試關閉時間衰減時為一般平均與樣本標準差"""
        bank = MemoryBank(capacity=10, sample_size=10, time_decay=False)
        scores = [1.0, 2.0, 4.0, 7.0]
        bank.push_many(scores, [0.0, 1.0, 2.0, 3.0], [0, 0, 0, 0])
        ref = bank.reference(50.0, rng)
        assert ref.mu_r == pytest.approx(np.mean(scores))
        assert ref.sigma_r == pytest.approx(np.std(scores, ddof=1))

    @pytest.mark.parametrize("normalized", [False, True])
    def test_matches_brute_force(self, normalized):
        """測試 1000 個隨機記憶庫與逐項公式一致"""
        rng = np.random.default_rng(99)
        for trial in range(1000):
            capacity = int(rng.integers(1, 30))
            sample_size = int(rng.integers(1, 30))
            bank = MemoryBank(capacity=capacity, sample_size=sample_size, normalized=normalized)
            n = int(rng.integers(1, 40))
            times = np.sort(rng.uniform(0.0, 1000.0, size=n))
            bank.push_many(rng.normal(size=n), times, np.zeros(n, dtype=np.int64))
            t = float(times[-1] + rng.uniform(0.0, 500.0))

            ref = bank.reference(t, np.random.default_rng(trial))
            replay = np.random.default_rng(trial)
            chosen = replay.choice(len(bank), size=min(sample_size, len(bank)), replace=False)
            entries = bank.entries()
            mu, sigma = _brute_force_reference(
                [entries[i].score for i in chosen], [entries[i].t for i in chosen], t, normalized
            )
            assert ref.k == len(chosen)
            assert ref.mu_r == pytest.approx(mu, abs=1e-12)
            assert ref.sigma_r == pytest.approx(sigma, abs=1e-12)


class TestDeviation:
    """測試偏差分數"""

    def test_scalar(self):
        """測試純量偏差"""
        ref = ReferenceScore(mu_r=1.0, sigma_r=2.0, t=0.0, k=4)
        assert deviation(5.0, ref) == pytest.approx(2.0)
        assert deviation(1.0, ReferenceScore.standard_normal()) == 1.0

    def test_tensor_matches_scalar(self):
        """測試張量版本與純量版本一致"""
        ref = ReferenceScore(mu_r=-0.5, sigma_r=0.25, t=3.0, k=2)
        scores = Tensor(np.array([[0.0], [1.0]]))
        np.testing.assert_allclose(deviation(scores, ref).data, [[2.0], [6.0]])


class TestDumpCsv:
    """測試記憶庫匯出"""

    def test_dump_csv(self, temp_dir):
        """測試匯出 (score, t) CSV"""
        bank = MemoryBank(capacity=4, sample_size=2)
        bank.push_many([0.5, 1.5], [1.0, 2.0], [0, -1])
        path = bank.dump_csv(temp_dir / "bank" / "bank.csv")
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["score", "t"]
        np.testing.assert_allclose(frame["score"], [0.5, 1.5])
