"""Pytest 共享配置與 Fixtures

此檔案定義了所有測試共享的配置、fixtures 和 hooks。
"""

import sys
import tempfile
from collections.abc import Generator
from pathlib import Path

import numpy as np
import pytest

# ============================================================
# 環境配置
# ============================================================

# 將 src 目錄加入 Python 路徑
ROOT_DIR = Path(__file__).parent.parent
SRC_DIR = ROOT_DIR / "src"
sys.path.insert(0, str(SRC_DIR))

from sad_detector.core.config import ExperimentConfig, LossConfig  # noqa: E402
from sad_detector.graph.events import Event, EventStream  # noqa: E402
from sad_detector.graph.synth import SECONDS_PER_DAY, SynthConfig, generate  # noqa: E402

# ============================================================
# 基礎 Fixtures
# ============================================================


@pytest.fixture
def temp_dir() -> Generator[Path, None, None]:
    """提供臨時目錄，測試結束後自動清理"""
    with tempfile.TemporaryDirectory(ignore_cleanup_errors=True) as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def rng() -> np.random.Generator:
    """固定種子的亂數產生器"""
    return np.random.default_rng(1234)


# ============================================================
# 事件流 Fixtures
# ============================================================


def make_stream(
    rows: list[tuple[int, int, float, int]], num_nodes: int, feature_dim: int = 2, num_users: int = 0
) -> EventStream:
    """由 (src, dst, t, label) 建立事件流，特徵為 (t, 索引, 0, ...)"""
    events = [
        Event(src, dst, t, tuple([float(t), float(i)] + [0.0] * (feature_dim - 2)), label)
        for i, (src, dst, t, label) in enumerate(rows)
    ]
    return EventStream.from_events(events, num_nodes=num_nodes, edge_feature_dim=feature_dim, num_users=num_users)


@pytest.fixture
def tiny_stream() -> EventStream:
    """4 個節點、6 個事件的小事件流（含同時間戳與未標註事件）"""
    rows = [
        (0, 2, 1.0, 0),
        (1, 2, 2.0, 1),
        (0, 3, 3.0, 0),
        (1, 3, 3.0, -1),
        (0, 2, 5.0, 0),
        (1, 2, 8.0, 1),
    ]
    return make_stream(rows, num_nodes=4, num_users=2)


@pytest.fixture
def small_synth_config() -> SynthConfig:
    """幾秒內即可訓練完的合成資料設定"""
    return SynthConfig(
        num_users=30,
        num_items=6,
        horizon_seconds=4 * SECONDS_PER_DAY,
        base_rate=3.0,
        anomaly_user_fraction=0.3,
        anomaly_feature_shift=3.0,
        edge_feature_dim=4,
        anomaly_window_seconds=4 * SECONDS_PER_DAY,
        seed=7,
    )


@pytest.fixture
def small_synth_stream(small_synth_config: SynthConfig) -> EventStream:
    """小型合成事件流"""
    return generate(small_synth_config)


# ============================================================
# 設定相關 Fixtures
# ============================================================


@pytest.fixture
def tiny_config() -> ExperimentConfig:
    """小模型尺寸的實驗設定"""
    return ExperimentConfig(
        batch_size=32,
        lr=0.005,
        epochs=2,
        seed=0,
        loss=LossConfig(),
        memory_size=128,
        memory_sample_size=16,
        hops=2,
        per_hop=3,
        embedding_dim=8,
        num_layers=2,
        num_heads=2,
        time_dim=4,
        detector_hidden=6,
        projection_hidden=6,
        patience=5,
    )


# ============================================================
# pytest 配置 Hooks
# ============================================================


def pytest_configure(config):
    """pytest 啟動時的配置"""
    # 註冊自定義標記
    config.addinivalue_line("markers", "unit: Unit tests")
    config.addinivalue_line("markers", "integration: Integration tests")
    config.addinivalue_line("markers", "slow: Slow running tests")


def pytest_collection_modifyitems(config, items):
    """修改收集到的測試項目"""
    # 為單元測試自動加上 @pytest.mark.unit
    for item in items:
        if "unit" in str(item.fspath):
            item.add_marker(pytest.mark.unit)
        elif "integration" in str(item.fspath):
            item.add_marker(pytest.mark.integration)
