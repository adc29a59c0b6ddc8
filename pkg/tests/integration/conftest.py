"""整合測試共用 fixtures

整合測試會完整跑過「產生資料 → 訓練 → 評估」的流程，標記為 slow 的測試
以預設規模的合成事件流驗收模型效果，可用 -m "not slow" 略過。
"""

import pytest

from sad_detector.core.config import ExperimentConfig, LossConfig
from sad_detector.graph.synth import SECONDS_PER_DAY, SynthConfig, generate


@pytest.fixture(scope="session")
def acceptance_stream():
    """200 個使用者、50 個物品、14 天、5% 異常使用者、特徵位移 2.0"""
    return generate(SynthConfig(seed=0))


@pytest.fixture(scope="session")
def pipeline_stream():
    """幾秒內可完成多次訓練的合成事件流"""
    return generate(
        SynthConfig(
            num_users=24,
            num_items=5,
            horizon_seconds=3 * SECONDS_PER_DAY,
            base_rate=3.0,
            anomaly_user_fraction=0.3,
            anomaly_feature_shift=3.0,
            edge_feature_dim=3,
            anomaly_window_seconds=3 * SECONDS_PER_DAY,
            seed=11,
        )
    )


@pytest.fixture
def acceptance_config() -> ExperimentConfig:
    """完整 SAD（scl、downstream），α=0.1、β=0.01、lr=0.0005、批次 256

    模型寬度縮小到單核心可在數分鐘內完成的規模。
    """
    return ExperimentConfig(
        ablation="scl",
        batch_size=256,
        lr=0.0005,
        epochs=10,
        loss=LossConfig(alpha=0.1, beta=0.01),
        memory_size=4000,
        memory_sample_size=1000,
        per_hop=10,
        embedding_dim=32,
        num_heads=2,
        time_dim=16,
        detector_hidden=32,
        projection_hidden=32,
        patience=3,
    )


@pytest.fixture
def pipeline_config() -> ExperimentConfig:
    """小模型尺寸的實驗設定"""
    return ExperimentConfig(
        batch_size=64,
        lr=0.005,
        epochs=2,
        memory_size=128,
        memory_sample_size=16,
        per_hop=3,
        embedding_dim=8,
        num_heads=2,
        time_dim=4,
        detector_hidden=6,
        projection_hidden=6,
    )
