"""完整流程整合測試

涵蓋平行與循序實驗的一致性、命令列的完整流程，以及合成資料上的效果驗收。
"""

import json

import pytest

from sad_detector import cli
from sad_detector.evaluation.experiments import run_ablation, run_fewshot, run_overall
from sad_detector.graph.events import ingest_csv, write_csv
from sad_detector.training.trainer import CHECKPOINT_NAME, infer_scores, train


class TestParallelExperiments:
    """測試行程池與循序執行的結果一致"""

    def test_overall_parallel_matches_sequential(self, pipeline_stream, pipeline_config):
        """測試 jobs=2 與 jobs=1 的每個種子 AUC 完全相同"""
        sequential = run_overall(pipeline_stream, pipeline_config, seeds=2, jobs=1)
        parallel = run_overall(pipeline_stream, pipeline_config, seeds=2, jobs=2)
        assert parallel.per_seed == sequential.per_seed
        assert parallel.auc == sequential.auc

    def test_fewshot_parallel_matches_sequential(self, pipeline_stream, pipeline_config):
        """測試丟棄比例掃描在平行執行下順序與數值不變"""
        sequential = run_fewshot(pipeline_stream, pipeline_config, p_values=[0.0, 0.5], seeds=[0, 1], jobs=1)
        parallel = run_fewshot(pipeline_stream, pipeline_config, p_values=[0.0, 0.5], seeds=[0, 1], jobs=3)
        assert [row.key for row in parallel] == [0.0, 0.5]
        assert [row.report.per_seed for row in parallel] == [row.report.per_seed for row in sequential]


class TestStoredPipeline:
    """測試經由檔案的訓練與推論"""

    def test_csv_round_trip_then_train_and_infer(self, pipeline_stream, pipeline_config, temp_dir):
        """測試寫出 CSV、重新讀入、訓練並由檢查點推論"""
        stream = ingest_csv(write_csv(pipeline_stream, temp_dir / "stream.csv"))
        assert len(stream) == len(pipeline_stream)
        assert stream.edge_feature_dim == pipeline_stream.edge_feature_dim

        report = train(stream, pipeline_config, output_dir=temp_dir / "run")
        assert report.best_checkpoint == str(temp_dir / "run" / CHECKPOINT_NAME)
        predictions = infer_scores(stream, report.best_checkpoint)
        assert len(predictions) == len(stream)

    def test_cli_generate_overall_and_ablate(self, temp_dir, monkeypatch):
        """測試命令列的 generate → overall → ablate 流程"""
        monkeypatch.delenv("SAD_CONFIG", raising=False)
        data = temp_dir / "synth.csv"
        config = temp_dir / "small.env"
        config.write_text(
            "embedding_dim=8\nnum_heads=2\ntime_dim=4\ndetector_hidden=6\nprojection_hidden=6\n"
            "per_hop=3\nmemory_size=64\nmemory_sample_size=8\nbatch_size=64\nepochs=1\n",
            encoding="utf-8",
        )
        assert (
            cli.main(
                [
                    "generate", "--out", str(data), "--users", "20", "--items", "4", "--days", "3",
                    "--anomaly-fraction", "0.3", "--shift", "3", "--feature-dim", "3", "--window-days", "3", "-q",
                ]
            )  # fmt: skip
            == 0
        )

        overall = temp_dir / "overall.json"
        common = ["--data", str(data), "--config", str(config), "--seeds", "2", "-q"]
        assert cli.main(["overall", *common, "--jobs", "2", "--out", str(overall)]) == 0
        saved = json.loads(overall.read_text(encoding="utf-8"))
        assert saved["num_seeds"] == 2
        assert set(saved["per_seed"]) == {"0", "1"}

        ablation = temp_dir / "ablation.json"
        assert cli.main(["ablate", *common, "--out", str(ablation)]) == 0
        rows = json.loads(ablation.read_text(encoding="utf-8"))
        assert [row["key"] for row in rows] == ["backbone", "dev", "mem", "time", "scl"]


@pytest.mark.slow
class TestSyntheticAcceptance:
    """預設規模合成資料上的效果驗收"""

    def test_full_model_reaches_target_auc(self, acceptance_stream, acceptance_config):
        """測試完整 SAD 在 3 個種子下的平均測試 AUC ≥ 0.85"""
        report = run_overall(acceptance_stream, acceptance_config, seeds=3)
        assert report.num_seeds == 3
        assert report.auc >= 0.85

    def test_ablation_direction(self, acceptance_stream, acceptance_config):
        """測試 p = 0.5 下 scl ≥ backbone 且 time ≥ dev（5 個種子平均）"""
        rows = {row.key: row.report.auc for row in run_ablation(acceptance_stream, acceptance_config, seeds=5)}
        assert rows["scl"] >= rows["backbone"]
        assert rows["time"] >= rows["dev"]

    def test_fewshot_robustness(self, acceptance_stream, acceptance_config):
        """測試 p = 0.9 時保留 p = 0.1 至少 85% 的 AUC − 0.5"""
        low, high = run_fewshot(acceptance_stream, acceptance_config, p_values=[0.1, 0.9], seeds=3)
        assert high.report.auc - 0.5 >= 0.85 * (low.report.auc - 0.5)
