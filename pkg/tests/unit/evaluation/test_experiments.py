"""測試 experiments 模組"""

import pytest

from sad_detector.core.config import ABLATIONS, MODE_ANOMALY
from sad_detector.evaluation.experiments import (
    ABLATION_DROP_RATIO,
    DEFAULT_P_VALUES,
    ExperimentRow,
    Job,
    format_table,
    run_ablation,
    run_fewshot,
    run_jobs,
    run_overall,
    seed_list,
)
from sad_detector.evaluation.metrics import MetricsReport
from sad_detector.utils.errors import TrainingError, ValidationError


@pytest.fixture
def fake_jobs(mocker):
    """以種子與設定決定的假訓練結果取代實際訓練"""

    def fake(stream, job):
        return 0.5 + job.config.seed / 100 + job.config.drop_ratio / 10

    return mocker.patch("sad_detector.evaluation.experiments._run_job", side_effect=fake)


class TestSeedList:
    """測試種子清單"""

    def test_integer_and_sequence(self):
        """測試整數 N 與明確清單"""
        assert seed_list(3) == [0, 1, 2]
        assert seed_list([4, 2]) == [4, 2]

    @pytest.mark.parametrize("seeds", [0, [], [1, 1]])
    def test_invalid(self, seeds):
        """測試種子數為 0、空清單與重複種子"""
        with pytest.raises(ValidationError):
            seed_list(seeds)


class TestRunners:
    """測試實驗流程"""

    def test_run_jobs_keeps_order(self, tiny_stream, tiny_config, fake_jobs):
        """測試結果順序與工作順序相同"""
        jobs = [Job("a", tiny_config.replace(seed=s)) for s in (3, 1, 2)]
        assert run_jobs(tiny_stream, jobs) == pytest.approx([0.53, 0.51, 0.52])
        with pytest.raises(ValidationError):
            run_jobs(tiny_stream, jobs, workers=0)

    def test_overall(self, tiny_stream, tiny_config, fake_jobs):
        """測試整體表現彙整每個種子"""
        report = run_overall(tiny_stream, tiny_config, seeds=4)
        assert isinstance(report, MetricsReport)
        assert report.per_seed == pytest.approx({0: 0.5, 1: 0.51, 2: 0.52, 3: 0.53})
        assert report.auc == pytest.approx(0.515)
        assert fake_jobs.call_count == 4

    def test_fewshot_sweeps_drop_ratio(self, tiny_stream, tiny_config, fake_jobs):
        """測試每個丟棄比例一列且設定帶入 drop_ratio"""
        rows = run_fewshot(tiny_stream, tiny_config, seeds=2)
        assert [row.key for row in rows] == list(DEFAULT_P_VALUES)
        assert rows[0].report.config["drop_ratio"] == 0.1
        assert rows[-1].report.auc == pytest.approx(0.5 + 0.005 + 0.09)
        ratios = {call.args[1].config.drop_ratio for call in fake_jobs.call_args_list}
        assert ratios == set(DEFAULT_P_VALUES)

    def test_fewshot_rejects_bad_ratio(self, tiny_stream, tiny_config, fake_jobs):
        """測試丟棄比例範圍"""
        with pytest.raises(ValidationError):
            run_fewshot(tiny_stream, tiny_config, p_values=[0.5, 1.5], seeds=1)
        with pytest.raises(ValidationError):
            run_fewshot(tiny_stream, tiny_config, p_values=[], seeds=1)
        assert fake_jobs.call_count == 0

    def test_ablation_ladder_order(self, tiny_stream, tiny_config, fake_jobs):
        """測試消融依階梯順序輸出且使用固定丟棄比例"""
        rows = run_ablation(tiny_stream, tiny_config, seeds=[0, 1])
        assert [row.key for row in rows] == list(ABLATIONS)
        for row in rows:
            assert row.report.config["ablation"] == row.key
            assert row.report.config["drop_ratio"] == ABLATION_DROP_RATIO

    def test_ablation_skips_backbone_in_anomaly_mode(self, tiny_stream, tiny_config, fake_jobs):
        """測試 anomaly 模式略過 backbone"""
        rows = run_ablation(tiny_stream, tiny_config.replace(mode=MODE_ANOMALY), seeds=1)
        assert [row.key for row in rows] == list(ABLATIONS[1:])

    def test_undefined_auc_is_skipped(self, tiny_stream, tiny_config, mocker):
        """測試單一類別測試集的種子不列入彙整"""
        mocker.patch("sad_detector.evaluation.experiments._run_job", side_effect=[0.7, None, 0.9])
        report = run_overall(tiny_stream, tiny_config, seeds=3)
        assert report.per_seed == {0: 0.7, 2: 0.9}

    def test_all_undefined_raises(self, tiny_stream, tiny_config, mocker):
        """測試所有種子皆無有效 AUC"""
        mocker.patch("sad_detector.evaluation.experiments._run_job", return_value=None)
        with pytest.raises(TrainingError):
            run_overall(tiny_stream, tiny_config, seeds=2)


class TestFormatTable:
    """測試結果表格"""

    def test_rows(self):
        """測試表頭與數值格式"""
        rows = [
            ExperimentRow(0.1, MetricsReport.from_values({0: 0.8, 1: 0.6})),
            ExperimentRow("scl", MetricsReport.from_values({0: 0.75})),
        ]
        lines = format_table(rows, "p").splitlines()
        assert lines[0].split() == ["p", "AUC", "std", "seeds"]
        assert lines[2].split() == ["0.10", "0.7000", "0.1000", "2"]
        assert lines[3].split() == ["scl", "0.7500", "0.0000", "1"]
        assert rows[1].to_dict()["key"] == "scl"
