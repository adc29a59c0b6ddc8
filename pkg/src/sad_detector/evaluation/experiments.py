"""實驗流程

- run_overall: 每個種子訓練一次，彙整測試 AUC
- run_fewshot: 依標籤丟棄比例 p 掃描
- run_ablation: 在 p = 0.5 下依序訓練 backbone → dev → mem → time → scl

各 (p, 種子) 或 (變體, 種子) 互相獨立，jobs > 1 時以行程池平行執行。
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any

from sad_detector.core.config import ABLATIONS, MODE_ANOMALY, ExperimentConfig
from sad_detector.evaluation.metrics import MetricsReport
from sad_detector.graph.events import EventStream
from sad_detector.utils.errors import TrainingError, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_P_VALUES: tuple[float, ...] = (0.1, 0.3, 0.5, 0.7, 0.9)
ABLATION_DROP_RATIO = 0.5
DEFAULT_SEEDS = 10


@dataclass(frozen=True)
class Job:
    """單次獨立訓練"""

    key: Any
    config: ExperimentConfig


@dataclass
class ExperimentRow:
    """結果表格的一列"""

    key: Any
    report: MetricsReport

    def to_dict(self) -> dict[str, Any]:
        return {"key": self.key, **self.report.to_dict()}


def seed_list(seeds: int | Sequence[int]) -> list[int]:
    """整數 N 代表種子 0..N−1"""
    if isinstance(seeds, int):
        if seeds < 1:
            raise ValidationError(f"種子數必須至少為 1，目前為 {seeds}")
        return list(range(seeds))
    chosen = [int(s) for s in seeds]
    if not chosen:
        raise ValidationError("至少需要一個種子")
    if len(set(chosen)) != len(chosen):
        raise ValidationError(f"種子重複: {chosen}")
    return chosen


def _run_job(stream: EventStream, job: Job) -> float | None:
    # trainer 匯入 evaluation.metrics，於此延後匯入以免循環
    from sad_detector.training.trainer import train

    return train(stream, job.config).test_auc


def run_jobs(stream: EventStream, jobs: Sequence[Job], workers: int = 1) -> list[float | None]:
    """執行所有訓練，回傳與 jobs 同順序的測試 AUC"""
    if workers < 1:
        raise ValidationError(f"平行工作數必須至少為 1，目前為 {workers}")
    logger.info(f"共 {len(jobs)} 個訓練工作，平行數 {workers}")
    if workers == 1 or len(jobs) <= 1:
        results = []
        for index, job in enumerate(jobs, start=1):
            logger.info(f"[{index}/{len(jobs)}] {job.key} seed={job.config.seed}")
            results.append(_run_job(stream, job))
        return results
    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(_run_job, stream, job) for job in jobs]
        return [future.result() for future in futures]


def _aggregate(key: Any, jobs: Sequence[Job], aucs: Sequence[float | None], config: dict[str, Any]) -> ExperimentRow:
    per_seed = {}
    for job, auc in zip(jobs, aucs, strict=True):
        if auc is None:
            logger.warning(f"{key} seed={job.config.seed} 的測試集只有單一類別，略過此結果")
            continue
        per_seed[job.config.seed] = auc
    if not per_seed:
        raise TrainingError(f"{key} 沒有任何種子得到有效的測試 AUC", details={"key": key})
    return ExperimentRow(key=key, report=MetricsReport.from_values(per_seed, config))


def _run_grid(
    stream: EventStream, variants: Sequence[tuple[Any, ExperimentConfig]], seeds: list[int], workers: int
) -> list[ExperimentRow]:
    jobs = [Job(key, config.replace(seed=seed)) for key, config in variants for seed in seeds]
    aucs = run_jobs(stream, jobs, workers)
    rows = []
    for offset, (key, config) in enumerate(variants):
        chunk = slice(offset * len(seeds), (offset + 1) * len(seeds))
        rows.append(_aggregate(key, jobs[chunk], aucs[chunk], config.to_dict()))
    return rows


def run_overall(
    stream: EventStream, config: ExperimentConfig, seeds: int | Sequence[int] = DEFAULT_SEEDS, jobs: int = 1
) -> MetricsReport:
    """整體表現：以同一設定訓練每個種子並彙整測試 AUC"""
    (row,) = _run_grid(stream, [("overall", config)], seed_list(seeds), jobs)
    return row.report


def run_fewshot(
    stream: EventStream,
    config: ExperimentConfig,
    p_values: Sequence[float] = DEFAULT_P_VALUES,
    seeds: int | Sequence[int] = DEFAULT_SEEDS,
    jobs: int = 1,
) -> list[ExperimentRow]:
    """標籤丟棄比例掃描；只丟棄訓練集的標籤"""
    if not p_values:
        raise ValidationError("至少需要一個丟棄比例")
    for p in p_values:
        if not 0.0 <= p <= 1.0:
            raise ValidationError(f"丟棄比例必須介於 0 與 1 之間，目前為 {p}")
    variants = [(float(p), config.replace(drop_ratio=float(p))) for p in p_values]
    return _run_grid(stream, variants, seed_list(seeds), jobs)


def run_ablation(
    stream: EventStream,
    config: ExperimentConfig,
    seeds: int | Sequence[int] = DEFAULT_SEEDS,
    jobs: int = 1,
    drop_ratio: float = ABLATION_DROP_RATIO,
) -> list[ExperimentRow]:
    """消融階梯，依 backbone、dev、mem、time、scl 的順序輸出

    anomaly 模式下 backbone 沒有可訓練的損失，因此略過該列。
    """
    names = list(ABLATIONS)
    if config.mode == MODE_ANOMALY:
        logger.warning("anomaly 模式下略過 backbone 消融")
        names.remove("backbone")
    variants = [(name, config.replace(ablation=name, drop_ratio=drop_ratio)) for name in names]
    return _run_grid(stream, variants, seed_list(seeds), jobs)


def format_table(rows: Sequence[ExperimentRow], key_header: str) -> str:
    """將結果排成文字表格"""
    header = f"{key_header:>10}  {'AUC':>8}  {'std':>8}  {'seeds':>5}"
    lines = [header, "-" * len(header)]
    for row in rows:
        key = f"{row.key:.2f}" if isinstance(row.key, float) else str(row.key)
        lines.append(f"{key:>10}  {row.report.auc:>8.4f}  {row.report.auc_std:>8.4f}  {row.report.num_seeds:>5}")
    return "\n".join(lines)
