"""評估模組

AUC 指標與整體表現、少樣本、消融實驗流程。
"""

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
from sad_detector.evaluation.metrics import MetricsReport, auc_roc, safe_auc

__all__ = [
    "ABLATION_DROP_RATIO",
    "DEFAULT_P_VALUES",
    "ExperimentRow",
    "Job",
    "MetricsReport",
    "auc_roc",
    "format_table",
    "run_ablation",
    "run_fewshot",
    "run_jobs",
    "run_overall",
    "safe_auc",
    "seed_list",
]
