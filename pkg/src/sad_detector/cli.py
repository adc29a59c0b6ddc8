"""CLI 模組 - 合成資料、訓練、評估與實驗流程的命令列介面"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from sad_detector.core.config import ABLATIONS, MODES, ConfigManager, ExperimentConfig
from sad_detector.evaluation.experiments import (
    ABLATION_DROP_RATIO,
    DEFAULT_P_VALUES,
    ExperimentRow,
    format_table,
    run_ablation,
    run_fewshot,
    run_overall,
)
from sad_detector.evaluation.metrics import safe_auc
from sad_detector.graph.adjacency import SAMPLING_STRATEGIES
from sad_detector.graph.events import LABEL_UNLABELED, EventStream, describe_stream, ingest_csv, write_csv
from sad_detector.graph.synth import SECONDS_PER_DAY, SynthConfig, generate
from sad_detector.training.trainer import embed_events, infer_scores, load_model, train
from sad_detector.utils import AppError, FileError, ValidationError, format_exception
from sad_detector.utils.logging_config import set_package_level, setup_root_logger
from sad_detector.version import get_app_version

logger = logging.getLogger(__name__)

LOG_DIR = "logs"


def create_parser() -> argparse.ArgumentParser:
    """建立命令列參數解析器"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value 設定檔（未指定時讀取環境變數 SAD_CONFIG）")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="詳細輸出模式 (DEBUG)")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="安靜模式，僅顯示錯誤")
    common.add_argument("--log-file", help=f"另外寫入日誌檔（位於 {LOG_DIR}/ 下，每日輪替）")

    parser = argparse.ArgumentParser(
        prog="sad-detector",
        description="動態圖半監督異常偵測 - 合成資料、訓練、評估與實驗",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
範例:
  # 產生合成資料
  sad-detector generate --out data/synth.csv --seed 0

  # 訓練（下游模式、完整模型、丟棄 50% 訓練標籤）
  sad-detector train --data data/synth.csv --drop-ratio 0.5 --out runs/seed0

  # 以檢查點評估並輸出逐事件預測
  sad-detector eval --checkpoint runs/seed0/best.ckpt --data data/synth.csv --predictions pred.csv

  # 標籤丟棄比例掃描與消融實驗
  sad-detector fewshot --data data/synth.csv --seeds 3 --jobs 3 --out fewshot.json
  sad-detector ablate --data data/synth.csv --seeds 5 --out ablation.json

  # 匯出節點表示
  sad-detector export-embeddings --checkpoint runs/seed0/best.ckpt --data data/synth.csv --out emb.csv
""",
    )
    subparsers = parser.add_subparsers(dest="command", help="可用指令")

    # generate 子命令
    synth_defaults = SynthConfig()
    generate_parser = subparsers.add_parser("generate", parents=[common], help="產生合成互動資料 (CSV)")
    generate_parser.add_argument("--out", required=True, help="輸出 CSV 路徑")
    generate_parser.add_argument("--users", type=int, default=synth_defaults.num_users, help="使用者數")
    generate_parser.add_argument("--items", type=int, default=synth_defaults.num_items, help="物品數")
    generate_parser.add_argument(
        "--days", type=float, default=synth_defaults.horizon_seconds / SECONDS_PER_DAY, help="時間長度（天）"
    )
    generate_parser.add_argument(
        "--base-rate", type=float, default=synth_defaults.base_rate, help="每使用者每天平均事件數"
    )
    generate_parser.add_argument(
        "--amplitude", type=float, default=synth_defaults.daily_cycle_amplitude, help="日週期振幅 (0~1)"
    )
    generate_parser.add_argument(
        "--anomaly-fraction", type=float, default=synth_defaults.anomaly_user_fraction, help="異常使用者比例"
    )
    generate_parser.add_argument(
        "--shift", type=float, default=synth_defaults.anomaly_feature_shift, help="異常事件的特徵平移量"
    )
    generate_parser.add_argument(
        "--feature-dim", type=int, default=synth_defaults.edge_feature_dim, help="邊特徵維度"
    )
    generate_parser.add_argument(
        "--window-days",
        type=float,
        default=None,
        help="異常時間窗長度（天）；未指定時持續到觀測結束",
    )
    generate_parser.add_argument("--seed", type=int, default=synth_defaults.seed, help="亂數種子")

    # train 子命令
    train_parser = subparsers.add_parser("train", parents=[common], help="訓練模型")
    train_parser.add_argument("--data", required=True, help="JODIE 格式 CSV")
    _add_experiment_flags(train_parser)
    train_parser.add_argument("--drop-ratio", type=float, help="訓練集標籤丟棄比例 p")
    train_parser.add_argument("--seed", type=int, help="亂數種子")
    train_parser.add_argument("--out", help="輸出目錄（檢查點與 train_report.json）")

    # eval 子命令
    eval_parser = subparsers.add_parser("eval", parents=[common], help="以檢查點評估資料")
    eval_parser.add_argument("--checkpoint", required=True, help="檢查點路徑")
    eval_parser.add_argument("--data", required=True, help="JODIE 格式 CSV")
    eval_parser.add_argument("--predictions", help="逐事件預測輸出 CSV")
    eval_parser.add_argument("--out", help="評估報告 JSON")

    # overall / fewshot / ablate 子命令
    overall_parser = subparsers.add_parser("overall", parents=[common], help="多種子整體表現")
    fewshot_parser = subparsers.add_parser("fewshot", parents=[common], help="標籤丟棄比例掃描")
    ablate_parser = subparsers.add_parser("ablate", parents=[common], help="消融實驗")
    for sub in (overall_parser, fewshot_parser, ablate_parser):
        sub.add_argument("--data", required=True, help="JODIE 格式 CSV")
        sub.add_argument("--seeds", type=int, default=10, help="種子數（使用 0..N-1，預設: 10）")
        sub.add_argument("--jobs", type=int, default=1, help="平行訓練數（預設: 1）")
        sub.add_argument("--out", help="結果 JSON")
        _add_experiment_flags(sub)
    overall_parser.add_argument("--drop-ratio", type=float, help="訓練集標籤丟棄比例 p")
    fewshot_parser.add_argument(
        "--p-values",
        type=float,
        nargs="+",
        default=list(DEFAULT_P_VALUES),
        help="丟棄比例（預設: 0.1 0.3 0.5 0.7 0.9）",
    )
    ablate_parser.add_argument(
        "--drop-ratio", type=float, default=ABLATION_DROP_RATIO, help="丟棄比例（預設: 0.5）"
    )

    # export-embeddings 子命令
    export_parser = subparsers.add_parser("export-embeddings", parents=[common], help="匯出節點表示 CSV")
    export_parser.add_argument("--checkpoint", required=True, help="檢查點路徑")
    export_parser.add_argument("--data", required=True, help="JODIE 格式 CSV")
    export_parser.add_argument("--out", required=True, help="輸出 CSV")

    # describe 子命令
    describe_parser = subparsers.add_parser("describe", parents=[common], help="顯示資料集統計")
    describe_parser.add_argument("--data", required=True, help="JODIE 格式 CSV")
    describe_parser.add_argument("--out", help="統計 JSON")

    # config 子命令
    config_parser = subparsers.add_parser("config", parents=[common], help="顯示、驗證或匯出設定")
    config_group = config_parser.add_mutually_exclusive_group()
    config_group.add_argument("--show", action="store_true", help="顯示目前設定")
    config_group.add_argument("--validate", action="store_true", help="驗證設定")
    config_group.add_argument("--export", metavar="FILE", help="匯出設定為 JSON")

    # version 子命令
    subparsers.add_parser("version", help="顯示版本資訊")

    return parser


def _add_experiment_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--mode", choices=MODES, help="anomaly 或 downstream")
    sub.add_argument("--ablation", choices=ABLATIONS, help="消融階梯位置")
    sub.add_argument("--epochs", type=int, help="訓練 epoch 數")
    sub.add_argument("--batch-size", type=int, help="批次大小")
    sub.add_argument("--lr", type=float, help="學習率")
    sub.add_argument("--sampling", choices=SAMPLING_STRATEGIES, help="鄰居抽樣策略")


def configure_logging(args: argparse.Namespace) -> None:
    """依 -v/-q/--log-file 設定日誌"""
    level = logging.INFO
    if getattr(args, "verbose", False):
        level = logging.DEBUG
    elif getattr(args, "quiet", False):
        level = logging.ERROR
    setup_root_logger(getattr(args, "log_file", None), level=level, log_dir=LOG_DIR)
    set_package_level(level)


def load_experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    """設定檔為底，命令列參數覆蓋"""
    manager = ConfigManager(getattr(args, "config", None))
    overrides = {
        key: getattr(args, attr, None)
        for key, attr in (
            ("mode", "mode"),
            ("ablation", "ablation"),
            ("epochs", "epochs"),
            ("batch_size", "batch_size"),
            ("lr", "lr"),
            ("sampling", "sampling"),
            ("drop_ratio", "drop_ratio"),
            ("seed", "seed"),
        )
    }
    manager.apply_overrides(overrides)
    return manager.to_experiment_config()


def _load_stream(path: str) -> EventStream:
    stream = ingest_csv(path)
    logger.info(f"已載入 {path}: {len(stream)} 個事件、{stream.num_nodes} 個節點")
    return stream


def _write_json(path: str | Path, data: Any) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(data, ensure_ascii=False, indent=2), encoding="utf-8")
    except OSError as e:
        raise FileError(f"無法寫入報告: {path}", details={"error": str(e)}) from e
    logger.info(f"已寫入報告: {path}")
    return path


def _write_frame(frame: pd.DataFrame, path: str | Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False)
    except OSError as e:
        raise FileError(f"無法寫入 CSV: {path}", details={"error": str(e)}) from e
    return path


def _fmt_auc(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.4f}"


def cmd_generate(args: argparse.Namespace) -> int:
    """產生合成資料"""
    config = SynthConfig(
        num_users=args.users,
        num_items=args.items,
        horizon_seconds=args.days * SECONDS_PER_DAY,
        base_rate=args.base_rate,
        daily_cycle_amplitude=args.amplitude,
        anomaly_user_fraction=args.anomaly_fraction,
        anomaly_feature_shift=args.shift,
        edge_feature_dim=args.feature_dim,
        anomaly_window_seconds=None if args.window_days is None else args.window_days * SECONDS_PER_DAY,
        seed=args.seed,
    )
    stream = generate(config)
    path = write_csv(stream, args.out)
    profile = describe_stream(stream)
    print(f"已產生 {profile.num_events} 個事件（異常 {profile.anomalous_events}）: {path}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    """訓練模型"""
    config = load_experiment_config(args)
    stream = _load_stream(args.data)
    report = train(stream, config, output_dir=args.out)

    print("\nepoch      loss   val_auc")
    print("-" * 26)
    for record in report.epochs:
        print(f"{record.epoch:>5}  {record.total_loss:>8.4f}  {_fmt_auc(record.val_auc):>8}")
    print(f"\n最佳 epoch: {report.best_epoch}")
    print(f"測試 AUC: {_fmt_auc(report.test_auc)}")
    if report.best_checkpoint:
        print(f"檢查點: {report.best_checkpoint}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    """以檢查點評估"""
    stream = _load_stream(args.data)
    model = load_model(args.checkpoint, stream.edge_feature_dim)
    predictions = infer_scores(stream, model)
    ranking = predictions.for_mode(model.config.mode)
    labeled = stream.labels != LABEL_UNLABELED
    auc = safe_auc(ranking[labeled], stream.labels[labeled])

    if args.predictions:
        frame = pd.DataFrame(
            {
                "event": np.arange(len(stream)),
                "node": stream.src,
                "t": stream.t,
                "label": stream.labels,
                "anomaly_score": predictions.scores,
                "probability": predictions.probabilities,
            }
        )
        path = _write_frame(frame, args.predictions)
        print(f"預測輸出: {path}")
    if args.out:
        _write_json(
            args.out,
            {
                "auc": auc,
                "events": len(stream),
                "labeled_events": int(labeled.sum()),
                "mode": model.config.mode,
                "checkpoint": str(args.checkpoint),
            },
        )
    print(f"AUC ({model.config.mode}): {_fmt_auc(auc)}")
    return 0


def _print_rows(rows: list[ExperimentRow], key_header: str, out: str | None) -> None:
    print()
    print(format_table(rows, key_header))
    print()
    if out:
        _write_json(out, [row.to_dict() for row in rows])


def cmd_overall(args: argparse.Namespace) -> int:
    """多種子整體表現"""
    config = load_experiment_config(args)
    stream = _load_stream(args.data)
    report = run_overall(stream, config, seeds=args.seeds, jobs=args.jobs)
    print(f"\nAUC: {report.auc:.4f} ± {report.auc_std:.4f}（{report.num_seeds} 個種子）")
    if args.out:
        _write_json(args.out, report.to_dict())
    return 0


def cmd_fewshot(args: argparse.Namespace) -> int:
    """標籤丟棄比例掃描"""
    config = load_experiment_config(args)
    stream = _load_stream(args.data)
    rows = run_fewshot(stream, config, p_values=args.p_values, seeds=args.seeds, jobs=args.jobs)
    _print_rows(rows, "p", args.out)
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    """消融實驗"""
    config = load_experiment_config(args)
    stream = _load_stream(args.data)
    rows = run_ablation(stream, config, seeds=args.seeds, jobs=args.jobs, drop_ratio=args.drop_ratio)
    _print_rows(rows, "variant", args.out)
    return 0


def cmd_export_embeddings(args: argparse.Namespace) -> int:
    """匯出每個事件來源節點在事件時間的表示"""
    stream = _load_stream(args.data)
    model = load_model(args.checkpoint, stream.edge_feature_dim)
    embeddings = embed_events(model, stream)
    frame = pd.DataFrame(embeddings, columns=[f"z{i}" for i in range(embeddings.shape[1])])
    frame.insert(0, "t", stream.t)
    frame.insert(0, "node", stream.src)
    path = _write_frame(frame, args.out)
    print(f"已匯出 {len(frame)} 筆表示（維度 {embeddings.shape[1]}）: {path}")
    return 0


def cmd_describe(args: argparse.Namespace) -> int:
    """顯示資料集統計"""
    profile = describe_stream(_load_stream(args.data))
    print("\n資料集統計:")
    print("-" * 40)
    print(f"  節點數: {profile.num_nodes}（使用者 {profile.num_users}、物品 {profile.num_items}）")
    print(f"  事件數: {profile.num_events}")
    print(f"  邊特徵維度: {profile.edge_feature_dim}")
    print(f"  已標註事件: {profile.labeled_events}")
    print(f"  異常事件: {profile.anomalous_events}（{profile.anomaly_ratio:.2%}）")
    print(f"  時間跨度: {profile.time_span_seconds / SECONDS_PER_DAY:.2f} 天")
    print()
    if args.out:
        _write_json(args.out, profile.to_dict())
    return 0


def cmd_config(args: argparse.Namespace) -> int:
    """顯示、驗證或匯出設定"""
    manager = ConfigManager(args.config)
    if args.validate:
        errors = manager.validate_config()
        if errors:
            for key, messages in errors.items():
                print(f"  {key}: {', '.join(messages)}")
            return 1
        print("設定有效")
    elif args.export:
        path = manager.export_config(args.export)
        print(f"已匯出設定: {path}")
    else:
        print("\n目前設定:")
        print("-" * 40)
        for key, value in manager.config.items():
            print(f"  {key}: {value}")
        print()
    return 0


def cmd_version() -> int:
    """顯示版本資訊"""
    print(f"SAD Dynamic Graph Detector v{get_app_version()}")
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "eval": cmd_eval,
    "overall": cmd_overall,
    "fewshot": cmd_fewshot,
    "ablate": cmd_ablate,
    "export-embeddings": cmd_export_embeddings,
    "describe": cmd_describe,
    "config": cmd_config,
}


def main(argv: list[str] | None = None) -> int:
    """CLI 主程式入口"""
    parser = create_parser()
    args = parser.parse_args(argv)

    if args.command is None:
        parser.print_help()
        return 0
    if args.command == "version":
        return cmd_version()

    configure_logging(args)
    try:
        return COMMANDS[args.command](args)
    except AppError as e:
        logger.error(format_exception(e))
        return 1
    except (ValueError, OSError) as e:
        logger.error(format_exception(ValidationError(str(e))))
        return 1


if __name__ == "__main__":
    sys.exit(main())
