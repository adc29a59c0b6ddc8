"""訓練流程

依時間順序將訓練事件切成連續批次，每個批次:
    1. 以事件時間編碼來源節點 → z
    2. 偵測器產生異常分數 s
    3. 自記憶庫抽一次參考分數（不足 M_s 筆時使用標準常態）
    4. 計算偏差分數 dev
    5. 已標註成員的偏差損失
    6. 全批次的偽標籤對比損失（ablation = scl）
    7. downstream 模式加上投影網路的交叉熵
    8. 將標籤 0/−1 成員的 (s, t) 寫入記憶庫，然後執行 Adam 更新
每個 epoch 結束計算驗證 AUC，保留最佳 epoch 的參數。
"""

from __future__ import annotations

import json
import logging
import time
from collections.abc import Callable
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from sad_detector.core.config import MODE_DOWNSTREAM, ExperimentConfig
from sad_detector.core.memory_bank import MemoryBank, ReferenceScore, deviation
from sad_detector.evaluation.metrics import safe_auc
from sad_detector.graph.adjacency import TemporalAdjacency, sample_subgraphs
from sad_detector.graph.events import (
    LABEL_UNLABELED,
    EventStream,
    chronological_split,
    concat_streams,
    drop_labels,
)
from sad_detector.model.losses import combine, contrastive_loss, cross_entropy, deviation_loss
from sad_detector.model.networks import SADModel, class_probability
from sad_detector.numeric import tensor as ops
from sad_detector.numeric.checkpoint import load_checkpoint, save_checkpoint
from sad_detector.numeric.optim import AdamState, adam_step
from sad_detector.numeric.tensor import Tape, Tensor
from sad_detector.utils.errors import AppError, CheckpointError, FileError, NumericError, TrainingError
from sad_detector.utils.helpers import ProgressTracker, format_elapsed_time
from sad_detector.version import get_app_version

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "best.ckpt"
REPORT_NAME = "train_report.json"


# ─── 報告 ───────────────────────────────────────────────────


@dataclass
class EpochRecord:
    """單一 epoch 的損失分量平均與驗證 AUC"""

    epoch: int
    dev_loss: float
    scl_loss: float
    sup_loss: float
    total_loss: float
    val_auc: float | None
    bank_size: int
    seconds: float


@dataclass
class TrainReport:
    """訓練結果"""

    seed: int
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int | None = None
    best_checkpoint: str | None = None
    wall_clock_seconds: float = 0.0
    test_auc: float | None = None
    split_sizes: dict[str, int] = field(default_factory=dict)
    config: dict[str, Any] = field(default_factory=dict)

    @property
    def val_auc(self) -> list[float | None]:
        return [record.val_auc for record in self.epochs]

    @property
    def total_losses(self) -> list[float]:
        return [record.total_loss for record in self.epochs]

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(self.to_json(), encoding="utf-8")
        except OSError as e:
            raise FileError(f"無法寫入訓練報告: {path}", details={"error": str(e)}) from e
        return path


@dataclass
class Predictions:
    """逐事件的推論結果"""

    scores: np.ndarray
    probabilities: np.ndarray

    def __len__(self) -> int:
        return len(self.scores)

    def for_mode(self, mode: str) -> np.ndarray:
        """AUC 使用的分數：downstream 用類別 1 機率，anomaly 用原始異常分數"""
        return self.probabilities if mode == MODE_DOWNSTREAM else self.scores


@dataclass
class BatchLosses:
    dev: float
    scl: float
    sup: float
    total: float


# ─── 檢查點 ─────────────────────────────────────────────────


def _metadata_path(checkpoint: Path) -> Path:
    return checkpoint.with_name(checkpoint.name + ".json")


def save_model(model: SADModel, path: str | Path) -> Path:
    """寫入檢查點與其設定說明檔 (<檢查點>.json)"""
    path = save_checkpoint(path, model.store.as_arrays())
    metadata = {
        "version": get_app_version(),
        "edge_feature_dim": model.edge_feature_dim,
        "config": model.config.to_dict(),
    }
    _metadata_path(path).write_text(json.dumps(metadata, ensure_ascii=False, indent=2), encoding="utf-8")
    return path


def load_model(path: str | Path, edge_feature_dim: int | None = None) -> SADModel:
    """由檢查點重建模型；邊特徵維度不符時拋出 CheckpointError"""
    path = Path(path)
    meta_path = _metadata_path(path)
    try:
        metadata = json.loads(meta_path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise CheckpointError(f"找不到檢查點設定檔: {meta_path}") from e
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"無法讀取檢查點設定檔: {meta_path}", details={"error": str(e)}) from e

    stored_dim = int(metadata["edge_feature_dim"])
    if edge_feature_dim is not None and edge_feature_dim != stored_dim:
        raise CheckpointError(
            f"資料的邊特徵維度 {edge_feature_dim} 與檢查點 {stored_dim} 不符",
            details={"data": edge_feature_dim, "checkpoint": stored_dim},
        )
    config = ExperimentConfig.from_dict(metadata["config"])
    model = SADModel(config, stored_dim)
    model.store.load_arrays(load_checkpoint(path))
    return model


# ─── 訓練器 ─────────────────────────────────────────────────


class Trainer:
    """時間順序小批次訓練器

    參數:
        config: 實驗設定
        output_dir: 檢查點與報告的輸出目錄（None 時不寫檔）
        progress_callback: ProgressTracker 回調
    """

    def __init__(
        self,
        config: ExperimentConfig,
        output_dir: str | Path | None = None,
        progress_callback: Callable[..., Any] | None = None,
    ):
        errors = config.validate()
        if errors:
            summary = "; ".join(f"{k}: {', '.join(v)}" for k, v in errors.items())
            raise TrainingError(f"設定無效: {summary}", details={"errors": errors})
        self.config = config
        self.output_dir = Path(output_dir) if output_dir else None
        self.progress_callback = progress_callback
        self.rng = np.random.default_rng(config.seed)
        self.bank = MemoryBank(
            capacity=config.memory_size,
            sample_size=config.memory_sample_size,
            time_decay=config.uses_time_decay,
            normalized=config.normalized_reference,
        )
        self.model: SADModel | None = None
        self.adam = AdamState()

    # ─── 單一批次 ───

    def _reference(self, t: float) -> ReferenceScore:
        cfg = self.config
        if not cfg.uses_memory_bank or len(self.bank) < cfg.memory_sample_size:
            return ReferenceScore.standard_normal(t)
        return self.bank.reference(t, self.rng)

    def _batch_losses(
        self, model: SADModel, z: Tensor, labels: np.ndarray, t_ref: float
    ) -> tuple[Tensor, BatchLosses, np.ndarray | None, ReferenceScore | None]:
        cfg = self.config
        labeled = np.flatnonzero(labels != LABEL_UNLABELED)
        zero = Tensor(0.0)
        dev_loss: Tensor = zero
        scl_loss: Tensor = zero
        sup_loss: Tensor | None = None
        scores: np.ndarray | None = None
        ref: ReferenceScore | None = None

        if cfg.uses_detector:
            s = model.detect(z)
            scores = s.numpy()
            ref = self._reference(t_ref)
            dev = deviation(s, ref)
            if labeled.size:
                dev_loss = deviation_loss(ops.gather_rows(dev, labeled), labels[labeled], cfg.loss.margin)
            if cfg.uses_contrastive and z.shape[0] >= 2:
                scl_loss = contrastive_loss(
                    z,
                    dev.numpy(),
                    temperature=cfg.loss.temperature,
                    threshold=cfg.loss.group_threshold,
                    normalize=not cfg.raw_dot_product,
                )

        if cfg.mode == MODE_DOWNSTREAM:
            sup_loss = zero
            if labeled.size:
                z_sup = z if cfg.sup_reaches_encoder else z.detach()
                logits = model.project(ops.gather_rows(z_sup, labeled))
                sup_loss = cross_entropy(logits, labels[labeled])

        total = combine(dev_loss, scl_loss, sup_loss, cfg.loss, cfg.mode)
        losses = BatchLosses(
            dev=dev_loss.item(),
            scl=scl_loss.item(),
            sup=sup_loss.item() if sup_loss is not None else 0.0,
            total=total.item(),
        )
        return total, losses, scores, ref

    def _train_batch(
        self, model: SADModel, adj: TemporalAdjacency, batch: EventStream, epoch: int, index: int
    ) -> BatchLosses:
        cfg = self.config
        tree = sample_subgraphs(adj, batch.src, batch.t, cfg.hops, cfg.per_hop, cfg.sampling, self.rng)
        t_ref = float(batch.t[-1])
        try:
            with Tape() as tape:
                z = model.encode(tree)
                total, losses, scores, ref = self._batch_losses(model, z, batch.labels, t_ref)
        except NumericError as e:
            raise TrainingError(
                f"第 {epoch} 個 epoch 第 {index} 個批次出現非有限值",
                details={"epoch": epoch, "batch": index, "batch_size": len(batch), "cause": e.to_dict()},
            ) from e
        if not np.isfinite(losses.total):
            raise TrainingError(
                f"第 {epoch} 個 epoch 第 {index} 個批次的損失非有限值",
                details={"epoch": epoch, "batch": index, "losses": asdict(losses)},
            )

        if cfg.uses_memory_bank and scores is not None:
            self.bank.push_many(scores, batch.t, batch.labels)

        grads = tape.backward(total, model.store)
        updated, self.adam = adam_step(model.store, grads, self.adam, cfg.lr)
        model.store.update(updated)

        if ref is not None and scores is not None:
            logger.debug(
                f"epoch {epoch} batch {index}: loss={losses.total:.5f} dev={losses.dev:.5f} "
                f"scl={losses.scl:.5f} sup={losses.sup:.5f} μ_r={ref.mu_r:.4f} σ_r={ref.sigma_r:.4f} "
                f"s̄={scores.mean():.4f}"
            )
        return losses

    # ─── 推論 ───

    def predict(
        self, model: SADModel, adj: TemporalAdjacency, stream: EventStream, indices: np.ndarray | None = None
    ) -> Predictions:
        """對指定事件做前向計算；不更新記憶庫與參數"""
        return predict_events(model, adj, stream, indices, sampling_seed=self.config.seed)

    # ─── 主流程 ───

    def fit(self, stream: EventStream) -> TrainReport:
        """切分事件流並訓練

        訓練集依 config.drop_ratio 丟棄標籤；驗證與測試標籤不變。
        """
        cfg = self.config
        started = time.time()
        train_split, val_split, test_split = chronological_split(stream, cfg.split_fractions)
        if len(train_split) == 0:
            raise TrainingError("訓練集為空", details={"events": len(stream)})
        if cfg.drop_ratio > 0:
            train_split = drop_labels(train_split, cfg.drop_ratio, cfg.seed)
        # 訓練段為丟棄標籤後的版本，驗證與測試段保持原標籤
        working = concat_streams([train_split, val_split, test_split])

        n_train, n_val = len(train_split), len(val_split)
        val_indices = np.arange(n_train, n_train + n_val)
        test_indices = np.arange(n_train + n_val, len(working))

        adj = TemporalAdjacency.build(working)
        model = SADModel(cfg, working.edge_feature_dim)
        self.model = model
        report = TrainReport(
            seed=cfg.seed,
            split_sizes={"train": n_train, "val": n_val, "test": len(test_split)},
            config=cfg.to_dict(),
        )

        num_batches = -(-n_train // cfg.batch_size)
        tracker = ProgressTracker(
            total=cfg.epochs * num_batches, description="訓練", callback=self.progress_callback
        )
        tracker.start()
        logger.info(
            f"開始訓練: mode={cfg.mode} ablation={cfg.ablation} seed={cfg.seed} "
            f"訓練/驗證/測試 = {n_train}/{n_val}/{len(test_split)}，每 epoch {num_batches} 個批次"
        )

        best_auc: float | None = None
        best_params: dict[str, np.ndarray] | None = None
        stale_epochs = 0
        for epoch in range(1, cfg.epochs + 1):
            epoch_started = time.time()
            # 每個 epoch 從頭依時間重播，記憶庫隨之重置
            self.bank.clear()
            totals = np.zeros(4)
            for index in range(num_batches):
                batch = train_split.slice(index * cfg.batch_size, (index + 1) * cfg.batch_size)
                losses = self._train_batch(model, adj, batch, epoch, index)
                totals += (losses.dev, losses.scl, losses.sup, losses.total)
                tracker.increment()
            means = totals / num_batches

            val_auc = self._evaluate(model, adj, working, val_indices)
            record = EpochRecord(
                epoch=epoch,
                dev_loss=float(means[0]),
                scl_loss=float(means[1]),
                sup_loss=float(means[2]),
                total_loss=float(means[3]),
                val_auc=val_auc,
                bank_size=len(self.bank),
                seconds=time.time() - epoch_started,
            )
            report.epochs.append(record)
            logger.info(
                f"epoch {epoch}/{cfg.epochs}: loss={record.total_loss:.5f} "
                f"val_auc={'n/a' if val_auc is None else f'{val_auc:.4f}'} | {tracker.get_status_text()}"
            )
            logger.debug(f"記憶庫狀態: {self.bank.stats().to_dict()}")

            if val_auc is not None and (best_auc is None or val_auc > best_auc):
                best_auc, best_params, stale_epochs = val_auc, model.store.as_arrays(), 0
                report.best_epoch = epoch
            elif best_auc is not None:
                stale_epochs += 1
                if stale_epochs >= cfg.patience:
                    logger.info(f"驗證 AUC 已 {stale_epochs} 個 epoch 未改善，提前停止")
                    break

        if best_params is None:
            report.best_epoch = report.epochs[-1].epoch
        else:
            model.store.load_arrays(best_params)

        report.test_auc = self._evaluate(model, adj, working, test_indices)
        if self.output_dir is not None:
            checkpoint = save_model(model, self.output_dir / CHECKPOINT_NAME)
            report.best_checkpoint = str(checkpoint)
        report.wall_clock_seconds = time.time() - started
        tracker.complete()
        if self.output_dir is not None:
            report.save(self.output_dir / REPORT_NAME)
        logger.info(
            f"訓練完成: 最佳 epoch {report.best_epoch}，測試 AUC "
            f"{'n/a' if report.test_auc is None else f'{report.test_auc:.4f}'}，"
            f"耗時 {format_elapsed_time(report.wall_clock_seconds)}"
        )
        return report

    def _evaluate(
        self, model: SADModel, adj: TemporalAdjacency, stream: EventStream, indices: np.ndarray
    ) -> float | None:
        if indices.size == 0:
            return None
        labels = stream.labels[indices]
        labeled = labels != LABEL_UNLABELED
        if not labeled.any():
            return None
        predictions = self.predict(model, adj, stream, indices[labeled])
        return safe_auc(predictions.for_mode(self.config.mode), labels[labeled])


def predict_events(
    model: SADModel,
    adj: TemporalAdjacency,
    stream: EventStream,
    indices: np.ndarray | None = None,
    sampling_seed: int = 0,
) -> Predictions:
    """逐批計算指定事件來源節點的異常分數與類別 1 機率"""
    cfg = model.config
    if indices is None:
        indices = np.arange(len(stream))
    rng = np.random.default_rng(sampling_seed)
    scores = np.zeros(len(indices))
    probabilities = np.zeros(len(indices))
    for start in range(0, len(indices), cfg.batch_size):
        chosen = indices[start : start + cfg.batch_size]
        tree = sample_subgraphs(adj, stream.src[chosen], stream.t[chosen], cfg.hops, cfg.per_hop, cfg.sampling, rng)
        z = model.encode(tree)
        scores[start : start + len(chosen)] = model.detect(z).numpy()
        probabilities[start : start + len(chosen)] = class_probability(model.project(z))
    return Predictions(scores=scores, probabilities=probabilities)


def embed_events(model: SADModel, stream: EventStream, indices: np.ndarray | None = None) -> np.ndarray:
    """回傳事件來源節點在事件時間的表示，形狀 (事件數, embedding_dim)"""
    cfg = model.config
    adj = TemporalAdjacency.build(stream)
    if indices is None:
        indices = np.arange(len(stream))
    rng = np.random.default_rng(cfg.seed)
    blocks = []
    for start in range(0, len(indices), cfg.batch_size):
        chosen = indices[start : start + cfg.batch_size]
        tree = sample_subgraphs(adj, stream.src[chosen], stream.t[chosen], cfg.hops, cfg.per_hop, cfg.sampling, rng)
        blocks.append(model.encode(tree).numpy())
    return np.concatenate(blocks, axis=0) if blocks else np.zeros((0, cfg.embedding_dim))


def train(
    stream: EventStream,
    config: ExperimentConfig,
    output_dir: str | Path | None = None,
    progress_callback: Callable[..., Any] | None = None,
) -> TrainReport:
    """訓練並回傳 TrainReport"""
    return Trainer(config, output_dir=output_dir, progress_callback=progress_callback).fit(stream)


def infer_scores(stream: EventStream, checkpoint: str | Path | SADModel) -> Predictions:
    """以檢查點對事件流的每個事件做推論（不更新任何狀態）"""
    model = checkpoint if isinstance(checkpoint, SADModel) else load_model(checkpoint, stream.edge_feature_dim)
    if model.edge_feature_dim != stream.edge_feature_dim:
        raise CheckpointError(
            f"資料的邊特徵維度 {stream.edge_feature_dim} 與模型 {model.edge_feature_dim} 不符"
        )
    adj = TemporalAdjacency.build(stream)
    try:
        return predict_events(model, adj, stream, sampling_seed=model.config.seed)
    except AppError:
        raise
    except ValueError as e:
        raise CheckpointError(f"檢查點與資料不相容: {e}") from e


__all__ = [
    "BatchLosses",
    "EpochRecord",
    "Predictions",
    "TrainReport",
    "Trainer",
    "embed_events",
    "infer_scores",
    "load_model",
    "predict_events",
    "save_model",
    "train",
]
