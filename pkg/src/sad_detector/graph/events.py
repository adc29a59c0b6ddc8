"""事件流資料模型與 CSV 讀寫

動態圖以時間排序的互動事件序列表示。為了讓鄰居索引與批次訓練
直接操作 numpy 陣列，`EventStream` 以欄位式（columnar）方式儲存事件，
需要逐筆存取時再組成 `Event`。

CSV 格式（JODIE 版面）:
    user_id, item_id, timestamp, state_label, 特徵1, 特徵2, ...
第一行為標題列（內容不檢查），其餘每行欄位數必須一致。
"""

from __future__ import annotations

import io
import logging
import math
from collections.abc import Iterator, Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from sad_detector.utils.errors import DataFormatError, FileError, ValidationError

logger = logging.getLogger(__name__)

LABEL_UNLABELED = -1
LABEL_NORMAL = 0
LABEL_ANOMALY = 1

FIXED_COLUMNS = ("user_id", "item_id", "timestamp", "state_label")

SECONDS_PER_HOUR = 3600.0


# ─── 資料結構 ───────────────────────────────────────────────


@dataclass(frozen=True)
class Event:
    """單一時間戳互動事件"""

    src: int
    dst: int
    t: float
    features: tuple[float, ...]
    label: int = LABEL_NORMAL


@dataclass(frozen=True, eq=False)
class EventStream:
    """依時間非遞減排序的事件流

    參數:
        src, dst: 節點編號陣列（int64）
        t: 時間戳陣列（float64，秒）
        features: (事件數, edge_feature_dim) 的邊特徵矩陣
        labels: 標籤陣列，取值 {-1, 0, 1}
        num_nodes: 節點總數
        num_users: 使用者節點數（二部圖中物品編號的位移量）
    """

    src: np.ndarray
    dst: np.ndarray
    t: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    num_nodes: int
    num_users: int = 0

    def __post_init__(self) -> None:
        src = np.asarray(self.src, dtype=np.int64).reshape(-1)
        dst = np.asarray(self.dst, dtype=np.int64).reshape(-1)
        t = np.asarray(self.t, dtype=np.float64).reshape(-1)
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        features = np.asarray(self.features, dtype=np.float64)
        m = len(t)
        if features.ndim != 2 or features.shape[0] != m:
            raise ValidationError(f"邊特徵矩陣形狀 {features.shape} 與事件數 {m} 不符")
        if not (len(src) == len(dst) == len(labels) == m):
            raise ValidationError("事件欄位長度不一致")
        if m:
            if not np.all(np.isfinite(t)) or t.min() < 0:
                raise ValidationError("時間戳必須為非負有限值")
            if np.any(np.diff(t) < 0):
                raise ValidationError("事件必須依時間非遞減排序")
            if min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= self.num_nodes:
                raise ValidationError(f"節點編號必須介於 0 與 {self.num_nodes - 1} 之間")
            if not np.all(np.isin(labels, (LABEL_UNLABELED, LABEL_NORMAL, LABEL_ANOMALY))):
                raise ValidationError("標籤只能是 -1、0 或 1")
            if not np.all(np.isfinite(features)):
                raise ValidationError("邊特徵含有非有限值")
        for name, array in (("src", src), ("dst", dst), ("t", t), ("labels", labels), ("features", features)):
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @classmethod
    def from_events(
        cls,
        events: Sequence[Event],
        num_nodes: int,
        edge_feature_dim: int,
        num_users: int = 0,
    ) -> EventStream:
        """由 Event 序列建立事件流（會依時間穩定排序）"""
        events = sorted(events, key=lambda e: e.t)
        features = np.array([e.features for e in events], dtype=np.float64).reshape(len(events), edge_feature_dim)
        return cls(
            src=np.array([e.src for e in events], dtype=np.int64),
            dst=np.array([e.dst for e in events], dtype=np.int64),
            t=np.array([e.t for e in events], dtype=np.float64),
            features=features,
            labels=np.array([e.label for e in events], dtype=np.int64),
            num_nodes=num_nodes,
            num_users=num_users,
        )

    @property
    def edge_feature_dim(self) -> int:
        return int(self.features.shape[1])

    @property
    def events(self) -> list[Event]:
        return list(self)

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, index: int) -> Event:
        return Event(
            src=int(self.src[index]),
            dst=int(self.dst[index]),
            t=float(self.t[index]),
            features=tuple(float(x) for x in self.features[index]),
            label=int(self.labels[index]),
        )

    def __iter__(self) -> Iterator[Event]:
        for i in range(len(self)):
            yield self[i]

    def slice(self, start: int, stop: int) -> EventStream:
        """取出 [start, stop) 範圍的事件，節點空間不變"""
        return EventStream(
            src=self.src[start:stop],
            dst=self.dst[start:stop],
            t=self.t[start:stop],
            features=self.features[start:stop],
            labels=self.labels[start:stop],
            num_nodes=self.num_nodes,
            num_users=self.num_users,
        )

    def with_labels(self, labels: np.ndarray) -> EventStream:
        """回傳替換標籤後的新事件流"""
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != self.labels.shape:
            raise ValidationError(f"標籤長度 {labels.shape} 與事件數 {len(self)} 不符")
        return EventStream(
            src=self.src,
            dst=self.dst,
            t=self.t,
            features=self.features,
            labels=labels,
            num_nodes=self.num_nodes,
            num_users=self.num_users,
        )

    def labeled_mask(self) -> np.ndarray:
        return self.labels != LABEL_UNLABELED


def concat_streams(streams: Sequence[EventStream]) -> EventStream:
    """依序串接共用同一節點空間的事件流"""
    if not streams:
        raise ValidationError("至少需要一個事件流")
    first = streams[0]
    for other in streams[1:]:
        if other.num_nodes != first.num_nodes or other.edge_feature_dim != first.edge_feature_dim:
            raise ValidationError("事件流的節點空間或特徵維度不一致")
    return EventStream(
        src=np.concatenate([s.src for s in streams]),
        dst=np.concatenate([s.dst for s in streams]),
        t=np.concatenate([s.t for s in streams]),
        features=np.concatenate([s.features for s in streams], axis=0),
        labels=np.concatenate([s.labels for s in streams]),
        num_nodes=first.num_nodes,
        num_users=first.num_users,
    )


# ─── CSV 讀寫 ───────────────────────────────────────────────


def _read_data_lines(path: Path) -> tuple[list[str], list[int]]:
    """讀取資料列（跳過標題與空行），同時回傳每列在檔案中的行號（從 1 起算）"""
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise FileError(f"找不到資料檔: {path}") from e
    except (OSError, UnicodeDecodeError) as e:
        raise FileError(f"無法讀取資料檔: {path}", details={"error": str(e)}) from e

    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise DataFormatError(f"資料檔缺少標題列: {path}", details={"line": 1})

    rows: list[str] = []
    line_numbers: list[int] = []
    for number, line in enumerate(lines[1:], start=2):
        if line.strip():
            rows.append(line)
            line_numbers.append(number)
    return rows, line_numbers


def ingest_csv(path: str | Path) -> EventStream:
    """讀取 JODIE 版面的互動 CSV

    使用者與物品編號映射到同一個連續節點空間（物品位移使用者數量），
    事件依時間穩定排序；state_label 直接成為事件標籤（0 或 1）。

    參數:
        path: CSV 檔案路徑

    回傳:
        EventStream

    例外:
        DataFormatError: 欄位數不一致、數字無法解析、負時間戳或標籤不合法，
            details["line"] 為檔案中的行號
    """
    path = Path(path)
    rows, line_numbers = _read_data_lines(path)
    if not rows:
        raise DataFormatError(f"資料檔沒有任何事件: {path}")

    widths = np.array([row.count(",") + 1 for row in rows])
    expected = int(widths[0])
    if expected < len(FIXED_COLUMNS) + 1:
        raise DataFormatError(
            f"第 {line_numbers[0]} 行欄位不足: 需要 {len(FIXED_COLUMNS)} 個固定欄位與至少 1 個特徵",
            details={"line": line_numbers[0], "fields": expected},
        )
    ragged = np.flatnonzero(widths != expected)
    if ragged.size:
        bad = int(ragged[0])
        raise DataFormatError(
            f"第 {line_numbers[bad]} 行欄位數為 {widths[bad]}，預期 {expected}",
            details={"line": line_numbers[bad], "fields": int(widths[bad]), "expected": expected},
        )

    frame = pd.read_csv(
        io.StringIO("\n".join(rows)),
        header=None,
        dtype=str,
        keep_default_na=False,
        skipinitialspace=True,
    )
    numeric = frame.apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    values = numeric.to_numpy(dtype=np.float64)

    invalid = ~np.isfinite(values)
    if invalid.any():
        row, col = (int(x) for x in np.argwhere(invalid)[0])
        raise DataFormatError(
            f"第 {line_numbers[row]} 行第 {col + 1} 欄無法解析為數字: {frame.iat[row, col]!r}",
            details={"line": line_numbers[row], "column": col + 1},
        )

    timestamps = values[:, 2]
    negative = np.flatnonzero(timestamps < 0)
    if negative.size:
        row = int(negative[0])
        raise DataFormatError(
            f"第 {line_numbers[row]} 行時間戳為負數: {timestamps[row]}",
            details={"line": line_numbers[row]},
        )

    raw_labels = values[:, 3]
    bad_labels = np.flatnonzero(~np.isin(raw_labels, (LABEL_NORMAL, LABEL_ANOMALY)))
    if bad_labels.size:
        row = int(bad_labels[0])
        raise DataFormatError(
            f"第 {line_numbers[row]} 行 state_label 必須為 0 或 1，目前為 {raw_labels[row]}",
            details={"line": line_numbers[row]},
        )

    users, src = np.unique(values[:, 0], return_inverse=True)
    items, item_index = np.unique(values[:, 1], return_inverse=True)
    num_users = len(users)
    dst = item_index + num_users

    order = np.argsort(timestamps, kind="mergesort")
    stream = EventStream(
        src=src.reshape(-1)[order],
        dst=dst.reshape(-1)[order],
        t=timestamps[order],
        features=values[order, len(FIXED_COLUMNS) :],
        labels=raw_labels[order].astype(np.int64),
        num_nodes=num_users + len(items),
        num_users=num_users,
    )
    logger.info(
        f"已讀取 {path.name}: {len(stream)} 個事件、{num_users} 個使用者、{len(items)} 個物品、"
        f"特徵維度 {stream.edge_feature_dim}"
    )
    return stream


def write_csv(stream: EventStream, path: str | Path) -> Path:
    """以 JODIE 版面寫出事件流（物品編號扣除使用者位移）

    未標註事件（-1）無法以 state_label 表示，會被拒絕。
    """
    if np.any(stream.labels == LABEL_UNLABELED):
        raise ValidationError("事件流含有未標註事件，無法寫成 state_label 欄位")
    path = Path(path)
    frame = pd.DataFrame(
        {
            "user_id": stream.src,
            "item_id": stream.dst - stream.num_users,
            "timestamp": stream.t,
            "state_label": stream.labels,
        }
    )
    feature_columns = [f"f{i}" for i in range(stream.edge_feature_dim)]
    frame = pd.concat([frame, pd.DataFrame(stream.features, columns=feature_columns)], axis=1)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, encoding="utf-8")
    except OSError as e:
        raise FileError(f"無法寫入資料檔: {path}", details={"error": str(e)}) from e
    logger.info(f"已寫出 {len(stream)} 個事件至 {path}")
    return path


# ─── 切分與標籤轉換 ─────────────────────────────────────────


def chronological_split(
    stream: EventStream,
    fractions: Sequence[float] = (0.70, 0.15, 0.15),
) -> tuple[EventStream, EventStream, EventStream]:
    """依事件順序切分為訓練/驗證/測試集

    邊界為 floor(f_train·m) 與 floor((f_train + f_val)·m)。
    """
    if len(stream) == 0:
        raise ValidationError("無法切分空的事件流")
    if len(fractions) != 3 or any(f < 0 for f in fractions) or not math.isclose(sum(fractions), 1.0, abs_tol=1e-9):
        raise ValidationError(f"切分比例必須是三個總和為 1 的非負數，目前為 {tuple(fractions)}")

    m = len(stream)
    first = math.floor(fractions[0] * m + 1e-9)
    second = math.floor((fractions[0] + fractions[1]) * m + 1e-9)
    return stream.slice(0, first), stream.slice(first, second), stream.slice(second, m)


def drop_labels(stream: EventStream, p: float, seed: int) -> EventStream:
    """將 floor(p·L) 個已標註事件改為未標註（-1）

    以種子洗牌決定被丟棄的事件；原事件流不變。
    """
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"丟棄比例必須介於 0 與 1 之間，目前為 {p}")
    labeled = np.flatnonzero(stream.labeled_mask())
    count = math.floor(p * len(labeled) + 1e-9)
    if count == 0:
        return stream
    rng = np.random.default_rng(seed)
    chosen = rng.permutation(labeled)[:count]
    labels = stream.labels.copy()
    labels[chosen] = LABEL_UNLABELED
    logger.debug(f"丟棄 {count}/{len(labeled)} 個標籤 (p={p}, seed={seed})")
    return stream.with_labels(labels)


# ─── 資料集統計 ─────────────────────────────────────────────


@dataclass
class StreamProfile:
    """事件流統計摘要"""

    num_nodes: int
    num_users: int
    num_items: int
    num_events: int
    edge_feature_dim: int
    labeled_events: int
    anomalous_events: int
    anomaly_ratio: float
    time_span_seconds: float
    hourly_events: list[int] = field(default_factory=list)
    hourly_anomalies: list[int] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def describe_stream(stream: EventStream) -> StreamProfile:
    """計算節點/事件/標籤統計與 24 小時分佈"""
    labeled = int(np.count_nonzero(stream.labeled_mask()))
    anomalous = int(np.count_nonzero(stream.labels == LABEL_ANOMALY))
    hours = (np.floor(stream.t / SECONDS_PER_HOUR) % 24).astype(np.int64)
    hourly = np.bincount(hours, minlength=24)
    hourly_anomalies = np.bincount(hours[stream.labels == LABEL_ANOMALY], minlength=24)
    span = float(stream.t[-1] - stream.t[0]) if len(stream) else 0.0
    return StreamProfile(
        num_nodes=stream.num_nodes,
        num_users=stream.num_users,
        num_items=stream.num_nodes - stream.num_users,
        num_events=len(stream),
        edge_feature_dim=stream.edge_feature_dim,
        labeled_events=labeled,
        anomalous_events=anomalous,
        anomaly_ratio=anomalous / labeled if labeled else 0.0,
        time_span_seconds=span,
        hourly_events=[int(x) for x in hourly],
        hourly_anomalies=[int(x) for x in hourly_anomalies],
    )
