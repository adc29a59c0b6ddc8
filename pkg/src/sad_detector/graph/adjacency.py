"""時間鄰接索引與子圖取樣

`TemporalAdjacency` 以 CSR 版面儲存每個節點依時間排序的
(鄰居, 事件編號, 時間) 清單；每個事件同時出現在 src 與 dst 的清單中。
查詢「嚴格早於 t」的鄰居只需一次二分搜尋。
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from sad_detector.graph.events import EventStream
from sad_detector.utils.errors import ValidationError

logger = logging.getLogger(__name__)

SAMPLING_RECENT = "recent"
SAMPLING_UNIFORM = "uniform"
SAMPLING_STRATEGIES = (SAMPLING_RECENT, SAMPLING_UNIFORM)


class Neighbor(NamedTuple):
    """一筆時間鄰居"""

    node: int
    event: int
    t: float


@dataclass(frozen=True, eq=False)
class TemporalAdjacency:
    """每節點依時間排序的事件索引（CSR）"""

    offsets: np.ndarray
    neighbors: np.ndarray
    events: np.ndarray
    times: np.ndarray
    features: np.ndarray

    @classmethod
    def build(cls, stream: EventStream) -> TemporalAdjacency:
        m = len(stream)
        owners = np.concatenate([stream.src, stream.dst])
        others = np.concatenate([stream.dst, stream.src])
        event_ids = np.concatenate([np.arange(m), np.arange(m)])
        times = np.concatenate([stream.t, stream.t])

        order = np.lexsort((event_ids, times, owners))
        counts = np.bincount(owners, minlength=stream.num_nodes)
        offsets = np.zeros(stream.num_nodes + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])

        adjacency = cls(
            offsets=offsets,
            neighbors=others[order].astype(np.int64),
            events=event_ids[order].astype(np.int64),
            times=times[order].astype(np.float64),
            features=stream.features,
        )
        for array in (adjacency.offsets, adjacency.neighbors, adjacency.events, adjacency.times):
            array.setflags(write=False)
        logger.debug(f"已建立時間鄰接索引: {stream.num_nodes} 個節點、{m} 個事件")
        return adjacency

    @property
    def num_nodes(self) -> int:
        return len(self.offsets) - 1

    @property
    def edge_feature_dim(self) -> int:
        return int(self.features.shape[1])

    def history(self, node: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """節點的完整 (鄰居, 事件, 時間) 清單，依時間遞增"""
        if not 0 <= node < self.num_nodes:
            raise ValidationError(f"節點編號 {node} 超出範圍 [0, {self.num_nodes})")
        start, end = self.offsets[node], self.offsets[node + 1]
        return self.neighbors[start:end], self.events[start:end], self.times[start:end]

    def before(
        self,
        node: int,
        t: float,
        k: int,
        sampling: str = SAMPLING_RECENT,
        rng: np.random.Generator | None = None,
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """最多 k 筆嚴格早於 t 的鄰居陣列，依時間由新到舊"""
        neighbors, events, times = self.history(node)
        cut = int(np.searchsorted(times, t, side="left"))
        if sampling == SAMPLING_RECENT or cut <= k:
            chosen = np.arange(max(0, cut - k), cut)
        elif sampling == SAMPLING_UNIFORM:
            if rng is None:
                raise ValidationError("均勻取樣需要提供亂數產生器")
            chosen = np.sort(rng.choice(cut, size=k, replace=False))
        else:
            raise ValidationError(f"未知的鄰居取樣策略: {sampling}")
        # 同時間戳保持索引順序，反轉後由新到舊
        chosen = chosen[::-1]
        return neighbors[chosen], events[chosen], times[chosen]


def temporal_neighbors(
    adj: TemporalAdjacency,
    node: int,
    t: float,
    k: int,
    sampling: str = SAMPLING_RECENT,
    rng: np.random.Generator | None = None,
) -> list[Neighbor]:
    """回傳最多 k 個嚴格早於 t 的鄰居，最新的在前

    參數:
        adj: 時間鄰接索引
        node: 查詢節點
        t: 查詢時間（結果時間一律 < t）
        k: 最多回傳數量
        sampling: "recent"（最近 k 筆）或 "uniform"（自歷史中均勻抽 k 筆）
        rng: 均勻取樣使用的亂數產生器
    """
    if k < 1:
        raise ValidationError(f"k 必須至少為 1，目前為 {k}")
    neighbors, events, times = adj.before(node, t, k, sampling, rng)
    return [Neighbor(int(n), int(e), float(s)) for n, e, s in zip(neighbors, events, times, strict=True)]


# ─── 計算樹 ────────────────────────────────────────────────


@dataclass(frozen=True)
class TreeEntry:
    """計算樹中的一個節點"""

    node: int
    time: float
    event: int
    features: tuple[float, ...]
    delta_t: float
    parent: int


@dataclass(frozen=True, eq=False)
class TreeLayer:
    """計算樹的一層；同一父節點的子節點在陣列中相鄰

    參數:
        nodes: 節點編號
        times: 查詢時間（根為查詢時間，其餘為該互動事件時間）
        events: 事件編號（根為 -1）
        delta_t: 與父節點的時間差（根為 0）
        parents: 父節點在上一層的位置（根為 -1）
        features: 邊特徵（根為零向量）
    """

    nodes: np.ndarray
    times: np.ndarray
    events: np.ndarray
    delta_t: np.ndarray
    parents: np.ndarray
    features: np.ndarray

    def __len__(self) -> int:
        return len(self.nodes)

    def entries(self) -> list[TreeEntry]:
        return [
            TreeEntry(
                node=int(self.nodes[i]),
                time=float(self.times[i]),
                event=int(self.events[i]),
                features=tuple(float(x) for x in self.features[i]),
                delta_t=float(self.delta_t[i]),
                parent=int(self.parents[i]),
            )
            for i in range(len(self))
        ]

    def child_index(self, num_parents: int, width: int) -> np.ndarray:
        """(num_parents, width) 的子節點位置矩陣，不足處填 -1"""
        index = np.full((num_parents, width), -1, dtype=np.int64)
        if len(self) == 0:
            return index
        counts = np.bincount(self.parents, minlength=num_parents)
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        slots = np.arange(len(self)) - starts[self.parents]
        index[self.parents, slots] = np.arange(len(self))
        return index


@dataclass(frozen=True, eq=False)
class ComputationTree:
    """分層計算樹；第 0 層為根（可同時容納多個根）"""

    layers: list[TreeLayer]
    per_hop: int

    @property
    def depth(self) -> int:
        return len(self.layers) - 1

    @property
    def num_roots(self) -> int:
        return len(self.layers[0])


def sample_subgraphs(
    adj: TemporalAdjacency,
    nodes: Sequence[int] | np.ndarray,
    times: Sequence[float] | np.ndarray,
    hops: int = 2,
    per_hop: int = 20,
    sampling: str = SAMPLING_RECENT,
    rng: np.random.Generator | None = None,
) -> ComputationTree:
    """為一批 (節點, 時間) 同時建立計算樹"""
    if hops < 1:
        raise ValidationError(f"hops 必須至少為 1，目前為 {hops}")
    if per_hop < 1:
        raise ValidationError(f"per_hop 必須至少為 1，目前為 {per_hop}")
    nodes = np.asarray(nodes, dtype=np.int64).reshape(-1)
    times = np.asarray(times, dtype=np.float64).reshape(-1)
    if nodes.shape != times.shape:
        raise ValidationError("節點與時間數量不一致")

    edge_dim = adj.edge_feature_dim
    root = TreeLayer(
        nodes=nodes,
        times=times,
        events=np.full(len(nodes), -1, dtype=np.int64),
        delta_t=np.zeros(len(nodes)),
        parents=np.full(len(nodes), -1, dtype=np.int64),
        features=np.zeros((len(nodes), edge_dim)),
    )
    layers = [root]
    for _ in range(hops):
        previous = layers[-1]
        child_nodes: list[np.ndarray] = []
        child_events: list[np.ndarray] = []
        child_times: list[np.ndarray] = []
        child_parents: list[np.ndarray] = []
        for position in range(len(previous)):
            found_nodes, found_events, found_times = adj.before(
                int(previous.nodes[position]), float(previous.times[position]), per_hop, sampling, rng
            )
            if len(found_nodes):
                child_nodes.append(found_nodes)
                child_events.append(found_events)
                child_times.append(found_times)
                child_parents.append(np.full(len(found_nodes), position, dtype=np.int64))
        if not child_nodes:
            break
        events = np.concatenate(child_events)
        parents = np.concatenate(child_parents)
        layer_times = np.concatenate(child_times)
        layers.append(
            TreeLayer(
                nodes=np.concatenate(child_nodes),
                times=layer_times,
                events=events,
                delta_t=previous.times[parents] - layer_times,
                parents=parents,
                features=np.asarray(adj.features[events], dtype=np.float64).reshape(len(events), edge_dim),
            )
        )
    return ComputationTree(layers=layers, per_hop=per_hop)


def sample_subgraph(
    adj: TemporalAdjacency,
    node: int,
    t: float,
    hops: int = 2,
    per_hop: int = 20,
    rng: np.random.Generator | None = None,
    sampling: str = SAMPLING_RECENT,
) -> ComputationTree:
    """以 (node, t) 為根建立分層計算樹

    第 h 層為第 h−1 層每個項目在其互動時間之前的最近 per_hop 個鄰居；
    沒有歷史的節點只有根一層。
    """
    return sample_subgraphs(adj, [node], [t], hops=hops, per_hop=per_hop, sampling=sampling, rng=rng)
