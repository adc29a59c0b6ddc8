"""測試 adjacency 模組"""

import numpy as np
import pytest

from sad_detector.graph.adjacency import (
    SAMPLING_UNIFORM,
    Neighbor,
    TemporalAdjacency,
    sample_subgraph,
    sample_subgraphs,
    temporal_neighbors,
)
from sad_detector.graph.events import EventStream
from sad_detector.utils.errors import ValidationError


def _random_bipartite_stream(rng: np.random.Generator, m: int = 400, users: int = 12, items: int = 8) -> EventStream:
    """含大量同時間戳的隨機二部圖事件流"""
    t = np.sort(rng.integers(0, 60, size=m).astype(np.float64))
    return EventStream(
        src=rng.integers(users, size=m),
        dst=rng.integers(items, size=m) + users,
        t=t,
        features=rng.normal(size=(m, 3)),
        labels=np.zeros(m, dtype=np.int64),
        num_nodes=users + items,
        num_users=users,
    )


def _linear_scan(stream: EventStream, node: int, t: float, k: int) -> list[Neighbor]:
    """逐一掃描所有事件的鄰居查詢"""
    found = []
    for e in range(len(stream)):
        if stream.t[e] >= t:
            continue
        if stream.src[e] == node:
            found.append(Neighbor(int(stream.dst[e]), e, float(stream.t[e])))
        elif stream.dst[e] == node:
            found.append(Neighbor(int(stream.src[e]), e, float(stream.t[e])))
    found.sort(key=lambda n: (n.t, n.event), reverse=True)
    return found[:k]


class TestTemporalNeighbors:
    """測試時間鄰居查詢"""

    @pytest.fixture
    def adj(self, tiny_stream):
        """小事件流的鄰接索引"""
        return TemporalAdjacency.build(tiny_stream)

    def test_history_includes_both_endpoints(self, adj):
        """測試事件同時出現在 src 與 dst 的清單"""
        neighbors, events, times = adj.history(2)
        np.testing.assert_array_equal(events, [0, 1, 4, 5])
        np.testing.assert_array_equal(neighbors, [0, 1, 0, 1])
        np.testing.assert_array_equal(times, [1.0, 2.0, 5.0, 8.0])

    def test_most_recent_first(self, adj):
        """測試結果由新到舊"""
        assert temporal_neighbors(adj, 2, 5.0, 10) == [Neighbor(1, 1, 2.0), Neighbor(0, 0, 1.0)]
        assert temporal_neighbors(adj, 2, 100.0, 1) == [Neighbor(1, 5, 8.0)]

    def test_strictly_before_query_time(self, adj):
        """測試同時間戳的事件不可見"""
        assert temporal_neighbors(adj, 3, 3.0, 5) == []
        assert temporal_neighbors(adj, 3, 3.5, 5) == [Neighbor(1, 3, 3.0), Neighbor(0, 2, 3.0)]

    def test_invalid_arguments(self, adj):
        """測試 k 與節點範圍"""
        with pytest.raises(ValidationError):
            temporal_neighbors(adj, 0, 1.0, 0)
        with pytest.raises(ValidationError):
            temporal_neighbors(adj, 9, 1.0, 2)

    def test_matches_linear_scan_and_never_leaks(self, rng):
        """測試與線性掃描一致且不含 t' ≥ t 的事件（1000 次隨機查詢）"""
        stream = _random_bipartite_stream(rng)
        adj = TemporalAdjacency.build(stream)
        for _ in range(1000):
            node = int(rng.integers(stream.num_nodes))
            t = float(rng.integers(0, 62))
            k = int(rng.integers(1, 8))
            result = temporal_neighbors(adj, node, t, k)
            assert all(n.t < t for n in result)
            assert result == _linear_scan(stream, node, t, k)

    def test_uniform_sampling(self, rng):
        """測試均勻取樣仍嚴格早於 t 且需要亂數產生器"""
        stream = _random_bipartite_stream(rng)
        adj = TemporalAdjacency.build(stream)
        result = temporal_neighbors(adj, 0, 40.0, 3, sampling=SAMPLING_UNIFORM, rng=rng)
        assert len(result) == 3
        assert all(n.t < 40.0 for n in result)
        assert [n.t for n in result] == sorted((n.t for n in result), reverse=True)
        with pytest.raises(ValidationError):
            temporal_neighbors(adj, 0, 40.0, 3, sampling=SAMPLING_UNIFORM)
        with pytest.raises(ValidationError):
            temporal_neighbors(adj, 0, 40.0, 3, sampling="random")


class TestComputationTree:
    """測試計算樹取樣"""

    @pytest.fixture
    def adj(self, tiny_stream):
        """小事件流的鄰接索引"""
        return TemporalAdjacency.build(tiny_stream)

    def test_two_hop_layers(self, adj):
        """測試兩層鄰居的節點、時間差與父節點"""
        tree = sample_subgraph(adj, 2, 8.5, hops=2, per_hop=2)
        assert tree.depth == 2
        first, second = tree.layers[1], tree.layers[2]
        np.testing.assert_array_equal(first.nodes, [1, 0])
        np.testing.assert_allclose(first.delta_t, [0.5, 3.5])
        np.testing.assert_array_equal(second.nodes, [3, 2, 3, 2])
        np.testing.assert_array_equal(second.parents, [0, 0, 1, 1])
        np.testing.assert_array_equal(second.events, [3, 1, 2, 0])
        np.testing.assert_allclose(second.delta_t, [5.0, 6.0, 2.0, 4.0])

    def test_child_features_are_edge_features(self, adj, tiny_stream):
        """測試子節點帶有對應互動的邊特徵"""
        tree = sample_subgraph(adj, 2, 8.5, hops=1, per_hop=2)
        np.testing.assert_allclose(tree.layers[1].features, tiny_stream.features[[5, 4]])
        np.testing.assert_allclose(tree.layers[0].features, np.zeros((1, 2)))

    def test_layers_stop_when_empty(self, adj):
        """測試沒有更早鄰居時不再加深"""
        tree = sample_subgraph(adj, 0, 5.0, hops=2, per_hop=2)
        assert tree.depth == 1
        assert sample_subgraph(adj, 0, 1.0).depth == 0

    def test_child_index_padding(self, adj):
        """測試子節點位置矩陣不足處填 -1"""
        tree = sample_subgraph(adj, 3, 3.5, hops=1, per_hop=3)
        np.testing.assert_array_equal(tree.layers[1].child_index(1, 3), [[0, 1, -1]])
        full = sample_subgraph(adj, 2, 8.5, hops=2, per_hop=2)
        np.testing.assert_array_equal(full.layers[2].child_index(2, 2), [[0, 1], [2, 3]])

    def test_batched_roots(self, adj):
        """測試多個根共享一棵分層樹"""
        tree = sample_subgraphs(adj, [2, 0], [8.5, 5.0], hops=1, per_hop=2)
        assert tree.num_roots == 2
        np.testing.assert_array_equal(tree.layers[1].parents, [0, 0, 1, 1])
        entries = tree.layers[1].entries()
        assert entries[2].node == 3
        assert entries[2].parent == 1

    def test_children_always_earlier_than_parent(self, rng):
        """測試每層子節點時間嚴格早於父節點"""
        stream = _random_bipartite_stream(rng)
        adj = TemporalAdjacency.build(stream)
        tree = sample_subgraphs(adj, stream.src[-20:], stream.t[-20:], hops=2, per_hop=5)
        for parent_layer, layer in zip(tree.layers, tree.layers[1:], strict=False):
            assert np.all(layer.delta_t > 0)
            assert np.all(layer.times < parent_layer.times[layer.parents])

    def test_invalid_arguments(self, adj):
        """測試 hops、per_hop 與長度驗證"""
        with pytest.raises(ValidationError):
            sample_subgraphs(adj, [0], [1.0], hops=0)
        with pytest.raises(ValidationError):
            sample_subgraphs(adj, [0], [1.0], per_hop=0)
        with pytest.raises(ValidationError):
            sample_subgraphs(adj, [0, 1], [1.0])
