"""可訓練網路

- TimeEncoder: φ(Δt)_i = cos(ω_i·Δt + b_i)
- TemporalAttentionEncoder: K 層多頭時間注意力，輸出節點表示 z
- AnomalyDetector: s = W_2·ReLU(W_1·z + b_1) + b_2
- ProjectionHead: z → 2 類 logits

每個網路只記錄參數名稱；前向計算時由呼叫端傳入參數對應，
因此同一份網路可以直接用於有限差分檢查或載入的檢查點。
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from sad_detector.core.config import ExperimentConfig
from sad_detector.graph.adjacency import ComputationTree, TreeLayer
from sad_detector.numeric import tensor as ops
from sad_detector.numeric.params import ParameterStore
from sad_detector.numeric.tensor import MASK_VALUE, Tensor
from sad_detector.utils.errors import ShapeError, ValidationError

logger = logging.getLogger(__name__)

Params = Mapping[str, Tensor]


def time_encode(delta_t: np.ndarray | float, omega: Tensor, phase: Tensor) -> Tensor:
    """函數式時間編碼；純量 Δt 回傳 (d_t,)，向量 Δt 回傳 (n, d_t)"""
    delta = np.asarray(delta_t, dtype=np.float64)
    if np.any(delta < 0):
        raise ValidationError(f"時間差不可為負數（最小值 {delta.min()}）")
    if delta.ndim == 0:
        return ops.cos(omega * float(delta) + phase)
    column = Tensor(delta.reshape(-1, 1))
    return ops.cos(column * omega.reshape(1, omega.size) + phase.reshape(1, phase.size))


def _check_input(z: Tensor, expected: int, what: str) -> None:
    if z.ndim not in (1, 2) or z.shape[-1] != expected:
        raise ShapeError(
            f"{what} 的輸入長度必須為 {expected}，目前形狀為 {z.shape}",
            details={"expected": expected, "shape": list(z.shape)},
        )


class TimeEncoder:
    """可學習頻率與相位的餘弦時間編碼"""

    def __init__(self, dim: int, prefix: str = "encoder.time"):
        if dim < 1:
            raise ValidationError("時間編碼維度必須為正整數")
        self.dim = dim
        self.prefix = prefix

    @property
    def omega_name(self) -> str:
        return f"{self.prefix}.omega"

    @property
    def phase_name(self) -> str:
        return f"{self.prefix}.phase"

    def init(self, store: ParameterStore) -> None:
        store.add(self.omega_name, 1.0 / 10 ** np.linspace(0, 9, self.dim))
        store.add(self.phase_name, np.zeros(self.dim))

    def __call__(self, params: Params, delta_t: np.ndarray | float) -> Tensor:
        return time_encode(delta_t, params[self.omega_name], params[self.phase_name])


@dataclass
class AttentionTrace:
    """某一層對根節點的注意力權重（除錯與測試用）"""

    layer: int
    weights: list[np.ndarray]


class TemporalAttentionEncoder:
    """多層多頭時間注意力編碼器

    第 k 層對計算樹第 l 層的每個項目:
        query = [h_i ‖ 0 ‖ φ(0)]，key/value = [h_j ‖ x_ij ‖ φ(Δt)]
        h_N = concat_heads(softmax(q·k/√d_h)·v)
        h_i^(k) = ReLU(W_c·[h_i ‖ h_N] + b_c)（最後一層不加 ReLU）
    沒有歷史的節點只注意一個全零項目。
    """

    def __init__(
        self,
        node_dim: int,
        edge_dim: int,
        time_dim: int = 32,
        embedding_dim: int = 128,
        num_layers: int = 2,
        num_heads: int = 2,
        prefix: str = "encoder",
    ):
        if embedding_dim % num_heads:
            raise ValidationError(f"embedding_dim={embedding_dim} 必須能被 num_heads={num_heads} 整除")
        self.node_dim = node_dim
        self.edge_dim = edge_dim
        self.embedding_dim = embedding_dim
        self.num_layers = num_layers
        self.num_heads = num_heads
        self.head_dim = embedding_dim // num_heads
        self.prefix = prefix
        self.time_encoder = TimeEncoder(time_dim, prefix=f"{prefix}.time")

    def _input_dim(self, layer: int) -> int:
        return self.node_dim if layer == 0 else self.embedding_dim

    def _name(self, layer: int, suffix: str) -> str:
        return f"{self.prefix}.layer{layer}.{suffix}"

    def init(self, store: ParameterStore, rng: np.random.Generator) -> None:
        self.time_encoder.init(store)
        for layer in range(self.num_layers):
            d_in = self._input_dim(layer)
            kv_dim = d_in + self.edge_dim + self.time_encoder.dim
            for head in range(self.num_heads):
                for matrix in ("Wq", "Wk", "Wv"):
                    store.add_weight(self._name(layer, f"head{head}.{matrix}"), kv_dim, self.head_dim, rng)
            store.add_weight(self._name(layer, "combine.W"), d_in + self.embedding_dim, self.embedding_dim, rng)
            store.add_bias(self._name(layer, "combine.b"), self.embedding_dim)

    def _initial_states(self, layer: TreeLayer | None, node_features: np.ndarray | None) -> Tensor:
        if layer is None:
            return ops.zeros(0, self.node_dim)
        if node_features is None:
            return ops.zeros(len(layer), self.node_dim)
        return Tensor(node_features[layer.nodes])

    def _attend(
        self,
        params: Params,
        layer: int,
        h_self: Tensor,
        h_children: Tensor,
        children: TreeLayer | None,
        per_hop: int,
        traces: list[np.ndarray] | None,
    ) -> Tensor:
        n = h_self.shape[0]
        if n == 0:
            return ops.zeros(0, self.embedding_dim)
        d_in = self._input_dim(layer)
        kv_dim = d_in + self.edge_dim + self.time_encoder.dim

        if children is not None and len(children):
            child_index = children.child_index(n, per_hop)
            kv_rows = ops.concat(
                [h_children, Tensor(children.features), self.time_encoder(params, children.delta_t)], axis=-1
            )
            kv_table = ops.concat([kv_rows, ops.zeros(1, kv_dim)], axis=0)
        else:
            child_index = np.full((n, per_hop), -1, dtype=np.int64)
            kv_table = ops.zeros(1, kv_dim)

        valid = child_index >= 0
        attendable = valid.copy()
        attendable[~valid.any(axis=1), 0] = True
        score_bias = Tensor(np.where(attendable, 0.0, MASK_VALUE))
        pad_row = kv_table.shape[0] - 1
        gathered = ops.gather_rows(kv_table, np.where(valid, child_index, pad_row))
        flat = ops.reshape(gathered, (n * per_hop, kv_dim))

        query_in = ops.concat(
            [h_self, ops.zeros(n, self.edge_dim), self.time_encoder(params, np.zeros(n))],
            axis=-1,
        )
        scale = 1.0 / math.sqrt(self.head_dim)
        heads = []
        for head in range(self.num_heads):
            q = query_in @ params[self._name(layer, f"head{head}.Wq")]
            k = ops.reshape(flat @ params[self._name(layer, f"head{head}.Wk")], (n, per_hop, self.head_dim))
            v = ops.reshape(flat @ params[self._name(layer, f"head{head}.Wv")], (n, per_hop, self.head_dim))
            scores = ops.tsum(k * ops.reshape(q, (n, 1, self.head_dim)), axis=-1) * scale + score_bias
            weights = ops.softmax(scores, axis=-1)
            if traces is not None:
                traces.append(weights.numpy())
            heads.append(ops.tsum(ops.reshape(weights, (n, per_hop, 1)) * v, axis=1))
        h_neighborhood = ops.concat(heads, axis=-1)

        combined = ops.concat([h_self, h_neighborhood], axis=-1) @ params[self._name(layer, "combine.W")]
        combined = combined + params[self._name(layer, "combine.b")]
        return combined if layer == self.num_layers - 1 else ops.relu(combined)

    def encode(
        self,
        params: Params,
        tree: ComputationTree,
        node_features: np.ndarray | None = None,
        trace: list[AttentionTrace] | None = None,
    ) -> Tensor:
        """編碼計算樹的所有根節點，回傳 (根數, embedding_dim)"""
        if node_features is not None and node_features.shape[1] != self.node_dim:
            raise ShapeError(f"節點特徵維度 {node_features.shape[1]} 與編碼器設定 {self.node_dim} 不符")
        levels = [tree.layers[l] if l < len(tree.layers) else None for l in range(self.num_layers + 1)]
        states = [self._initial_states(level, node_features) for level in levels]

        for layer in range(self.num_layers):
            layer_traces: list[np.ndarray] | None = [] if trace is not None else None
            states = [
                self._attend(params, layer, states[l], states[l + 1], levels[l + 1], tree.per_hop, layer_traces)
                if levels[l] is not None
                else ops.zeros(0, self.embedding_dim)
                for l in range(self.num_layers - layer)
            ]
            if trace is not None and layer_traces is not None:
                trace.append(AttentionTrace(layer=layer, weights=layer_traces))
        return states[0]


class AnomalyDetector:
    """兩層前饋網路，輸出無界的異常分數"""

    def __init__(self, input_dim: int = 128, hidden_dim: int = 64, prefix: str = "detector"):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.prefix = prefix

    def init(self, store: ParameterStore, rng: np.random.Generator) -> None:
        store.add_weight(f"{self.prefix}.W1", self.input_dim, self.hidden_dim, rng)
        store.add_bias(f"{self.prefix}.b1", self.hidden_dim)
        store.add_weight(f"{self.prefix}.W2", self.hidden_dim, 1, rng)
        store.add_bias(f"{self.prefix}.b2", 1)

    def __call__(self, params: Params, z: Tensor) -> Tensor:
        """z 為 (input_dim,) 時回傳純量，為 (n, input_dim) 時回傳 (n,)"""
        _check_input(z, self.input_dim, "異常偵測器")
        hidden = ops.relu(z @ params[f"{self.prefix}.W1"] + params[f"{self.prefix}.b1"])
        score = hidden @ params[f"{self.prefix}.W2"] + params[f"{self.prefix}.b2"]
        return ops.reshape(score, z.shape[:-1])


class ProjectionHead:
    """將節點表示投影為 2 類 logits 的 MLP"""

    def __init__(self, input_dim: int = 128, hidden_dim: int = 64, prefix: str = "projection"):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.prefix = prefix

    def init(self, store: ParameterStore, rng: np.random.Generator) -> None:
        store.add_weight(f"{self.prefix}.W1", self.input_dim, self.hidden_dim, rng)
        store.add_bias(f"{self.prefix}.b1", self.hidden_dim)
        store.add_weight(f"{self.prefix}.W2", self.hidden_dim, 2, rng)
        store.add_bias(f"{self.prefix}.b2", 2)

    def __call__(self, params: Params, z: Tensor) -> Tensor:
        _check_input(z, self.input_dim, "投影網路")
        hidden = ops.relu(z @ params[f"{self.prefix}.W1"] + params[f"{self.prefix}.b1"])
        return hidden @ params[f"{self.prefix}.W2"] + params[f"{self.prefix}.b2"]


def class_probability(logits: Tensor) -> np.ndarray:
    """softmax(logits)[..., 1]（不記錄梯度）"""
    data = logits.data
    shifted = data - data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return (e / e.sum(axis=-1, keepdims=True))[..., 1]


class SADModel:
    """編碼器、偵測器與投影網路的組合，共用一個參數儲存區

    參數名稱前綴:
        encoder.*、detector.*、projection.*
    """

    GROUPS = ("encoder", "detector", "projection")

    def __init__(self, config: ExperimentConfig, edge_feature_dim: int, seed: int | None = None):
        self.config = config
        self.edge_feature_dim = edge_feature_dim
        self.node_feature_dim = config.node_feature_dim or edge_feature_dim
        self.store = ParameterStore()
        rng = np.random.default_rng(config.seed if seed is None else seed)

        self.encoder = TemporalAttentionEncoder(
            node_dim=self.node_feature_dim,
            edge_dim=edge_feature_dim,
            time_dim=config.time_dim,
            embedding_dim=config.embedding_dim,
            num_layers=config.num_layers,
            num_heads=config.num_heads,
        )
        self.detector = AnomalyDetector(config.embedding_dim, config.detector_hidden)
        self.projection = ProjectionHead(config.embedding_dim, config.projection_hidden)
        self.encoder.init(self.store, rng)
        self.detector.init(self.store, rng)
        self.projection.init(self.store, rng)
        logger.debug(f"已初始化模型參數: {len(self.store)} 組，共 {self.num_parameters()} 個數值")

    def num_parameters(self) -> int:
        return sum(p.size for p in self.store.values())

    def group(self, name: str) -> dict[str, Tensor]:
        if name not in self.GROUPS:
            raise ValidationError(f"未知的參數群組: {name}")
        return self.store.subset(f"{name}.")

    def encode(self, tree: ComputationTree, params: Params | None = None) -> Tensor:
        return self.encoder.encode(self.store if params is None else params, tree)

    def detect(self, z: Tensor, params: Params | None = None) -> Tensor:
        return self.detector(self.store if params is None else params, z)

    def project(self, z: Tensor, params: Params | None = None) -> Tensor:
        return self.projection(self.store if params is None else params, z)
