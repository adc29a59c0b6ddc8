"""動態圖模組

事件流、時間鄰接索引、計算樹取樣與合成資料產生器。
"""

from sad_detector.graph.adjacency import (
    SAMPLING_RECENT,
    SAMPLING_STRATEGIES,
    SAMPLING_UNIFORM,
    ComputationTree,
    Neighbor,
    TemporalAdjacency,
    TreeEntry,
    TreeLayer,
    sample_subgraph,
    sample_subgraphs,
    temporal_neighbors,
)
from sad_detector.graph.events import (
    LABEL_ANOMALY,
    LABEL_NORMAL,
    LABEL_UNLABELED,
    Event,
    EventStream,
    StreamProfile,
    chronological_split,
    concat_streams,
    describe_stream,
    drop_labels,
    ingest_csv,
    write_csv,
)
from sad_detector.graph.synth import SynthConfig, expected_anomaly_share, generate

__all__ = [
    "LABEL_ANOMALY",
    "LABEL_NORMAL",
    "LABEL_UNLABELED",
    "SAMPLING_RECENT",
    "SAMPLING_STRATEGIES",
    "SAMPLING_UNIFORM",
    "ComputationTree",
    "Event",
    "EventStream",
    "Neighbor",
    "StreamProfile",
    "SynthConfig",
    "TemporalAdjacency",
    "TreeEntry",
    "TreeLayer",
    "chronological_split",
    "concat_streams",
    "describe_stream",
    "drop_labels",
    "expected_anomaly_share",
    "generate",
    "ingest_csv",
    "sample_subgraph",
    "sample_subgraphs",
    "temporal_neighbors",
    "write_csv",
]
