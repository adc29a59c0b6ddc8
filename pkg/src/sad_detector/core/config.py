"""實驗配置

`LossConfig` 與 `ExperimentConfig` 是訓練與評估使用的型別化設定；
`ConfigManager` 負責預設值、key=value 設定檔載入、點號路徑存取、驗證與匯出。

設定檔格式（以 python-dotenv 解析，允許註解與空行）:
    # 訓練
    mode=downstream
    epochs=5
    loss.margin=5.0
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime
from pathlib import Path
from typing import Any

from dotenv import dotenv_values

from sad_detector.utils.errors import ConfigError, FileError
from sad_detector.utils.logging_config import setup_logger
from sad_detector.version import get_app_version

logger = setup_logger(__name__)

CONFIG_ENV_VAR = "SAD_CONFIG"

MODE_ANOMALY = "anomaly"
MODE_DOWNSTREAM = "downstream"
MODES = (MODE_ANOMALY, MODE_DOWNSTREAM)

# 消融階梯（累加）：backbone ⊂ dev ⊂ mem ⊂ time ⊂ scl
ABLATIONS = ("backbone", "dev", "mem", "time", "scl")

_TRUE_VALUES = {"1", "true", "yes", "on"}
_FALSE_VALUES = {"0", "false", "no", "off"}


@dataclass
class LossConfig:
    """損失函數設定"""

    margin: float = 5.0
    temperature: float = 0.5
    group_threshold: float = 1.0
    alpha: float = 0.1
    beta: float = 0.01

    def validate(self) -> dict[str, list[str]]:
        errors: dict[str, list[str]] = {}
        if self.margin <= 0:
            errors["margin"] = ["邊界 m 必須為正數"]
        if self.temperature <= 0:
            errors["temperature"] = ["溫度 τ 必須為正數"]
        if self.group_threshold <= 0:
            errors["group_threshold"] = ["分組門檻必須為正數"]
        if self.alpha < 0:
            errors["alpha"] = ["α 不可為負數"]
        if self.beta < 0:
            errors["beta"] = ["β 不可為負數"]
        return errors


@dataclass
class ExperimentConfig:
    """完整的超參數與消融開關"""

    mode: str = MODE_DOWNSTREAM
    ablation: str = "scl"
    batch_size: int = 256
    lr: float = 0.0005
    epochs: int = 10
    seed: int = 0
    loss: LossConfig = field(default_factory=LossConfig)
    memory_size: int = 4000
    memory_sample_size: int = 1000
    hops: int = 2
    per_hop: int = 20
    drop_ratio: float = 0.0
    embedding_dim: int = 128
    num_layers: int = 2
    num_heads: int = 2
    time_dim: int = 32
    detector_hidden: int = 64
    projection_hidden: int = 64
    node_feature_dim: int | None = None
    sampling: str = "recent"
    normalized_reference: bool = False
    raw_dot_product: bool = False
    sup_to_encoder: bool = False
    patience: int = 5
    split_fractions: tuple[float, float, float] = (0.70, 0.15, 0.15)

    # ─── 消融階梯推導出的開關 ───

    @property
    def uses_detector(self) -> bool:
        return self.ablation != "backbone"

    @property
    def uses_memory_bank(self) -> bool:
        return self.ablation in ("mem", "time", "scl")

    @property
    def uses_time_decay(self) -> bool:
        return self.ablation in ("time", "scl")

    @property
    def uses_contrastive(self) -> bool:
        return self.ablation == "scl"

    @property
    def sup_reaches_encoder(self) -> bool:
        """backbone 只剩監督損失，必須訓練編碼器"""
        return self.sup_to_encoder or self.ablation == "backbone"

    def validate(self) -> dict[str, list[str]]:
        """回傳 {設定鍵: [錯誤訊息]}，空字典表示通過"""
        errors: dict[str, list[str]] = {}

        def add(key: str, message: str) -> None:
            errors.setdefault(key, []).append(message)

        if self.mode not in MODES:
            add("mode", f"無效的模式，有效選項: {', '.join(MODES)}")
        if self.ablation not in ABLATIONS:
            add("ablation", f"無效的消融設定，有效選項: {', '.join(ABLATIONS)}")
        if self.mode == MODE_ANOMALY and self.ablation == "backbone":
            add("ablation", "anomaly 模式下 backbone 沒有任何可訓練的損失")
        for key in ("batch_size", "epochs", "memory_size", "memory_sample_size", "hops", "per_hop"):
            if getattr(self, key) < 1:
                add(key, "必須為正整數")
        for key in ("embedding_dim", "num_layers", "num_heads", "time_dim", "detector_hidden", "projection_hidden"):
            if getattr(self, key) < 1:
                add(key, "必須為正整數")
        if self.num_heads >= 1 and self.embedding_dim % self.num_heads:
            add("embedding_dim", "必須能被 num_heads 整除")
        if self.node_feature_dim is not None and self.node_feature_dim < 1:
            add("node_feature_dim", "必須為正整數或留空")
        if self.lr <= 0:
            add("lr", "學習率必須為正數")
        if not 0.0 <= self.drop_ratio <= 1.0:
            add("drop_ratio", "必須介於 0 與 1 之間")
        if self.sampling not in ("recent", "uniform"):
            add("sampling", "有效選項: recent, uniform")
        if self.patience < 1:
            add("patience", "必須為正整數")
        if len(self.split_fractions) != 3 or abs(sum(self.split_fractions) - 1.0) > 1e-9:
            add("split_fractions", "必須是三個總和為 1 的比例")
        for key, messages in self.loss.validate().items():
            errors[f"loss.{key}"] = messages
        return errors

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["split_fractions"] = list(self.split_fractions)
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"未知的設定鍵: {', '.join(unknown)}")
        values = dict(data)
        loss = values.pop("loss", {})
        if isinstance(loss, dict):
            loss = LossConfig(**loss)
        if "split_fractions" in values:
            values["split_fractions"] = tuple(float(x) for x in values["split_fractions"])
        return cls(loss=loss, **values)

    def replace(self, **changes: Any) -> ExperimentConfig:
        """回傳套用變更後的新設定（支援 loss.* 點號鍵）"""
        data = self.to_dict()
        for key, value in changes.items():
            if key.startswith("loss."):
                data["loss"][key.split(".", 1)[1]] = value
            else:
                data[key] = value
        return ExperimentConfig.from_dict(data)


def _coerce(key: str, raw: str, default: Any) -> Any:
    """依預設值型別轉換設定檔中的字串值"""
    text = raw.strip()
    if isinstance(default, dict):
        raise ConfigError(f"設定 {key} 是區段名稱，請使用點號鍵指定其中的項目", details={"key": key})
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in _TRUE_VALUES:
                return True
            if lowered in _FALSE_VALUES:
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, (tuple, list)):
            return [float(x) for x in text.split(",") if x.strip()]
        if default is None:
            return None if text.lower() in ("", "none", "null") else int(text)
        return text
    except ValueError as e:
        raise ConfigError(f"設定 {key} 的值無法解析: {raw!r}", details={"key": key, "value": raw}) from e


class ConfigManager:
    """實驗配置管理器

    參數:
        config_path: key=value 設定檔；未指定時讀取環境變數 SAD_CONFIG
    """

    def __init__(self, config_path: str | Path | None = None):
        if config_path is None:
            env_path = os.environ.get(CONFIG_ENV_VAR, "").strip()
            config_path = env_path or None
        self.config_path = Path(config_path) if config_path else None
        self.default_config = ExperimentConfig().to_dict()
        self.config: dict[str, Any] = copy.deepcopy(self.default_config)
        if self.config_path is not None:
            self.load_config(self.config_path)
        logger.debug(f"配置管理器初始化完成: {self.config_path or '預設值'}")

    def load_config(self, path: str | Path) -> None:
        """載入 key=value 設定檔並合併到目前設定"""
        path = Path(path)
        if not path.exists():
            raise FileError(f"找不到設定檔: {path}")
        raw_values = dotenv_values(path, encoding="utf-8")
        loaded: dict[str, Any] = {}
        for key, raw in raw_values.items():
            default = self._lookup(self.default_config, key)
            if default is _MISSING:
                raise ConfigError(f"未知的設定鍵: {key}", details={"key": key, "path": str(path)})
            value = _coerce(key, raw or "", default)
            self._assign(loaded, key, value)
        self.config = self._merge_configs(self.config, loaded)
        logger.info(f"已載入設定檔: {path} ({len(raw_values)} 項)")

    @staticmethod
    def _merge_configs(default_config: dict[str, Any], loaded_config: dict[str, Any]) -> dict[str, Any]:
        """遞迴合併設定，載入值覆蓋預設值"""
        result = copy.deepcopy(default_config)

        def merge_dict(base: dict[str, Any], override: dict[str, Any]) -> None:
            for key, value in override.items():
                if key in base and isinstance(base[key], dict) and isinstance(value, dict):
                    merge_dict(base[key], value)
                else:
                    base[key] = value

        merge_dict(result, loaded_config)
        return result

    @staticmethod
    def _lookup(config: dict[str, Any], key: str) -> Any:
        value: Any = config
        for part in key.split("."):
            if not isinstance(value, dict) or part not in value:
                return _MISSING
            value = value[part]
        return value

    @staticmethod
    def _assign(config: dict[str, Any], key: str, value: Any) -> None:
        parts = key.split(".")
        parent = config
        for part in parts[:-1]:
            if part not in parent or not isinstance(parent[part], dict):
                parent[part] = {}
            parent = parent[part]
        parent[parts[-1]] = value

    def get_value(self, key: str, default: Any = None) -> Any:
        """取得設定值，支援點號路徑（如 "loss.margin"）"""
        value = self._lookup(self.config, key)
        return default if value is _MISSING else copy.deepcopy(value)

    def set_value(self, key: str, value: Any) -> None:
        """設定值；未知的鍵拋出 ConfigError"""
        if self._lookup(self.default_config, key) is _MISSING:
            raise ConfigError(f"未知的設定鍵: {key}", details={"key": key})
        self._assign(self.config, key, value)

    def apply_overrides(self, overrides: dict[str, Any]) -> None:
        """套用命令列參數（值為 None 的項目略過）"""
        for key, value in overrides.items():
            if value is not None:
                self.set_value(key, value)

    def to_experiment_config(self) -> ExperimentConfig:
        """轉成 ExperimentConfig；驗證失敗時拋出 ConfigError"""
        errors = self.validate_config()
        if errors:
            summary = "; ".join(f"{k}: {', '.join(v)}" for k, v in errors.items())
            raise ConfigError(f"設定驗證失敗: {summary}", details={"errors": errors})
        return ExperimentConfig.from_dict(copy.deepcopy(self.config))

    def validate_config(self) -> dict[str, list[str]]:
        """驗證設定，回傳 {設定鍵: [錯誤訊息]}"""
        try:
            experiment = ExperimentConfig.from_dict(copy.deepcopy(self.config))
        except (TypeError, ConfigError) as e:
            return {"config": [str(e)]}
        return experiment.validate()

    def export_config(self, export_path: str | Path) -> Path:
        """以 JSON 匯出設定（含 metadata）"""
        export_path = Path(export_path)
        export_data = {
            "metadata": {
                "exported_at": datetime.now().isoformat(),
                "source": str(self.config_path) if self.config_path else None,
                "version": get_app_version(),
            },
            "config": self.config,
        }
        try:
            export_path.parent.mkdir(parents=True, exist_ok=True)
            export_path.write_text(json.dumps(export_data, ensure_ascii=False, indent=4), encoding="utf-8")
        except OSError as e:
            raise FileError(f"匯出設定失敗: {export_path}", details={"error": str(e)}) from e
        logger.info(f"已匯出設定至: {export_path}")
        return export_path


class _Missing:
    def __repr__(self) -> str:
        return "<missing>"


_MISSING = _Missing()
