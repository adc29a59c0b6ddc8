"""檢查點讀寫

二進位格式（小端序）：
    version: uint8
    count: uint32
    每個參數：
        name_len: uint16, name: UTF-8 bytes
        ndim: uint8, dims: uint32 × ndim
        data: float64 × prod(dims)
"""

import os
import struct
from collections.abc import Mapping
from pathlib import Path

import numpy as np

from sad_detector.utils.errors import CheckpointError, FileError
from sad_detector.utils.logging_config import setup_logger

logger = setup_logger(__name__)

CHECKPOINT_VERSION = 1


def save_checkpoint(path: str | Path, params: Mapping[str, np.ndarray]) -> Path:
    """寫入檢查點，回傳實際路徑"""
    path = Path(path)
    chunks: list[bytes] = [struct.pack("<BI", CHECKPOINT_VERSION, len(params))]
    for name, value in params.items():
        array = np.asarray(value, dtype="<f8")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}I", *array.shape))
        chunks.append(np.ascontiguousarray(array).tobytes())

    try:
        if path.parent and not path.parent.exists():
            os.makedirs(path.parent, exist_ok=True)
        path.write_bytes(b"".join(chunks))
    except OSError as e:
        raise FileError(f"無法寫入檢查點: {path}", details={"error": str(e)}) from e

    logger.debug(f"已寫入檢查點: {path} ({len(params)} 個參數)")
    return path


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    """讀取檢查點為名稱到陣列的字典"""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise FileError(f"無法讀取檢查點: {path}", details={"error": str(e)}) from e

    try:
        version, count = struct.unpack_from("<BI", raw, 0)
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"不支援的檢查點版本: {version}",
                details={"expected": CHECKPOINT_VERSION, "path": str(path)},
            )
        offset = struct.calcsize("<BI")
        params: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", raw, offset)
            offset += 2
            name = raw[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (ndim,) = struct.unpack_from("<B", raw, offset)
            offset += 1
            shape = struct.unpack_from(f"<{ndim}I", raw, offset)
            offset += 4 * ndim
            size = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(raw, dtype="<f8", count=size, offset=offset)
            offset += 8 * size
            params[name] = data.astype(np.float64).reshape(shape)
    except (struct.error, ValueError, UnicodeDecodeError) as e:
        raise CheckpointError(f"檢查點檔案毀損: {path}", details={"error": str(e)}) from e

    if offset != len(raw):
        raise CheckpointError(f"檢查點檔案結尾有多餘資料: {path}")
    return params
