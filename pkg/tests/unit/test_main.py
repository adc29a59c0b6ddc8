"""主程式入口測試。"""

import io
import sys

import pytest

from sad_detector import __main__ as entry


def test_main_exits_with_cli_return_code(mocker) -> None:
    """main 應以 CLI 的回傳值結束程式。"""
    mocker.patch("sad_detector.__main__.cli_main", return_value=1)
    mocker.patch("sad_detector.__main__._ensure_utf8_stdio")
    with pytest.raises(SystemExit) as exc_info:
        entry.main()
    assert exc_info.value.code == 1


def test_ensure_utf8_stdio_reconfigures_non_utf8_stream(monkeypatch) -> None:
    """非 UTF-8 的標準輸出應改為 UTF-8。"""
    stream = io.TextIOWrapper(io.BytesIO(), encoding="cp1252")
    monkeypatch.setattr(sys, "stdout", stream)
    entry._ensure_utf8_stdio()
    assert stream.encoding.lower().replace("-", "") == "utf8"


def test_ensure_utf8_stdio_skips_streams_without_reconfigure(monkeypatch) -> None:
    """沒有 reconfigure 的串流應保持不變。"""
    stream = io.StringIO()
    monkeypatch.setattr(sys, "stderr", stream)
    entry._ensure_utf8_stdio()
    assert sys.stderr is stream
