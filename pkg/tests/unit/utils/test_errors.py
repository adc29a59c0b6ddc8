"""測試 errors 模組"""

import json
from datetime import datetime

import pytest

from sad_detector.utils.errors import (
    AppError,
    CheckpointError,
    ConfigError,
    DataFormatError,
    FileError,
    MemoryBankEmptyError,
    NumericError,
    ShapeError,
    TrainingError,
    ValidationError,
)

ALL_ERRORS = [
    (ConfigError, 1100),
    (ShapeError, 1200),
    (NumericError, 1300),
    (DataFormatError, 1400),
    (FileError, 1500),
    (MemoryBankEmptyError, 1600),
    (TrainingError, 1700),
    (CheckpointError, 1800),
    (ValidationError, 1900),
]


class TestAppError:
    """測試 AppError 基礎異常類"""

    def test_app_error_basic(self):
        """測試基本的錯誤建立與訊息"""
        error = AppError("Test error message")
        assert str(error) == "[1000] Test error message"
        assert error.message == "Test error message"
        assert error.error_code == 1000
        assert error.details == {}

    def test_app_error_with_code(self):
        """測試自定義錯誤代碼"""
        error = AppError("Custom error", error_code=9999)
        assert str(error) == "[9999] Custom error"

    def test_app_error_to_dict(self):
        """測試錯誤轉換為字典格式"""
        error = AppError("Test error", error_code=1234, details={"key": "value"})
        error_dict = error.to_dict()

        assert error_dict["error_code"] == 1234
        assert error_dict["message"] == "Test error"
        assert error_dict["details"] == {"key": "value"}
        # 驗證時間戳格式
        datetime.fromisoformat(error_dict["timestamp"])


class TestSpecificErrors:
    """測試特定錯誤類別"""

    @pytest.mark.parametrize(("error_type", "code"), ALL_ERRORS)
    def test_error_codes(self, error_type, code):
        """測試每個錯誤類別的錯誤碼與繼承關係"""
        error = error_type("訊息", details={"line": 3})
        assert isinstance(error, AppError)
        assert error.error_code == code
        assert str(error) == f"[{code}] 訊息"
        assert error.details == {"line": 3}

    def test_catch_as_app_error(self):
        """測試可用 AppError 統一捕捉"""
        with pytest.raises(AppError) as exc_info:
            raise DataFormatError("第 3 行欄位數不符", details={"line": 3})
        assert exc_info.value.details["line"] == 3


class TestJSONSerialization:
    """測試 JSON 序列化功能"""

    def test_to_json_chinese_characters(self):
        """測試 JSON 序列化中文字符（ensure_ascii=False）"""
        error = CheckpointError("檢查點版本不符")
        json_str = error.to_json()
        assert "檢查點版本不符" in json_str
        assert json.loads(json_str)["error_code"] == 1800

    def test_to_json_non_serializable_details(self):
        """測試無法直接序列化的 details 以字串輸出"""
        error = TrainingError("損失非有限值", details={"path": object()})
        data = json.loads(error.to_json())
        assert data["details"]["path"].startswith("<object")

    def test_to_json_formatting(self):
        """測試 JSON 格式化（縮排）"""
        assert len(AppError("Test").to_json().split("\n")) > 1
