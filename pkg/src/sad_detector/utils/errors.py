"""錯誤與例外類別

所有錯誤都繼承 AppError，攜帶數字錯誤碼與 details 字典，
CLI 以 AppError 統一捕捉並回傳結束碼 1。

錯誤碼：
    1000 AppError              基礎錯誤
    1100 ConfigError           設定檔或設定值錯誤
    1200 ShapeError            張量形狀不相容（訊息列出兩個形狀）
    1300 NumericError          輸入或輸出含 NaN/Inf
    1400 DataFormatError       事件 CSV 格式錯誤（details["line"] 為 1 起算行號）
    1500 FileError             檔案讀寫失敗
    1600 MemoryBankEmptyError  記憶庫為空（冷啟動）
    1700 TrainingError         空訓練集、損失非有限值等
    1800 CheckpointError       檢查點版本、毀損或維度不符
    1900 ValidationError       參數或前置條件不符

使用範例：
    >>> try:
    ...     raise DataFormatError("第 3 行欄位數不符", details={"line": 3})
    ... except AppError as e:
    ...     print(str(e))
    [1400] 第 3 行欄位數不符
"""

import json
from datetime import datetime
from typing import Any, ClassVar


class AppError(Exception):
    """應用程式基礎例外

    參數:
        message: 錯誤訊息
        error_code: 錯誤碼；未指定時使用類別的 code
        details: 供日誌與除錯使用的附加資訊
    """

    code: ClassVar[int] = 1000

    def __init__(self, message: str, error_code: int | None = None, details: dict[str, Any] | None = None):
        self.message = message
        self.error_code = self.code if error_code is None else error_code
        self.details = details or {}
        super().__init__(message)

    def __str__(self) -> str:
        return f"[{self.error_code}] {self.message}"

    def to_dict(self) -> dict[str, Any]:
        return {
            "error_code": self.error_code,
            "message": self.message,
            "details": self.details,
            "timestamp": datetime.now().isoformat(),
        }

    def to_json(self) -> str:
        """JSON 字串；無法序列化的 details 值以 str() 輸出"""
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2, default=str)


class _CodedError(AppError):
    """子類別只需設定 code，建構時以關鍵字傳入 details"""

    def __init__(self, message: str, details: dict[str, Any] | None = None):
        super().__init__(message, details=details)


class ConfigError(_CodedError):
    code = 1100


class ShapeError(_CodedError):
    """張量形狀不相容，訊息需同時列出兩個運算元的形狀"""

    code = 1200


class NumericError(_CodedError):
    code = 1300


class DataFormatError(_CodedError):
    code = 1400


class FileError(_CodedError):
    code = 1500


class MemoryBankEmptyError(_CodedError):
    """記憶庫為空，呼叫端應改用標準常態參考分數"""

    code = 1600


class TrainingError(_CodedError):
    code = 1700


class CheckpointError(_CodedError):
    code = 1800


class ValidationError(_CodedError):
    code = 1900
