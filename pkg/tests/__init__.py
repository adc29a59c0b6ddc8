"""sad-dynamic-graph-detector 測試套件

測試結構:
    - unit/: 各模組的單元測試（梯度檢查、記憶庫與損失的逐項公式比對等）
    - integration/: 完整流程與合成資料效果驗收（slow）
"""

from sad_detector.version import APP_VERSION

__version__ = APP_VERSION
