"""SAD 動態圖異常偵測器

連續時間動態圖上的半監督異常偵測：時間注意力編碼、時間衰減分數記憶庫、
少量標籤的偏差損失訓練，以及未標註樣本的偽標籤對比學習。
"""

from sad_detector.version import get_app_version

__version__ = get_app_version()
