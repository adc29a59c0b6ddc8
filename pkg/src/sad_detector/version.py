"""集中管理套件版本資訊。"""

from importlib.metadata import PackageNotFoundError, version

PACKAGE_NAME = "sad-dynamic-graph-detector"
APP_VERSION = "0.4.0"


def get_app_version() -> str:
    """取得目前套件版本。

    優先使用已安裝套件的 distribution metadata；
    若目前直接從 source tree 執行且尚未安裝，則退回 repo 內建版本常數。
    """
    try:
        return version(PACKAGE_NAME)
    except PackageNotFoundError:
        return APP_VERSION
