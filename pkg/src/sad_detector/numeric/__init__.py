"""數值核心模組

float64 張量、反向自動微分磁帶、Adam 最佳化器與檢查點格式。
"""

from sad_detector.numeric.checkpoint import CHECKPOINT_VERSION, load_checkpoint, save_checkpoint
from sad_detector.numeric.gradcheck import GradCheckResult, check_gradients
from sad_detector.numeric.optim import AdamState, adam_step
from sad_detector.numeric.params import ParameterStore
from sad_detector.numeric.tensor import EPS_CLAMP, MASK_VALUE, Tape, Tensor, as_tensor, backward

__all__ = [
    "CHECKPOINT_VERSION",
    "EPS_CLAMP",
    "MASK_VALUE",
    "AdamState",
    "GradCheckResult",
    "ParameterStore",
    "Tape",
    "Tensor",
    "adam_step",
    "as_tensor",
    "backward",
    "check_gradients",
    "load_checkpoint",
    "save_checkpoint",
]
