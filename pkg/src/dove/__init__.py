"""Cross-modal embedding engine.

Text is enhanced by a dual-branch gated self-attention mechanism over a
bidirectional GRU; visual multiscale and region features are fused and
then guide the text embedding per image-text pair.  Training uses a
dual triplet-ranking objective over in-batch negatives, with Adam and a
stepped learning-rate schedule.  Everything is float64, deterministic,
and sized for desk-scale experiments on synthetic or ingested feature
banks.
"""

__version__ = "0.1.0"

from .autograd import Tensor, grad_check, no_grad
from .config import TrainConfig
from .model import Model

__all__ = ["Tensor", "grad_check", "no_grad", "TrainConfig", "Model",
           "__version__"]
