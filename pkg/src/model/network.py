"""
End-to-end forecaster: encoder followed by decoder.
"""

import numpy as np
import structlog

from model.decoder import decoder_forward
from model.encoder import encoder_forward
from model.params import ModelParams
from tensorcore.tensor import Tensor

logger = structlog.get_logger()


def forward(params: ModelParams, X_in: Tensor, train_mode: bool) -> Tensor:
    """[B, 3, V, T] observed frames -> [B, 3, V, K] predicted frames."""
    return decoder_forward(params, encoder_forward(params.variant, params, X_in, train_mode))


def predict(params: ModelParams, inputs: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Eval-mode forward over a window block, batch by batch. Never records a tape."""
    dtype = np.dtype(params.config.dtype)
    outputs = []
    for lo in range(0, inputs.shape[0], batch_size):
        X = Tensor(inputs[lo:lo + batch_size].astype(dtype, copy=False))
        outputs.append(forward(params, X, train_mode=False).data)
    return np.concatenate(outputs).astype(np.float64)
