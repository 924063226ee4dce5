"""Multimodal time series forecasting toolkit.

Temporal patch memory, series-to-image encoding and statistical prompts
feed a frozen (pluggable) vision-language encoder; a gated cross-modal
fusion and a linear head produce forecasts, trained end to end with MSE
on a from-scratch reverse-mode tensor engine.
"""

from .tensor import Tensor, backward, set_finite_checks
from .gradcheck import grad_check
from .fft import fft_real

__all__ = ["Tensor", "backward", "set_finite_checks", "grad_check", "fft_real"]

__version__ = "0.1.0"
