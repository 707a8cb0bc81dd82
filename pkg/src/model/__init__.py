# src/model/__init__.py
from .vae import (MODES, LatentSample, ModelState, decode, encode, init, parameter_shapes,
                  sample)
from .losses import (BCE_EPSILON, LossBreakdown, kl_loss, reconstruction_loss,
                     reconstruction_target, total_loss)
