"""Online gradient approximation for feed-forward spiking networks:
OTPE and its variants alongside OSTL, OTTT, RTRL, and BPTT, plus synthetic
spiking datasets and gradient-fidelity diagnostics."""

from .config import ExperimentConfig
from .errors import ConfigError, RasterFormatError, ResourceCapError
from .exact import RTRLState, bptt_gradients, rtrl_gradients
from .lif import (LifParams, Network, Trajectory, forward_sequence,
                  forward_step, fresh_states, lif_step, surrogate)
from .losses import LossSpec, accuracy, loss_and_deltas, predictions
from .online import (ONLINE_ALGORITHMS, OSTL, OTPE, OTTT, ApproxOTPE,
                     OutputAccumulator, make_algorithm, spatial_backward)
from .optim import Adamax
from .randman import RandmanSampler, RandmanSpec, make_raster
from .raster_io import SpikeRaster, raster_read, raster_write, split_train_valid
from .train import (batch_gradients, compare_against_bptt, cosine_similarity,
                    train_offline, train_online)

__version__ = "0.1.0"
