from importlib.metadata import PackageNotFoundError, version

from .base import Exceptions
from .datagen import RingSpec, RngStream
from .dgan import DganConfig, dgan_train
from .discrepancy import DiscResult, empirical_discrepancy
from .edgan import EnsembleInputs, MixtureWeights, edgan_optimize
from .evaluation import likelihood_report
from .samples import SampleMatrix, load_samples, save_samples

try:
    __version__ = version("discrepancy-gan")
except PackageNotFoundError:
    __version__ = "0.0.0"

__all__ = (
    "DganConfig",
    "DiscResult",
    "EnsembleInputs",
    "Exceptions",
    "MixtureWeights",
    "RingSpec",
    "RngStream",
    "SampleMatrix",
    "dgan_train",
    "edgan_optimize",
    "empirical_discrepancy",
    "likelihood_report",
    "load_samples",
    "save_samples",
)
