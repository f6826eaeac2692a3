"""Ericksen-Leslie nematic liquid crystal flows: Oseen-Frank tensors, a periodic
spectral solver, generalized Young measures and relative-energy certification."""

__version__ = "0.1.0"

from .oseen_frank import ElasticTensors, FrankConstants, ValidationError  # noqa: E402,F401
from .leslie import LeslieCoefficients  # noqa: E402,F401
from .fields import Grid  # noqa: E402,F401
