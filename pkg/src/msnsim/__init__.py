"""Behavioral simulator for a mixed-signal neuron: quantized weights, circuit noise, energy."""
__version__ = "0.1.0"

from ._backend import BACKEND, USE_NUMBA  # noqa: E402

__all__ = ["BACKEND", "USE_NUMBA", "__version__"]
