"""Non-Hermitian XY spin chains: spectra, PT phase diagrams and Loschmidt-echo dynamics."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BracketError,
    CapacityError,
    ConfigError,
    NHXYError,
    NumericalError,
    SymmetryError,
)
from .model import (  # noqa: E402
    BasisSpec,
    ModelParams,
    SpinOperator,
    build_h_im,
    build_h_nh,
    build_h_pt,
    reduce_two_atom,
)

__all__ = [
    "BasisSpec",
    "BracketError",
    "CapacityError",
    "ConfigError",
    "ModelParams",
    "NHXYError",
    "NumericalError",
    "SpinOperator",
    "SymmetryError",
    "build_h_im",
    "build_h_nh",
    "build_h_pt",
    "reduce_two_atom",
]
