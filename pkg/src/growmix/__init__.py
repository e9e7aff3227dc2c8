"""Spectral abscissa of growth-mixing systems ``dx/dt = (D + mA) x``."""

from .errors import GrowMixError
from .mlcore import (
    ConservationClass,
    DiagonalGrowth,
    GrowthMixingSystem,
    MLMatrix,
    PerronPair,
    conservation_class,
    validate_ml,
)
from .spectral import perron, spab, spab_derivative, variational_value
from .structure import (
    FrobeniusForm,
    blockwise_derivative,
    blockwise_spab,
    frobenius_normal_form,
    is_irreducible,
)

__all__ = [
    "ConservationClass",
    "DiagonalGrowth",
    "FrobeniusForm",
    "GrowMixError",
    "GrowthMixingSystem",
    "MLMatrix",
    "PerronPair",
    "blockwise_derivative",
    "blockwise_spab",
    "conservation_class",
    "frobenius_normal_form",
    "is_irreducible",
    "perron",
    "spab",
    "spab_derivative",
    "validate_ml",
    "variational_value",
]

__version__ = "0.1.0"
