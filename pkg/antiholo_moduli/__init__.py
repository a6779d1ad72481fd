"""Analytic moduli of generic unfoldings of antiholomorphic parabolic germs."""

from ._classify import (
    build_conjugacy,
    compare_moduli,
    compatibility_residual,
    extract_square_root,
    invariant_curve_test,
    return_linearizer,
    square_root_test,
)
from ._config import RunConfig, load_config
from ._errors import ModuliError
from ._fatou import FatouContext, fatou_pair
from ._germ import (
    GermFamily,
    SectorParameter,
    evaluate,
    random_generic_family,
    second_iterate,
)
from ._modulus import ModulusData, ModulusRecord, strong_modulus, weak_modulus
from ._portrait import portrait
from ._prepare import canonical_invariants, prepare
from ._series import SeriesFamily
from ._time_chart import TimeChart, time_inverse
from ._version import ANTIHOLO_MODULI_PACKAGE_VERSION

__version__ = ANTIHOLO_MODULI_PACKAGE_VERSION

__all__ = (
    "FatouContext",
    "GermFamily",
    "ModuliError",
    "ModulusData",
    "ModulusRecord",
    "RunConfig",
    "SectorParameter",
    "SeriesFamily",
    "TimeChart",
    "build_conjugacy",
    "canonical_invariants",
    "compare_moduli",
    "compatibility_residual",
    "evaluate",
    "extract_square_root",
    "fatou_pair",
    "invariant_curve_test",
    "load_config",
    "portrait",
    "prepare",
    "random_generic_family",
    "return_linearizer",
    "second_iterate",
    "square_root_test",
    "strong_modulus",
    "time_inverse",
    "weak_modulus",
)
