"""Shared families, configs and synthetic moduli for the test suite."""

from __future__ import annotations

import math
from typing import Mapping

import pytest

from antiholo_moduli._config import RunConfig
from antiholo_moduli._germ import (
    GermFamily,
    normal_form_family,
    prepared_shape_family,
    random_generic_family,
)
from antiholo_moduli._modulus import FourierModulus, ModulusData, ModulusRecord

# Truncation degree at which the polynomial model family has a transition map within
# 1e-11 of the identity.
EXACT_DEG_W = 36


def make_modulus(
    coeffs: Mapping[int, complex], nmax: int = 4, height: float = 1.5
) -> FourierModulus:
    values = tuple(complex(coeffs.get(n, 0j)) for n in range(-nmax, nmax + 1))
    resolved = tuple(n == 0 or n in coeffs for n in range(-nmax, nmax + 1))
    return FourierModulus(nmax, values, resolved, 0.0, height, 0.0)


def make_record(
    upper: Mapping[int, complex],
    lower: Mapping[int, complex],
    eps: float = -0.01,
    b: float = 0.3,
) -> ModulusRecord:
    up = dict(upper)
    low = dict(lower)
    up.setdefault(0, -1j * math.pi * b)
    low.setdefault(0, 1j * math.pi * b)
    return ModulusRecord(eps, complex(b), make_modulus(up), make_modulus(low, height=-1.5))


def make_data(*records: ModulusRecord) -> ModulusData:
    return ModulusData("synthetic", "weak", list(records))


@pytest.fixture(scope="session")
def config() -> RunConfig:
    return RunConfig(nmax=8)


@pytest.fixture(scope="session")
def model_family() -> GermFamily:
    return normal_form_family(0.3)


@pytest.fixture(scope="session")
def exact_model_family() -> GermFamily:
    return normal_form_family(0.3, deg_w=EXACT_DEG_W)


@pytest.fixture(scope="session")
def exact_model_square() -> GermFamily:
    return normal_form_family(0.3, deg_w=EXACT_DEG_W, squared=True)


@pytest.fixture(scope="session")
def shape_family() -> GermFamily:
    return prepared_shape_family(0.5, 0.25)


@pytest.fixture(scope="session")
def random_family(config: RunConfig) -> GermFamily:
    return random_generic_family(config.seed)
