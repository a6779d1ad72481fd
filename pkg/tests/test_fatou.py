"""Tests for the formal correction, translation domains and Fatou coordinates."""

import cmath
import math

import numpy as np
import pytest

from antiholo_moduli._errors import GeometryError, MisuseError
from antiholo_moduli._fatou import *
from antiholo_moduli._germ import GermFamily, SectorParameter
from antiholo_moduli._prepare import conjugate_by
from antiholo_moduli._series import SeriesFamily
from antiholo_moduli._time_chart import TimeChart


@pytest.fixture(scope="module")
def shape_context(shape_family, config):
    return FatouContext.build(shape_family, config)


@pytest.fixture(scope="module")
def model_context(model_family, config):
    return FatouContext.build(model_family, config)


@pytest.fixture(scope="module")
def exact_context(exact_model_family, config):
    return FatouContext.build(exact_model_family, config)


def circle(radius, n=12):
    return [radius * cmath.exp(2j * math.pi * (k + 0.5) / n) for k in range(n)]


def test_domain_kind():
    assert domain_kind(0.0) == "parabolic"
    assert domain_kind(0.01) == "glutsyuk"
    assert domain_kind(-0.01) == "lavaurs"
    assert domain_kind(SectorParameter(0.01, 2 * math.pi)) == "glutsyuk"
    assert domain_kind(SectorParameter(0.01, math.pi / 2)) == "sectoral"


def test_translation_domain():
    chart = TimeChart.for_parameter(0.01, 0.3)
    plus = translation_domain(0.01, 1, chart)
    minus = translation_domain(0.01, -1, chart.with_sign(-1))
    center, radius = chart.hole_disc()
    assert plus.base.real < center.real - radius
    assert minus.base.real > center.real + radius
    assert plus.clearance >= MIN_CLEARANCE - 1e-9
    assert minus.clearance >= MIN_CLEARANCE - 1e-9
    assert plus.clearance == pytest.approx(MIN_CLEARANCE)
    tilted = translation_domain(0.01, 1, chart, slope=0.5)
    assert tilted.clearance == pytest.approx(MIN_CLEARANCE)
    assert len(plus.holes) == 5
    assert len(plus.samples(5)) == 5

    with pytest.raises(GeometryError):
        translation_domain(0.01, 1, chart, slope=1.5)
    with pytest.raises(GeometryError):
        translation_domain(SectorParameter(0.01, 3 * math.pi), 1, chart)


def test_context_needs_centered_fixed_points(shape_family):
    ell = SeriesFamily.from_terms({(1, 0): 1, (2, 0): 0.1}, 12, 6).as_kind(
        "coordinate-change"
    )
    moved = GermFamily(conjugate_by(shape_family.series, ell))
    with pytest.raises(MisuseError):
        FatouContext.build(moved)


def test_inverse_of_second_iterate(shape_context):
    dyn = shape_context.raw_pair(0.01)[0].dynamics
    for z in (0.2 + 0.1j, -0.15j, 0.05):
        assert abs(dyn.ginv(dyn.g(z)) - z) < 1e-14


def test_formal_correction_of_exact_model(exact_model_family, config):
    ctx = FatouContext.build(exact_model_family, config)
    for eps in (-0.01, 0.0, 0.01):
        values = ctx.abel.series.evaluate(eps, np.array(circle(0.2)))
        assert np.max(np.abs(values)) < 1e-8


def test_formal_correction_solves_abel_equation(shape_context):
    dyn = shape_context.raw_pair(1e-4)[0].dynamics
    for z in circle(0.03):
        gz = dyn.g(z)
        defect = dyn.kappa_a(gz) - dyn.kappa_a(z) + dyn.increment(z, gz)
        assert abs(defect) < 1e-7


def test_fatou_coordinate_of_model_is_the_chart(exact_context):
    plus, minus = exact_context.raw_pair(0.01)
    near_plus = (0.12, 0.1 + 0.02j, 0.09 - 0.01j)
    for z in near_plus:
        assert abs(plus.kappa(z)) < 1e-8
    for z in (-0.12, -0.1 + 0.02j):
        assert abs(minus.kappa(z)) < 1e-8


@pytest.mark.parametrize("eps", [0.01, -0.01])
def test_abel_equation(shape_context, eps):
    plus, minus = shape_context.pair(eps)
    assert plus.residual < 1e-8
    assert minus.residual < 1e-8
    assert abs(plus.normalization["translation_residual"]) < 1e-9


def test_fatou_inverse(shape_context):
    plus, _ = shape_context.pair(0.01)
    z = 0.15 + 0.1j
    Z, w = plus.inverse(plus.at(z), (z, plus.chart.principal(z)))
    assert abs(w - z) < 1e-10
    assert abs(Z - plus.chart.principal(z)) < 1e-10


def test_weak_normalization_of_constant_term(model_context, config):
    plus, minus = model_context.pair(-0.01)
    samples = transition_samples(plus, minus, sampling_height(plus.chart, config.height), 16)
    assert abs(np.mean(samples.values) + 1j * math.pi * plus.chart.b) < 1e-8


@pytest.mark.parametrize("eps", [0.0, -0.01, 0.01])
def test_sampling_lines_clear_the_hole(shape_context, config, eps):
    plus, minus = shape_context.pair(eps)
    center, radius = plus.chart.hole_disc()
    for h in (config.height, -config.height):
        y = sampling_height(plus.chart, h)
        assert abs(y - center.imag) == pytest.approx(radius + config.height)
        samples = transition_samples(plus, minus, y, 8)
        assert max(abs(z) for z in samples.zs) < config.radius


def test_glutsyuk_commutation(shape_context):
    plus, _ = shape_context.pair(0.01)
    assert glutsyuk_residual(plus, plus.domain.samples(3)) < 1e-7


@pytest.mark.parametrize("eps", [0.01, -0.01])
def test_antiholomorphic_normalization(shape_context, eps):
    plus, minus = shape_context.pair(eps)
    assert plus.normalization["antiholomorphic_residual"] < 1e-7
    assert minus.normalization["antiholomorphic_residual"] < 1e-7
    assert plus.normalization["kind"] == "weak"


def test_fatou_pair_helper(shape_family, shape_context):
    plus, minus = fatou_pair(shape_family, 0.01, context=shape_context, normalization="none")
    assert plus.side == 1 and minus.side == -1
    assert plus.constant == 0
