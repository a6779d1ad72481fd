"""Tests for the time coordinate of the model field."""

import cmath
import math

import numpy as np
import pytest
from scipy.integrate import quad, solve_ivp

from antiholo_moduli._errors import (
    InfinitePeriodError,
    InverseError,
    MisuseError,
    PoleError,
)
from antiholo_moduli._time_chart import *


def test_parabolic_chart():
    chart = TimeChart.for_parameter(0.0, 0.0)
    assert chart.parabolic
    assert chart(0.25) == pytest.approx(-2.0)
    assert chart(0.5) == pytest.approx(0.0)
    with pytest.raises(InfinitePeriodError):
        chart.residues
    with pytest.raises(InfinitePeriodError):
        period(0.0, 0.3, 1)


def test_chart_values():
    chart = TimeChart.for_parameter(0.04, 0.0)
    assert chart.residues == pytest.approx((2.5, -2.5))
    assert chart(0.3) == pytest.approx(-1.905350, abs=1e-6)

    with pytest.raises(PoleError):
        chart(0.2)
    with pytest.raises(MisuseError):
        TimeChart(0.04, 0.2, 0, 1, 0)


def test_chart_matches_integral_of_derivative():
    chart = TimeChart.for_parameter(0.04, 0.3)
    r, z = 0.5, 0.3 + 0.2j

    def integrand(t, part):
        point = r + t * (z - r)
        value = chart.derivative(point) * (z - r)
        return value.real if part == 0 else value.imag

    re, _ = quad(integrand, 0, 1, args=(0,), epsabs=1e-13)
    im, _ = quad(integrand, 0, 1, args=(1,), epsabs=1e-13)
    assert abs(chart(z) - complex(re, im)) < 1e-10


def test_charts_differ_by_half_period_of_b():
    plus = TimeChart.for_parameter(0.04, 0.3, 1)
    minus = plus.with_sign(-1)
    assert plus(0.5j) - minus(0.5j) == pytest.approx(1j * math.pi * 0.3)


def test_periods():
    assert period(0.04, 0.0, 1) == pytest.approx(15.707963j)
    assert period(0.04, 0.3, 1) == pytest.approx(16.650441j)
    assert period(0.04, 0.3, -1) == pytest.approx(-15.707963j + 0.942478j)
    chart = TimeChart.for_parameter(0.04, 0.3)
    assert chart.periods()[0] == pytest.approx(period(0.04, 0.3, 1))


def test_continuation_around_a_singular_point():
    chart = TimeChart.for_parameter(0.04, 0.0)
    circle = [0.2 + 0.05 * cmath.exp(2j * math.pi * m / 64) for m in range(65)]
    values = continue_along(chart, circle)
    assert values[-1] - values[0] == pytest.approx(period(0.04, 0.0, 1))
    assert values[0] == pytest.approx(chart(circle[0]))


def test_from_multipliers():
    chart = TimeChart.from_multipliers(0.04, 0.2, 0.4, -0.4)
    assert chart.residues == pytest.approx((2.5, -2.5))


def test_time_inverse():
    chart = TimeChart.for_parameter(0.04, 0.3)
    z = 0.32 + 0.03j
    Z = chart(z)
    seed = (0.3 + 0j, chart(0.3))
    assert abs(time_inverse(chart, Z, seed) - z) < 1e-12
    with pytest.raises(InverseError):
        time_inverse(chart, Z, seed, maxiter=0)


def test_flow_map():
    assert flow_map(0.0, 0.0, 1.0, 0.25) == pytest.approx(1 / 3)

    eps, b, z0 = 0.04, 0.3, 0.1 + 0.1j
    sol = solve_ivp(
        lambda t, z: (z * z - eps) / (1 + b * z),
        (0.0, 1.0),
        np.array([z0]),
        rtol=1e-12,
        atol=1e-14,
    )
    assert abs(flow_map(eps, b, 1.0, z0) - sol.y[0, -1]) < 1e-9
