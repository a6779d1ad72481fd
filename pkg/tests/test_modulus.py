"""Tests for Fourier coefficients, transition maps and modulus files."""

import cmath
import math

import numpy as np
import pytest

from antiholo_moduli._errors import DataError, ResolutionError
from antiholo_moduli._fatou import TransitionSamples
from antiholo_moduli._germ import SectorParameter
from antiholo_moduli._modulus import *

from .conftest import make_modulus, make_record


def planted_samples(coeffs, x0=0.3, height=1.5, M=64):
    points = [complex(x0 + j / M, height) for j in range(M)]
    values = [
        sum(c * cmath.exp(2j * math.pi * n * W) for n, c in coeffs.items())
        for W in points
    ]
    return TransitionSamples(x0, height, tuple(points), tuple(values), tuple(points))


def test_fourier_from_samples():
    m = fourier_from_samples(planted_samples({1: 0.1, 2: 0.02j, 0: -0.5j}), 8)
    assert m.c(1) == pytest.approx(0.1, abs=1e-10)
    assert m.c(2) == pytest.approx(0.02j, abs=1e-7)
    assert m.c(0) == pytest.approx(-0.5j, abs=1e-14)
    assert m.is_resolved(1) and m.is_resolved(0)
    assert not m.is_resolved(3) and not m.is_resolved(-1)
    assert m.c(3) == 0
    assert m.max_nonconstant() == pytest.approx(0.1, abs=1e-10)


def test_fourier_resolution_errors():
    with pytest.raises(ResolutionError):
        fourier_from_samples(planted_samples({20: 1e-3}, height=0.0), 16)
    with pytest.raises(ResolutionError):
        fourier_from_samples(planted_samples({1: 0.1}, M=10), 8)


def test_fourier_modulus_helpers():
    m = make_modulus({1: 0.1, -1: 0.05j})
    assert m.value(0.25j) == pytest.approx(
        0.25j + 0.1 * cmath.exp(-0.5 * math.pi) + 0.05j * cmath.exp(0.5 * math.pi)
    )
    shifted = m.shifted(0.25)
    assert shifted.c(1) == pytest.approx(-0.1j)
    assert shifted.c(-1) == pytest.approx(0.05j * 1j)
    assert m.c(10) == 0


def test_line_amplitudes():
    m = make_modulus({1: 100.0, -2: 1e-3}, height=1.5)
    assert m.line_amplitude(1) == pytest.approx(100 * math.exp(-3 * math.pi))
    assert m.line_amplitude(-2) == pytest.approx(1e-3 * math.exp(6 * math.pi))
    assert m.line_amplitude(3) == 0.0
    assert m.max_line_amplitude() == pytest.approx(1e-3 * math.exp(6 * math.pi))
    unknown = FourierModulus.from_json(m.to_json(), m.resolved)
    assert unknown.line_amplitude(1) == pytest.approx(100.0)


def test_fourier_modulus_json():
    m = FourierModulus.from_json([[0, 0], [0.1, 0], [0, -0.9], [0, 0], [0, 0]])
    assert m.nmax == 2
    assert m.c(-1) == pytest.approx(0.1)
    assert m.resolved == (False, True, True, False, False)
    with pytest.raises(DataError):
        FourierModulus.from_json([[0, 0], [0, 0]])


def test_decay_ratio():
    m = make_modulus({1: 0.1, 2: 0.01, 3: 0.001})
    assert decay_ratio(m) == pytest.approx(0.1)
    assert math.isnan(decay_ratio(make_modulus({2: 0.01})))


def test_lavaurs_constant():
    assert lavaurs_constant(-0.01) == pytest.approx(-10 * math.pi)
    assert lavaurs_constant(SectorParameter(0.01, math.pi)) == pytest.approx(-10 * math.pi)


def test_sector_pair_residual():
    a = make_record({-1: 0.1 + 0.2j}, {})
    b = make_record({}, {1: -0.1 + 0.2j})
    assert sector_pair_residual(a, b) < 1e-15

    c = make_record({}, {1: 0.1 + 0.2j})
    # Measured on the upper line at height 1.5, where mode -1 is exp(3 pi) times larger.
    assert sector_pair_residual(a, c) == pytest.approx(0.2 * math.exp(3 * math.pi), rel=1e-12)


def test_record_json_keeps_lifted_argument():
    rec = make_record({1: 0.1}, {-1: 0.2})
    rec.eps = SectorParameter(0.01, 2 * math.pi)
    back = ModulusRecord.from_json(rec.to_json())
    assert isinstance(back.eps, SectorParameter)
    assert back.arg_lift == pytest.approx(2 * math.pi)
    assert back.c_inf.c(1) == pytest.approx(0.1)
    assert back.c_inf.height == 1.5 and back.c_0.height == -1.5
    assert back.c_G is None

    real = ModulusRecord.from_json(make_record({1: 0.1}, {}).to_json())
    assert real.eps == -0.01

    with pytest.raises(DataError):
        ModulusRecord.from_json({"eps_im": 0.0})


def test_modulus_data_validation(tmp_path):
    with pytest.raises(DataError):
        ModulusData.from_json({"records": "none"})
    with pytest.raises(DataError):
        ModulusData.from_json({"records": [], "normalization": "partial"})

    data = ModulusData("synthetic", "weak", [make_record({1: 0.1}, {})])
    path = tmp_path / "modulus.json"
    data.write(path)
    assert ModulusData.read(path).records[0].c_inf.c(1) == pytest.approx(0.1)


def test_relation_report_skips_failed_records():
    good = make_record({}, {})
    good.residuals = {"a_im_c0_inf": 1e-12, "invalid": False, "lavaurs_constant": 1j}
    bad = make_record({}, {})
    bad.residuals = {"a_im_c0_inf": 1.0}
    bad.failed = True
    report = relation_report(ModulusData("synthetic", "weak", [good, bad]))
    assert report == {"a_im_c0_inf": 1e-12, "failed_records": 1.0}


# -----------------------------------------------------------------------------
# Computed moduli
# -----------------------------------------------------------------------------
@pytest.fixture(scope="module")
def exact_weak(exact_model_family, config):
    return weak_modulus(exact_model_family, [-0.01, 0.01], config)


@pytest.fixture(scope="module")
def shape_weak(shape_family, config):
    return weak_modulus(shape_family, [-0.01, 0.01, 0.1], config)


def test_model_family_has_trivial_modulus(exact_weak):
    for rec in exact_weak.records:
        assert not rec.failed
        assert rec.upper.max_nonconstant() < 1e-8
        assert rec.c_0.max_nonconstant() < 1e-8
        assert abs(rec.upper.c(0) + 1j * math.pi * rec.b) < 1e-8
        assert rec.b == pytest.approx(0.3, abs=1e-7)
    assert exact_weak.records[1].c_G is not None
    assert exact_weak.records[0].c_G is None


def test_relations_hold_on_shape_family(shape_weak):
    report = relation_report(shape_weak)
    for key in (
        "a_im_c0_inf",
        "b_constant_terms",
        "t1_commutation",
        "c_sigma_half",
        "d_first_return",
        "e_lavaurs",
    ):
        assert report[key] < 1e-6, key
    assert report["failed_records"] == 1.0
    assert not any(rec.residuals.get("invalid") for rec in shape_weak.records[:2])


def test_failed_record_is_reported(shape_weak):
    bad = shape_weak.records[2]
    assert bad.failed
    assert bad.residuals["error"]["error"] == "geometry"
    assert bad.to_json()["failed"] is True


def test_shape_family_has_nontrivial_modulus(shape_weak):
    rec = shape_weak.records[0]
    assert rec.upper.max_nonconstant() > 1e-6


def test_strong_modulus_pairs_conjugate_rays(shape_family, config):
    data = strong_modulus(
        shape_family, [math.pi / 2, 3 * math.pi / 2, 3 * math.pi], [0.01], config
    )
    assert data.normalization == "strong"
    first, second, outside = data.records
    assert first.residuals["sector_pair"] < 1e-6
    assert second.residuals["sector_pair"] < 1e-6
    assert outside.failed
    assert np.isclose(first.arg_lift, math.pi / 2)
