"""Tests for the canonical parameter and the prepared form."""

import numpy as np
import pytest

from antiholo_moduli._errors import BranchError, GenericityError, PreparationError
from antiholo_moduli._germ import GermFamily, fixed_point_data, normal_form_family
from antiholo_moduli._prepare import *
from antiholo_moduli._prepare import _fixed_points_centered
from antiholo_moduli._series import SeriesFamily, identity

ETAS = (-0.01, -0.005, 0.005, 0.01)


def change_deviation(change, radius=0.25, param=0.02):
    """Largest |h(w) - w| over a small polydisc."""
    ws = radius * np.exp(2j * np.pi * np.arange(16) / 16)
    worst = 0.0
    for eps in np.linspace(-param, param, 5):
        worst = max(worst, float(np.max(np.abs(change.evaluate(eps, ws) - ws))))
    return worst


def test_canonical_invariants_of_model_family(model_family):
    inv = canonical_invariants(model_family)
    for eta in ETAS:
        assert abs(inv.eps_at(eta) - eta) < 1e-8
        assert abs(inv.b_at(eta) - 0.3) < 1e-7
    assert abs(inv.eps_of_eta[0]) < 1e-12
    assert inv.fit_residual < 1e-8
    assert np.max(np.abs(inv.b_series.imag)) < 1e-12


def test_canonical_invariants_are_coordinate_free(shape_family):
    ell = SeriesFamily.from_terms({(1, 0): 1, (2, 0): 0.1}, 12, 6).as_kind(
        "coordinate-change"
    )
    moved = GermFamily(conjugate_by(shape_family.series, ell))
    assert not _fixed_points_centered(moved)

    before = canonical_invariants(shape_family)
    after = canonical_invariants(moved)
    for eta in ETAS:
        assert abs(before.eps_at(eta) - after.eps_at(eta)) < 1e-8
        assert abs(before.b_at(eta) - after.b_at(eta)) < 1e-7


def test_canonical_parameter_of_shape_family(shape_family):
    # The multipliers at +/- sqrt(eta) are exp(+/- 2 sqrt(eta) + O(eta^{3/2})), so the
    # canonical parameter is eta (1 + O(eta)) and b vanishes at eta = 0 for B1(0) = 1/4.
    inv = canonical_invariants(shape_family)
    assert abs(inv.eps_of_eta[1] - 1) < 1e-6
    assert abs(inv.b_at(0.0)) < 1e-7


def test_log_multiplier():
    assert log_multiplier(np.exp(0.3 + 0.1j)) == pytest.approx(0.3 + 0.1j)
    with pytest.raises(BranchError):
        log_multiplier(-1.0)


def test_genericity():
    fam = GermFamily(
        SeriesFamily.from_terms(
            {(1, 0): 1, (2, 0): 0.5, (0, 1): 1j}, 6, 2, conjugating=True
        )
    )
    with pytest.raises(GenericityError):
        check_genericity(fam)
    with pytest.raises(GenericityError):
        canonical_invariants(fam)
    with pytest.raises(GenericityError):
        prepare(fam)


def test_prepare_rejects_holomorphic_families():
    with pytest.raises(PreparationError):
        prepare(normal_form_family(0.3, squared=True))


def test_prepare_model_family(model_family):
    prep = prepare(model_family)
    assert change_deviation(prep.change) < 1e-9
    assert prep.report["worst_residual"] < 1e-9
    assert not prep.report["symmetrized"]
    assert prep.B0[0] == pytest.approx(0.5, abs=1e-10)
    assert prep.B1[0] == pytest.approx(0.25 - 0.15, abs=1e-8)
    assert b_from_prepared(prep.B1[0].real) == pytest.approx(0.3, abs=1e-7)


def test_prepare_shape_family(shape_family):
    prep = prepare(shape_family)
    assert prep.report["worst_residual"] < 1e-9
    assert prep.B0[0] == pytest.approx(0.5, abs=1e-10)
    assert prep.B1[0] == pytest.approx(0.25, abs=1e-8)
    assert prep.family.series.is_real()

    for eps in (0.01, -0.01):
        points = fixed_point_data(prep.family, eps).points
        assert all(abs(p * p - eps) < 1e-10 for p in points)


def test_prepare_is_idempotent(shape_family):
    prep = prepare(shape_family)
    again = prepare(prep.family)
    assert change_deviation(again.change) < 1e-9
    assert np.allclose(again.B0[:3], prep.B0[:3], atol=1e-8)


def test_prepare_undoes_a_scaling(model_family):
    # Conjugating by z -> 2z halves the quadratic coefficient; preparing restores it.
    two = (2 * identity(12, 6)).as_kind("coordinate-change")
    scaled = GermFamily(conjugate_by(model_family.series, two))
    prep = prepare(scaled)
    assert prep.B0[0] == pytest.approx(0.5, abs=1e-10)
    ws = np.array([0.1, 0.05j, -0.08])
    assert np.allclose(prep.change.evaluate(0.0, ws), ws / 2, atol=1e-9)


def test_preparation_report_is_json_friendly(shape_family):
    data = prepare(shape_family).to_json()
    assert set(data) >= {"family", "change", "invariants", "B0", "B1", "report"}
    assert data["family"]["kind"] == "antiholomorphic-unfolding"
    assert set(data["report"]["residuals"]) == {
        "remainder",
        "B_imaginary",
        "B0_at_zero",
        "symmetry",
        "multiplier",
        "canonical_parameter",
    }
