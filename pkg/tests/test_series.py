"""Tests for truncated series arithmetic."""

import numpy as np
import pytest

from antiholo_moduli._errors import (
    DataError,
    DegeneracyError,
    SingularSeriesError,
    TruncationOrderError,
)
from antiholo_moduli._series import *


def w_series(terms, deg_w=4, deg_eps=1, conjugating=False):
    return SeriesFamily.from_terms(terms, deg_w, deg_eps, conjugating)


def test_compose_with_identity():
    s = w_series({(1, 0): 1, (2, 0): 1})
    out = compose(s, identity(4, 1))
    assert np.allclose(out.coeffs, s.coeffs)
    assert not out.conjugating


def test_compose_conjugation_with_itself_is_identity():
    sigma = identity(4, 1, conjugating=True)
    out = compose(sigma, sigma)
    assert not out.conjugating
    assert np.allclose(out.coeffs, identity(4, 1).coeffs)


def test_compose_antiholomorphic_cubic():
    # f(z) = conj(z) + conj(z)^2 / 2 + conj(z)^3 / 4; f o f = z + z^2 + z^3 + ...
    f = w_series({(1, 0): 1, (2, 0): 0.5, (3, 0): 0.25}, deg_w=3, conjugating=True)
    g = compose(f, f)
    assert not g.conjugating
    assert np.allclose(g.coeffs[:, 0], [0, 1, 1, 1])


def test_compose_conjugates_inner_coefficients():
    f = identity(3, 1, conjugating=True)
    inner = w_series({(1, 0): 1j}, deg_w=3)
    out = compose(f, inner)
    assert out.conjugating
    assert np.isclose(out.coeffs[1, 0], -1j)


def test_compose_rejects_constant_term():
    inner = w_series({(0, 0): 0.1, (1, 0): 1})
    with pytest.raises(TruncationOrderError):
        compose(identity(4, 1), inner)


def test_invert():
    assert np.allclose(invert(w_series({(1, 0): 1})).coeffs, identity(4, 1).coeffs)
    assert np.allclose(invert(w_series({(1, 0): 2})).coeffs[1, 0], 0.5)

    inv = invert(w_series({(1, 0): 1, (2, 0): 1}))
    assert np.allclose(inv.coeffs[:, 0], [0, 1, -1, 2, -5])


def test_invert_with_parameter():
    s = w_series({(0, 1): 0.3, (1, 0): 1, (1, 1): 0.5, (2, 0): 1}, deg_w=6, deg_eps=3)
    out = compose(s, invert(s))
    assert np.allclose(out.coeffs, identity(6, 3).coeffs, atol=1e-12)


def test_invert_singular():
    with pytest.raises(SingularSeriesError):
        invert(w_series({(2, 0): 1}))


def test_conjugate_series():
    assert np.isclose(conjugate_series(w_series({(1, 0): 1j})).coeffs[1, 0], -1j)
    real = w_series({(1, 0): 1, (2, 0): 0.5})
    assert np.array_equal(conjugate_series(real).coeffs, real.coeffs)
    s = w_series({(1, 0): 1 + 2j, (3, 1): 0.5 - 1j})
    assert np.array_equal(conjugate_series(conjugate_series(s)).coeffs, s.coeffs)


def test_evaluate_matches_naive_sum():
    rng = np.random.default_rng(1)
    c = rng.normal(size=(5, 3)) + 1j * rng.normal(size=(5, 3))
    s = SeriesFamily(c)
    eps, w = 0.03 - 0.01j, 0.2 + 0.1j
    naive = sum(c[j, k] * eps**k * w**j for j in range(5) for k in range(3))
    assert abs(s.evaluate(eps, w) - naive) < 1e-14

    ws = np.array([0.1, 0.2j, -0.3])
    vals = s.evaluate(eps, ws)
    assert np.allclose(vals, [s.evaluate(eps, x) for x in ws])


def test_map_value_conjugates_argument():
    s = w_series({(1, 0): 1, (2, 0): 1j}, conjugating=True)
    z = 0.1 + 0.2j
    assert abs(s.map_value(0.0, z) - (np.conj(z) + 1j * np.conj(z) ** 2)) < 1e-15


def test_weierstrass_prepare():
    # w^2 - eps + eps w^3 = (w^2 + eps^2 w - eps)(1 + eps w - eps^3) + O(eps^4)
    F = w_series({(2, 0): 1, (0, 1): -1, (3, 1): 1}, deg_w=4, deg_eps=3)
    P, h = weierstrass_prepare(F)
    expected_P = w_series({(2, 0): 1, (1, 2): 1, (0, 1): -1}, deg_w=4, deg_eps=3)
    expected_h = w_series({(0, 0): 1, (1, 1): 1, (0, 3): -1}, deg_w=4, deg_eps=3)
    assert np.allclose(P.coeffs, expected_P.coeffs, atol=1e-12)
    assert np.allclose(h.coeffs, expected_h.coeffs, atol=1e-12)
    assert np.allclose((P * h).coeffs, F.coeffs, atol=1e-12)


def test_weierstrass_prepare_real_input_gives_real_factors():
    F = w_series({(2, 0): 2, (0, 1): -1, (1, 1): 0.3, (3, 0): 0.7, (2, 2): 0.1}, deg_w=6, deg_eps=3)
    P, h = weierstrass_prepare(F)
    assert P.is_real() and h.is_real()


@pytest.mark.parametrize(
    "terms, order",
    [
        ({(1, 0): 1, (2, 0): 1, (0, 1): -1}, 1),
        ({(0, 0): 0.5, (2, 0): 1, (0, 1): -1}, 0),
        ({(3, 0): 1, (0, 1): -1}, ">2"),
    ],
)
def test_weierstrass_prepare_needs_order_two(terms, order):
    F = w_series(terms, deg_w=4, deg_eps=2)
    with pytest.raises(DegeneracyError) as exc:
        weierstrass_prepare(F)
    assert exc.value.details["order"] == order


def test_divide_by_quadratic():
    rng = np.random.default_rng(2)
    dw, de = 6, 3
    alpha1 = np.concatenate([[0], rng.normal(size=de)])
    alpha0 = np.concatenate([[0], rng.normal(size=de)])
    P = make_quadratic(alpha1, alpha0, dw)
    q = np.zeros((dw + 1, de + 1), dtype=complex)
    q[: dw - 1, :] = rng.normal(size=(dw - 1, de + 1))
    r = np.zeros((dw + 1, de + 1), dtype=complex)
    r[:2, :] = rng.normal(size=(2, de + 1))
    F = SeriesFamily(P.coeffs) * SeriesFamily(q) + SeriesFamily(r)
    Q, R = divide_by_quadratic(F, P)
    assert np.allclose(Q.coeffs, q, atol=1e-12)
    assert np.allclose(R.coeffs, r, atol=1e-12)


def test_parameter_inversion_and_reparametrization():
    e = np.array([0, 1, 1, 0], dtype=complex)
    inv = invert_parameter(e)
    assert np.allclose(inv, [0, 1, -1, 2])
    assert np.allclose(eps_compose(e, inv), [0, 1, 0, 0])

    s = w_series({(1, 0): 1, (0, 1): 1}, deg_w=2, deg_eps=3)
    t = reparametrize(s, e)
    assert np.allclose(t.coeffs[0, :], [0, 1, 1, 0])


def test_sqrt_and_reciprocal():
    s = w_series({(0, 0): 1, (1, 0): 1, (0, 1): 0.5, (2, 1): 0.2}, deg_w=5, deg_eps=2)
    root = series_sqrt(s)
    assert np.allclose((root * root).coeffs, s.coeffs, atol=1e-12)
    one = SeriesFamily.from_terms({(0, 0): 1}, 5, 2)
    assert np.allclose((reciprocal(s) * s).coeffs, one.coeffs, atol=1e-12)


def test_truncate_weight():
    s = w_series({(1, 0): 1, (3, 0): 1, (1, 1): 1, (0, 1): 1}, deg_w=4, deg_eps=2)
    t = s.truncate_weight(2)
    assert t.coeffs[1, 0] == 1 and t.coeffs[0, 1] == 1
    assert t.coeffs[3, 0] == 0 and t.coeffs[1, 1] == 0


def test_extended_precision_agrees_with_float():
    s = w_series({(1, 0): 1, (2, 0): 0.5, (0, 1): -0.5, (1, 1): 0.1}, deg_w=6, deg_eps=2)
    expected = invert(s)
    with extended_precision(50):
        mp = invert(s.to_mp()).to_float()
    assert np.allclose(mp.coeffs, expected.coeffs, atol=1e-14)


def test_json():
    s = w_series({(1, 0): 1, (2, 1): 0.25 - 0.5j}, conjugating=True)
    back = SeriesFamily.from_json(s.to_json())
    assert back.conjugating
    assert np.array_equal(back.coeffs, s.coeffs)

    with pytest.raises(DataError):
        SeriesFamily.from_json({"kind": "holomorphic-unfolding", "deg_w": 2})
    with pytest.raises(DataError):
        SeriesFamily.from_json(
            {
                "kind": "holomorphic-unfolding",
                "deg_w": 2,
                "deg_eps": 1,
                "coeffs": [{"j": 5, "k": 0, "re": 1.0, "im": 0.0}],
            }
        )
    with pytest.raises(DataError):
        SeriesFamily.from_json({"kind": "other", "deg_w": 2, "deg_eps": 1, "coeffs": []})
