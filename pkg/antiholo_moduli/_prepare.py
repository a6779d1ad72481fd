from __future__ import annotations

import cmath
import dataclasses
import math
from typing import Any

import numpy as np
import numpy.typing as npt

from ._errors import BranchError, GenericityError, PreparationError
from ._germ import (
    GermFamily,
    dynamics_series,
    fixed_point_data,
    genericity_margin,
)
from ._series import (
    SeriesFamily,
    compose,
    divide_by_quadratic,
    eps_compose,
    eps_mul,
    identity,
    invert,
    invert_parameter,
    make_quadratic,
    quadratic_coefficients,
    reciprocal,
    reparametrize,
    series_sqrt,
    weierstrass_prepare,
)
from ._utils import chebyshev_nodes, complex_list

Array = npt.NDArray[Any]

GENERICITY_TOL = 1e-9


# =============================================================================
# Canonical invariants
# =============================================================================
@dataclasses.dataclass(frozen=True)
class PreparedInvariants:
    """
    The canonical parameter and the formal invariant of a family.

    All series are coefficient vectors, lowest order first. `eps_of_eta` is the
    canonical parameter as a function of the family's own parameter (fixed points at
    ``z^2 = eta``), `b_of_eta` the formal invariant in that parameter, `b_series` the
    formal invariant in the canonical parameter and `scale_of_eta` the chart scale
    ``sqrt(eta / eps(eta))``.
    """

    eps_of_eta: Array
    b_of_eta: Array
    b_series: Array
    eta_of_eps: Array
    scale_of_eta: Array
    fit_residual: float
    nodes: tuple[float, ...]

    def b_at(self, eps: complex) -> complex:
        return complex(np.polynomial.polynomial.polyval(eps, self.b_series))

    def eps_at(self, eta: complex) -> complex:
        return complex(np.polynomial.polynomial.polyval(eta, self.eps_of_eta))

    def to_json(self) -> dict[str, Any]:
        return {
            "eps_of_eta": complex_list(self.eps_of_eta),
            "b_of_eta": complex_list(self.b_of_eta),
            "b_series": complex_list(self.b_series),
            "eta_of_eps": complex_list(self.eta_of_eps),
            "scale_of_eta": complex_list(self.scale_of_eta),
            "fit_residual": self.fit_residual,
        }


def _eps_series_apply(vec: Array, fn: Any) -> Array:
    s = SeriesFamily.constant_in_w(vec, 2)
    return np.array(fn(s).coeffs[0, :])


def log_multiplier(lam: complex) -> complex:
    """Principal logarithm of a multiplier; refuses multipliers near the cut."""
    if abs(cmath.phase(lam)) > math.pi - 0.05:
        raise BranchError(
            "Multiplier too close to the negative real axis for a principal logarithm.",
            multiplier=lam,
        )
    return cmath.log(lam)


def _fit(x: Array, y: Array, lowest: int, degree: int) -> tuple[Array, float]:
    powers = np.arange(lowest, degree + 1)
    V = x.reshape(-1, 1) ** powers.reshape(1, -1)
    sol, *_ = np.linalg.lstsq(V.astype(complex), y.astype(complex), rcond=None)
    residual = float(np.max(np.abs(V @ sol - y)))
    out = np.zeros(degree + 1, dtype=complex)
    out[lowest:] = sol
    return out, residual


def check_genericity(fam: GermFamily) -> float:
    margin = genericity_margin(fam)
    if abs(margin) < GENERICITY_TOL:
        raise GenericityError(
            "The family is not generic: the eps-derivative of the constant term has zero real part.",
            margin=margin,
        )
    return margin


def canonical_invariants(
    fam: GermFamily, nodes: int = 16, *, normalize: bool = True
) -> PreparedInvariants:
    """
    Canonical parameter and formal invariant, fitted from the multipliers at the fixed
    points on Chebyshev nodes of the parameter.

    The family is first brought to the form with fixed points at ``z^2 = eta`` when it is
    not already in it (set `normalize` to False to skip the check).
    """
    check_genericity(fam)
    if normalize and not _fixed_points_centered(fam):
        fam = normalize_fixed_points(fam).family
    radius = fam.param_radius / 2
    etas = chebyshev_nodes(nodes, radius)
    g = dynamics_series(fam)
    eps_vals = np.zeros(nodes, dtype=complex)
    b_vals = np.zeros(nodes, dtype=complex)
    for i, eta in enumerate(etas):
        data = fixed_point_data(fam, float(eta), dynamics=g)
        mu_plus, mu_minus = (log_multiplier(lam) for lam in data.multipliers)
        inv_p, inv_m = 1 / mu_plus, 1 / mu_minus
        eps_vals[i] = (inv_p - inv_m) ** -2
        b_vals[i] = inv_p + inv_m

    degree = fam.deg_eps
    x = etas / radius
    eps_fit, res_e = _fit(x, eps_vals, 1, degree)
    b_fit, res_b = _fit(x, b_vals, 0, degree)
    scaling = radius ** -np.arange(degree + 1)
    eps_of_eta = eps_fit * scaling
    b_of_eta = b_fit * scaling
    if fam.series.is_real():
        eps_of_eta = eps_of_eta.real.astype(complex)
        b_of_eta = b_of_eta.real.astype(complex)

    eta_of_eps = invert_parameter(eps_of_eta)
    b_series = eps_compose(b_of_eta, eta_of_eps)
    ratio = np.zeros(degree + 1, dtype=complex)
    ratio[:-1] = eps_of_eta[1:]
    scale_of_eta = _eps_series_apply(
        ratio, lambda s: series_sqrt(reciprocal(s))  # pyright: ignore
    )
    return PreparedInvariants(
        eps_of_eta,
        b_of_eta,
        b_series,
        eta_of_eps,
        scale_of_eta,
        max(res_e, res_b),
        tuple(float(e) for e in etas),
    )


# =============================================================================
# Normalization of the fixed points
# =============================================================================
@dataclasses.dataclass(frozen=True)
class Normalized:
    family: GermFamily
    # Original coordinate -> new coordinate, as a series in the new parameter.
    change: SeriesFamily
    # The original parameter as a series in the new one.
    param_map: Array
    rotation: float


def conjugate_by(f: SeriesFamily, h: SeriesFamily) -> SeriesFamily:
    """The series of ``h o f o h^{-1}``."""
    return compose(h, compose(f, invert(h)))


def _fixed_points_centered(fam: GermFamily, tol: float = 1e-10) -> bool:
    eta = fam.param_radius / 4
    for e in (eta, -eta):
        data = fixed_point_data(fam, e)
        if any(abs(p * p - e) > tol * abs(e) + 1e-14 for p in data.points):
            return False
    return True


def _straighten(f: SeriesFamily) -> SeriesFamily:
    """
    The real-analytic function m(x, eps) with ``Im(f(x + i m) - (x + i m)) = 0``,
    computed by iterating ``m <- N(m) / 4i``.
    """
    dw, de = f.deg_w, f.deg_eps
    Sp = SeriesFamily(f.coeffs)
    Ss = SeriesFamily(np.conj(f.coeffs))
    w = identity(dw, de)
    m = SeriesFamily.zeros(dw, de)
    for _ in range(dw + de + 1):
        H = compose(Sp, w - m * 1j) - compose(Ss, w + m * 1j) - m * 2j
        N = H + m * 4j
        m = SeriesFamily((N * (1 / 4j)).coeffs.real.astype(complex))
    return m


def normalize_fixed_points(fam: GermFamily) -> Normalized:
    """
    Rotate so the linear coefficient at eps = 0 is 1, straighten the fixed-point curve,
    center the fixed points and reparametrize by ``eta`` so the fixed points of the
    holomorphic dynamics sit at ``z^2 = eta``.
    """
    f = fam.series
    dw, de = f.deg_w, f.deg_eps
    change = identity(dw, de)

    a = complex(f.coeffs[1, 0])
    theta = cmath.phase(a)
    if abs(a - 1) > 1e-14:
        ell = SeriesFamily.from_terms({(1, 0): cmath.exp(0.5j * theta)}, dw, de).as_kind(
            "coordinate-change"
        )
        ell_inv = invert(ell)
        f = compose(ell_inv, compose(f, ell))
        change = compose(ell_inv, change)

    if f.conjugating:
        m = _straighten(f)
        phi = (identity(dw, de) + m * 1j).as_kind("coordinate-change")
        w = identity(dw, de)
        Sp = SeriesFamily(f.coeffs)
        Ss = SeriesFamily(np.conj(f.coeffs))
        F1 = (compose(Sp, w - m * 1j) + compose(Ss, w + m * 1j)) * 0.5 - w
        phi_inv = invert(phi)
        f = compose(phi_inv, compose(f, phi))
        change = compose(phi_inv, change)
    else:
        F1 = f - identity(dw, de)

    quadratic, _unit = weierstrass_prepare(F1)
    alpha1, alpha0 = quadratic_coefficients(quadratic)
    if f.conjugating:
        alpha1, alpha0 = alpha1.real.astype(complex), alpha0.real.astype(complex)
    alpha1[0] = alpha0[0] = 0

    shift = np.zeros((dw + 1, de + 1), dtype=complex)
    shift[0, :] = alpha1 / 2
    shift[1, 0] = 1
    translate = SeriesFamily(shift, kind="coordinate-change")
    f = conjugate_by(f, translate)
    change = compose(translate, change)

    eta_of_eps = eps_mul(alpha1, alpha1) / 4 - alpha0
    eps_of_eta = invert_parameter(eta_of_eps)
    f = reparametrize(f, eps_of_eta)
    change = reparametrize(change, eps_of_eta)
    family = GermFamily(f, fam.radius, fam.param_radius, fam.label)
    return Normalized(family, change, eps_of_eta, theta)


# =============================================================================
# Full preparation
# =============================================================================
@dataclasses.dataclass(frozen=True)
class Preparation:
    """Result of `prepare`: prepared family, change, invariants and report."""

    family: GermFamily
    change: SeriesFamily
    invariants: PreparedInvariants
    param_map: Array
    B0: Array
    B1: Array
    Q: SeriesFamily
    report: dict[str, Any]

    def to_json(self) -> dict[str, Any]:
        return {
            "family": self.family.to_json(),
            "change": self.change.to_json(),
            "invariants": self.invariants.to_json(),
            "param_map": complex_list(self.param_map),
            "B0": complex_list(self.B0),
            "B1": complex_list(self.B1),
            "report": self.report,
        }


def symmetry_residual(fam: GermFamily, nodes: int = 8) -> float:
    """
    How far the multipliers are from the antiholomorphic symmetry: tau real for
    eps > 0, and ``tau_+ = conj(tau_-)`` for eps < 0.
    """
    worst = 0.0
    g = dynamics_series(fam)
    for eta in chebyshev_nodes(nodes, fam.param_radius / 2):
        data = fixed_point_data(fam, float(eta), dynamics=g)
        assert data.tau is not None
        tp, tm = data.tau
        if eta > 0:
            worst = max(worst, abs(tp.imag), abs(tm.imag))
        else:
            worst = max(worst, abs(tp - tm.conjugate()))
    return worst


def multiplier_residual(fam: GermFamily, nodes: int = 8) -> float:
    """``lambda = conj(tau^2)`` at the fixed points for eps > 0."""
    worst = 0.0
    g = dynamics_series(fam)
    for eta in chebyshev_nodes(nodes, fam.param_radius / 2):
        if eta <= 0:
            continue
        data = fixed_point_data(fam, float(eta), dynamics=g)
        assert data.tau is not None
        for lam, tau in zip(data.multipliers, data.tau):
            worst = max(worst, abs(lam - (tau * tau).conjugate()))
    return worst


def split_prepared(f: SeriesFamily) -> tuple[SeriesFamily, SeriesFamily]:
    """
    ``f - w = (w^2 - eps) K + R`` with R linear in w, modulo terms of weight above
    ``deg_w`` (w counts 1, eps counts 2). Terms of higher weight would be carried down
    into R by the division past the truncation in w.
    """
    dw, de = f.deg_w, f.deg_eps
    F = (SeriesFamily(f.coeffs) - identity(dw, de)).truncate_weight(dw)
    divisor = make_quadratic(np.zeros(de + 1), -np.eye(1, de + 1, 1)[0], dw)
    return divide_by_quadratic(F, divisor)


def _symmetrizing_change(f: SeriesFamily) -> SeriesFamily:
    """
    The change ``z + (z^2 - eta)(A0 + A1 z)`` whose derivative at ``+/- sqrt(eta)`` is
    the conjugate square root of tau there.
    """
    dw, de = f.deg_w, f.deg_eps
    w = identity(dw, de)
    K, _ = split_prepared(f)
    C0 = np.conj(K.row(0))
    C1 = np.conj(K.row(1))
    T = np.zeros((dw + 1, de + 1), dtype=complex)
    T[0, 0] = 1
    T[1, :] = 2 * C0
    T[2, :] = 2 * C1
    S_hat = series_sqrt(SeriesFamily(T))
    eta = np.zeros(de + 1, dtype=complex)
    eta[1] = 1
    A0 = np.zeros(de + 1, dtype=complex)
    A1 = np.zeros(de + 1, dtype=complex)
    eta_pow = np.eye(1, de + 1, 0)[0].astype(complex)
    for k in range(dw // 2 + 1):
        if 2 * k + 1 <= dw:
            A0 += 0.5 * eps_mul(S_hat.row(2 * k + 1), eta_pow)
        if k >= 1 and 2 * k <= dw:
            A1 += 0.5 * eps_mul(S_hat.row(2 * k), _shift_down(eta_pow))
        eta_pow = eps_mul(eta_pow, eta)
    factor = np.zeros((dw + 1, de + 1), dtype=complex)
    factor[0, :] = A0
    factor[1, :] = A1
    quad = np.zeros((dw + 1, de + 1), dtype=complex)
    quad[2, 0] = 1
    quad[0, 1] = -1
    change = w + SeriesFamily(quad) * SeriesFamily(factor)
    return change.as_kind("coordinate-change")


def _shift_down(vec: Array) -> Array:
    """Divide an eps-series by eps (the constant term must vanish)."""
    out = np.zeros_like(vec)
    out[:-1] = vec[1:]
    return out


def prepare(
    fam: GermFamily, tol: float = 1e-9, nodes: int = 16
) -> Preparation:
    """
    Bring a generic antiholomorphic unfolding to the prepared form
    ``conj(z) + (conj(z)^2 - eps)(B0(eps) + B1(eps) conj(z) + conj(z)^2 Q)`` in its
    canonical parameter, with real B0, B1 and ``B0(0) = 1/2``.
    """
    if not fam.conjugating:
        raise PreparationError("Only antiholomorphic unfoldings can be prepared.")
    margin = check_genericity(fam)
    dw, de = fam.deg_w, fam.deg_eps

    norm = normalize_fixed_points(fam)
    f = norm.family.series
    change = norm.change
    invariants = canonical_invariants(norm.family, nodes, normalize=False)

    sym_before = symmetry_residual(norm.family)
    symmetrized = sym_before > tol
    if symmetrized:
        h = _symmetrizing_change(f)
        f = conjugate_by(f, h)
        change = compose(h, change)

    # c(eta) = sqrt(eps(eta) / eta) puts the fixed points at z^2 = eps(eta).
    stretch = reciprocal(SeriesFamily.constant_in_w(invariants.scale_of_eta, dw))
    L = (stretch * identity(dw, de)).as_kind("coordinate-change")
    f = conjugate_by(f, L)
    change = compose(L, change)

    eta_of_eps = invariants.eta_of_eps
    f = reparametrize(f, eta_of_eps)
    change = reparametrize(change, eta_of_eps)
    param_map = eps_compose(norm.param_map, eta_of_eps)
    prepared = GermFamily(f, fam.radius, fam.param_radius, fam.label)

    K, remainder = split_prepared(f)
    B0, B1 = K.row(0), K.row(1)
    linear = np.zeros((dw + 1, de + 1), dtype=complex)
    linear[0, :] = B0
    linear[1, :] = B1
    divisor = make_quadratic(np.zeros(de + 1), -np.eye(1, de + 1, 1)[0], dw)
    Q, _ = divide_by_quadratic(K - SeriesFamily(linear), divisor)

    check = canonical_invariants(prepared, nodes, normalize=False)
    etas = np.array(check.nodes)
    canonical = np.max(np.abs(np.polynomial.polynomial.polyval(etas, check.eps_of_eta) - etas))
    residuals = {
        "remainder": float(np.max(np.abs(remainder.coeffs))),
        "B_imaginary": float(max(np.max(np.abs(B0.imag)), np.max(np.abs(B1.imag)))),
        "B0_at_zero": abs(complex(B0[0]) - 0.5),
        "symmetry": symmetry_residual(prepared),
        "multiplier": multiplier_residual(prepared),
        "canonical_parameter": float(canonical) / (fam.param_radius / 2),
    }
    worst = max(residuals.values())
    report: dict[str, Any] = {
        "genericity_margin": margin,
        "rotation": norm.rotation,
        "symmetry_before": sym_before,
        "symmetrized": symmetrized,
        "residuals": residuals,
        "worst_residual": worst,
        "b_series": complex_list(invariants.b_series),
        "fit_residual": invariants.fit_residual,
    }
    if worst > tol:
        raise PreparationError(
            "The prepared form does not meet the tolerance.",
            worst_residual=worst,
            **residuals,
        )
    return Preparation(prepared, change, invariants, param_map, B0, B1, Q, report)


def b_from_prepared(B1_at_zero: float) -> float:
    """Formal invariant at eps = 0 of a prepared family with ``B0(0) = 1/2``."""
    return 0.5 - 2 * B1_at_zero

