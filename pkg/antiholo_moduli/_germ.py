from __future__ import annotations

import dataclasses
import math
from typing import Any, Optional, Union

import numpy as np
import numpy.polynomial.polynomial as npp

from ._errors import DataError, DomainError, MisuseError, NewtonError
from ._series import SeriesFamily, compose, reciprocal
from ._version import FILE_FORMAT_VERSION


# =============================================================================
# Parameters
# =============================================================================
@dataclasses.dataclass(frozen=True)
class SectorParameter:
    """
    A point of the universal cover of the punctured parameter disc, given by its modulus
    and a lifted argument. The lifted argument fixes the square root:
    ``sqrt = modulus**0.5 * exp(i arg / 2)``.
    """

    modulus: float
    arg: float

    @classmethod
    def from_value(cls, eps: complex) -> SectorParameter:
        eps = complex(eps)
        return cls(abs(eps), math.atan2(eps.imag, eps.real))

    @property
    def value(self) -> complex:
        return complex(self.modulus * np.exp(1j * self.arg))

    @property
    def sqrt(self) -> complex:
        return complex(math.sqrt(self.modulus) * np.exp(0.5j * self.arg))

    def conjugate(self) -> SectorParameter:
        """The sector conjugate: the lift of conj(eps) with argument ``2 pi - arg``."""
        return SectorParameter(self.modulus, 2 * math.pi - self.arg)

    def rotate(self, turns: int = 1) -> SectorParameter:
        return SectorParameter(self.modulus, self.arg + 2 * math.pi * turns)

    def in_sector(self, delta: float) -> bool:
        return -math.pi + delta < self.arg < 3 * math.pi - delta

    def is_real(self, tol: float = 1e-14) -> bool:
        return abs(self.value.imag) <= tol

    def to_json(self) -> dict[str, float]:
        return {"modulus": self.modulus, "arg": self.arg}


Param = Union[float, complex, SectorParameter]


def param_value(eps: Param) -> complex:
    if isinstance(eps, SectorParameter):
        return eps.value
    return complex(eps)


def param_root(eps: Param) -> complex:
    """The square root attached to a parameter: lifted for sector points, principal otherwise."""
    if isinstance(eps, SectorParameter):
        return eps.sqrt
    return complex(np.sqrt(complex(eps)))


def param_is_real(eps: Param, tol: float = 1e-14) -> bool:
    return abs(param_value(eps).imag) <= tol


def sector_conjugate(eps: Param) -> Param:
    if isinstance(eps, SectorParameter):
        return eps.conjugate()
    return complex(eps).conjugate() if isinstance(eps, complex) else eps


# =============================================================================
# Germ families
# =============================================================================
@dataclasses.dataclass(frozen=True)
class GermFamily:
    """
    A one-parameter unfolding of a parabolic germ, given by a truncated series.

    For an antiholomorphic unfolding the map is ``f_eps(z) = S(eps, conj(z))`` and it is
    continued to complex parameters as ``f_eps(z) = S(conj(eps), conj(z))``. For a
    holomorphic unfolding the map is ``g_eps(z) = S(eps, z)``.
    """

    series: SeriesFamily
    radius: float = 0.5
    param_radius: float = 0.05
    label: str = ""

    def __post_init__(self) -> None:
        s = self.series
        if s.deg_w < 2 or s.deg_eps < 1:
            raise MisuseError("A germ family needs deg_w >= 2 and deg_eps >= 1.")
        if s.kind == "coordinate-change":
            raise MisuseError("A coordinate change is not a germ family.")
        c = s.coeffs
        scale = s.scale()
        if abs(c[0, 0]) > 1e-12 * scale:
            raise DataError("The germ must fix the origin at eps = 0.")
        if abs(abs(c[1, 0]) - 1) > 1e-12:
            raise DataError(
                "The germ must be parabolic: the linear coefficient at eps = 0 must have modulus 1.",
                linear=complex(c[1, 0]),
            )
        if not s.conjugating and abs(c[1, 0] - 1) > 1e-12:
            raise DataError("A holomorphic unfolding must have multiplier 1 at eps = 0.")
        if abs(c[2, 0]) < 1e-12 * scale:
            raise DataError("The germ must have codimension 1 (nonzero quadratic term).")

    @property
    def conjugating(self) -> bool:
        return self.series.conjugating

    @property
    def deg_w(self) -> int:
        return self.series.deg_w

    @property
    def deg_eps(self) -> int:
        return self.series.deg_eps

    def replace(self, **changes: Any) -> GermFamily:
        return dataclasses.replace(self, **changes)

    def to_json(self) -> dict[str, Any]:
        out = self.series.to_json()
        out.update(
            {
                "radius": self.radius,
                "param_radius": self.param_radius,
                "label": self.label,
                "format_version": FILE_FORMAT_VERSION,
            }
        )
        return out

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> GermFamily:
        series = SeriesFamily.from_json(data)
        try:
            radius = float(data.get("radius", 0.5))
            param_radius = float(data.get("param_radius", 0.05))
        except (TypeError, ValueError) as e:
            raise DataError(f"Malformed radius in germ JSON: {e}") from e
        return cls(series, radius, param_radius, str(data.get("label", "")))


def _check_domain(fam: GermFamily, eps: Param, z: Any) -> None:
    e = param_value(eps)
    if abs(e) >= fam.param_radius:
        raise DomainError(
            f"|eps| = {abs(e):.3g} is outside the parameter disc of radius {fam.param_radius}."
        )
    if np.any(np.abs(z) >= fam.radius):
        raise DomainError(f"z lies outside the disc of radius {fam.radius}.")


def evaluate(fam: GermFamily, eps: Param, z: Any, check_domain: bool = True) -> Any:
    """The value ``f_eps(z)``; `z` may be an array."""
    if check_domain:
        _check_domain(fam, eps, z)
    e = param_value(eps)
    if fam.conjugating:
        return fam.series.evaluate(np.conj(e), np.conj(z))
    return fam.series.evaluate(e, z)


def second_iterate(fam: GermFamily) -> GermFamily:
    """The holomorphic family ``g_eps = f_{conj eps} o f_eps``."""
    if not fam.conjugating:
        raise MisuseError("The second iterate is only defined for antiholomorphic unfoldings.")
    return GermFamily(
        compose(fam.series, fam.series),
        fam.radius,
        fam.param_radius,
        f"{fam.label} (second iterate)" if fam.label else "",
    )


def dynamics_series(fam: GermFamily) -> SeriesFamily:
    """The series of the holomorphic map whose fixed points and Fatou coordinates we use."""
    if fam.conjugating:
        return compose(fam.series, fam.series)
    return fam.series


def genericity_margin(fam: GermFamily) -> float:
    """Real part of the eps-coefficient of the constant term; generic when nonzero."""
    return float(complex(fam.series.coeffs[0, 1]).real)


# =============================================================================
# Fixed points
# =============================================================================
@dataclasses.dataclass(frozen=True)
class FixedPointData:
    """
    Fixed points of the holomorphic dynamics at one parameter value.

    `multipliers` are the derivatives of the second iterate (or of the holomorphic map).
    For antiholomorphic unfoldings `tau` holds the derivative of ``f`` with respect to
    ``conj(z)`` at each point, and `periodic` tells whether the two points form a
    2-cycle of ``f`` rather than two fixed points.
    """

    eps: complex
    points: tuple[complex, ...]
    multipliers: tuple[complex, ...]
    tau: Optional[tuple[complex, ...]]
    periodic: bool
    residual: float


def _newton_root(
    q: npp.Polynomial, seed: complex, deflate: Optional[complex] = None, maxiter: int = 80
) -> complex:
    dq = q.deriv()
    z = complex(seed)
    for _ in range(maxiter):
        val, der = complex(q(z)), complex(dq(z))
        if deflate is not None:
            d = z - deflate
            val, der = val / d, (der * d - val) / (d * d)
        if der == 0:
            raise NewtonError("Vanishing derivative in the fixed-point Newton iteration.", z=z)
        step = val / der
        z -= step
        if abs(step) <= 1e-15 * (1 + abs(z)):
            return z
    if abs(complex(q(z))) < 1e-13:
        return z
    raise NewtonError(
        "Fixed-point Newton iteration did not converge.", seed=seed, last=z
    )


def fixed_point_data(
    fam: GermFamily, eps: Param, dynamics: Optional[SeriesFamily] = None
) -> FixedPointData:
    """
    Fixed points of the holomorphic dynamics, seeded at ``+/- sqrt(eps)`` (the lifted
    root for sector parameters), with their multipliers. The first point returned is the
    one continuing ``+sqrt(eps)``.
    """
    g = dynamics if dynamics is not None else dynamics_series(fam)
    e = param_value(eps)
    coeffs = np.array(g.coefficients_at(e), dtype=complex)
    coeffs[1] -= 1
    q = npp.Polynomial(coeffs)
    dg = npp.Polynomial(np.array(g.coefficients_at(e), dtype=complex)).deriv()

    if abs(e) < 1e-14:
        points: tuple[complex, ...] = (0j,)
    else:
        root = param_root(eps)
        p1 = _newton_root(q, root)
        p2 = _newton_root(q, -root)
        if abs(p1 - p2) < 1e-8 * abs(root):
            p2 = _newton_root(q, -root, deflate=p1)
        points = (p1, p2)
    multipliers = tuple(complex(dg(p)) for p in points)
    residual = max(abs(complex(q(p))) for p in points)

    tau: Optional[tuple[complex, ...]] = None
    periodic = False
    if fam.conjugating:
        ds = fam.series.derivative_w()
        tau = tuple(complex(ds.evaluate(np.conj(e), np.conj(p))) for p in points)
        if len(points) == 2:
            image = complex(fam.series.evaluate(np.conj(e), np.conj(points[0])))
            periodic = abs(image - points[1]) < abs(image - points[0])
    return FixedPointData(e, points, multipliers, tau, periodic, residual)


# =============================================================================
# Model families
# =============================================================================
def model_field_series(b: complex, deg_w: int, deg_eps: int) -> SeriesFamily:
    """The model vector field ``(w^2 - eps) / (1 + b w)`` as a series."""
    num = SeriesFamily.from_terms({(2, 0): 1, (0, 1): -1}, deg_w, deg_eps)
    den = SeriesFamily.from_terms({(0, 0): 1, (1, 0): b}, deg_w, deg_eps)
    return num * reciprocal(den)


def model_flow_series(
    b: complex, t: float, deg_w: int, deg_eps: int
) -> SeriesFamily:
    """Time-`t` flow of the model field, by its Lie series ``sum t^n/n! L^n(w)``."""
    v = model_field_series(b, deg_w, deg_eps)
    term = SeriesFamily.from_terms({(1, 0): 1}, deg_w, deg_eps)
    total = term
    for n in range(1, deg_w + 2 * deg_eps + 1):
        term = (v * term.derivative_w()) * (t / n)
        total = total + term
    return total


def normal_form_family(
    b: float,
    *,
    deg_w: int = 12,
    deg_eps: int = 6,
    squared: bool = False,
    radius: float = 0.5,
    param_radius: float = 0.05,
) -> GermFamily:
    """
    The model antiholomorphic family ``conj o v^{1/2}`` of the field with constant `b`,
    or, with `squared`, its second iterate ``v^1``.
    """
    if squared:
        series = model_flow_series(b, 1.0, deg_w, deg_eps).as_kind("holomorphic-unfolding")
        label = f"model time-1 map, b={b}"
    else:
        series = model_flow_series(b, 0.5, deg_w, deg_eps).as_kind(
            "antiholomorphic-unfolding"
        )
        label = f"model antiholomorphic family, b={b}"
    return GermFamily(series, radius, param_radius, label)


def prepared_shape_family(
    B0: float = 0.5,
    B1: float = 0.25,
    *,
    deg_w: int = 12,
    deg_eps: int = 6,
    radius: float = 0.5,
    param_radius: float = 0.05,
) -> GermFamily:
    """The family ``conj(z) + (conj(z)^2 - eps)(B0 + B1 conj(z))``."""
    terms = {
        (1, 0): 1.0,
        (2, 0): B0,
        (3, 0): B1,
        (0, 1): -B0,
        (1, 1): -B1,
    }
    series = SeriesFamily.from_terms(terms, deg_w, deg_eps, conjugating=True)
    return GermFamily(series, radius, param_radius, f"prepared shape B0={B0}, B1={B1}")


def random_generic_family(
    seed: int = 0,
    *,
    size: float = 0.2,
    radius: float = 0.5,
    param_radius: float = 0.05,
) -> GermFamily:
    """
    A random real family ``conj(z) + (conj(z)^2 - eps) U(eps, conj(z))`` with ``U``
    affine in both variables, so the fixed points of the second iterate sit at
    ``+/- sqrt(eps)``.

    ``U(0, 0)`` has modulus in ``[0.3, 1]`` and a random sign, which keeps the family
    generic; the other coefficients of ``U`` are normal with standard deviation `size`.
    The truncation degrees hold the second iterate exactly.
    """
    rng = np.random.default_rng(seed)
    u = rng.normal(scale=size, size=(2, 2))
    u[0, 0] = rng.choice([-1.0, 1.0]) * rng.uniform(0.3, 1.0)

    deg_w, deg_eps = 9, 8
    c = np.zeros((deg_w + 1, deg_eps + 1))
    c[1, 0] = 1.0
    c[2:4, 0:2] += u
    c[0:2, 1:3] -= u
    series = SeriesFamily(c, conjugating=True)
    return GermFamily(series, radius, param_radius, f"random generic family, seed={seed}")
