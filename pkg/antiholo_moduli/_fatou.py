from __future__ import annotations

import cmath
import dataclasses
import math
from typing import Any, Literal, Optional, Sequence

import numpy as np
import numpy.typing as npt

from ._config import RunConfig
from ._errors import (
    EscapeError,
    FatouConvergenceError,
    GeometryError,
    InverseError,
    MisuseError,
    NewtonError,
)
from ._germ import (
    GermFamily,
    Param,
    SectorParameter,
    dynamics_series,
    fixed_point_data,
    param_is_real,
    param_value,
)
from ._prepare import (
    PreparedInvariants,
    canonical_invariants,
    log_multiplier,
    split_prepared,
)
from ._series import (
    SeriesFamily,
    divide_by_quadratic,
    make_quadratic,
    reciprocal,
)
from ._time_chart import PARABOLIC_EPS, TimeChart, time_inverse
from ._utils import status

Array = npt.NDArray[Any]
DomainKind = Literal["parabolic", "glutsyuk", "lavaurs", "sectoral"]
Normalization = Literal["weak", "strong", "none"]

# Largest weight of the formal Fatou correction; beyond this the Gevrey growth of the
# coefficients outweighs the gain near the fixed points.
MAX_ABEL_WEIGHT = 24

# Smallest distance between the line of a translation domain and any hole.
MIN_CLEARANCE = 2.0


def _horner(coeffs: Sequence[complex], z: complex) -> complex:
    acc = 0j
    for c in reversed(coeffs):
        acc = acc * z + c
    return acc


def _fixed_point_divisor(deg_w: int, deg_eps: int) -> SeriesFamily:
    """The monic quadratic ``w^2 - eps``."""
    alpha0 = np.zeros(deg_eps + 1, dtype=complex)
    alpha0[1] = -1
    return make_quadratic(np.zeros(deg_eps + 1, dtype=complex), alpha0, deg_w)


# =============================================================================
# Formal Fatou correction
# =============================================================================
class AbelSeries:
    """
    Formal solution ``kappa(z, eps)`` of ``kappa(g(z)) - kappa(z) = -u(z)``, where ``u``
    is the increment of the model time chart along one step of ``g`` minus one, and
    ``kappa(0, eps) = 0``. Truncated at a weight (w counts 1, eps counts 2).
    """

    def __init__(self, series: SeriesFamily, increment: SeriesFamily, weight: int):
        self.series = series
        self.increment = increment
        self.weight = weight

    @classmethod
    def build(
        cls,
        g: SeriesFamily,
        b_of_eta: Array,
        scale_of_eta: Array,
        weight: Optional[int] = None,
    ) -> AbelSeries:
        dw, de = g.deg_w, g.deg_eps
        # Wq is exact up to weight dw - 2, so kappa is up to weight dw - 3.
        W = max(1, min(dw - 3, MAX_ABEL_WEIGHT)) if weight is None else weight
        w = SeriesFamily.from_terms({(1, 0): 1}, dw, de)
        divisor = _fixed_point_divisor(dw, de)
        quad = SeriesFamily.from_terms({(2, 0): 1, (0, 1): -1}, dw, de)

        # g(z) - z = (z^2 - eps) Wq(z, eps)
        Wq, _ = split_prepared(g)

        # u = sum_m P_m Wq^m / m! - 1 with P_1 = c + b z and
        # P_{m+1} = P_m' (z^2 - eps) - 2 m z P_m.
        P = SeriesFamily.constant_in_w(np.asarray(scale_of_eta), dw) + SeriesFamily.constant_in_w(
            np.asarray(b_of_eta), dw
        ) * w
        Wq_pow = Wq
        u = P * Wq
        for m in range(1, W + 1):
            P = (P.derivative_w() * quad - (w * P) * (2 * m)).truncate_weight(W + 1)
            Wq_pow = Wq_pow * Wq
            u = u + (P * Wq_pow) * (1 / math.factorial(m + 1))
        u = (u - 1).truncate_weight(W + 1)

        u_tilde, _ = divide_by_quadratic(u, divisor)
        inv_Wq = reciprocal(Wq)
        quad_pows = [SeriesFamily.from_terms({(0, 0): 1}, dw, de)]
        Wq_pows = [SeriesFamily.from_terms({(0, 0): 1}, dw, de), Wq]
        for m in range(2, W + 2):
            quad_pows.append(quad_pows[-1] * quad)
            Wq_pows.append(Wq_pows[-1] * Wq)

        kappa = SeriesFamily.zeros(dw, de)
        for _ in range(W + 1):
            rhs = -u_tilde
            deriv = kappa.derivative_w()
            for m in range(2, W + 2):
                deriv = deriv.derivative_w()
                term = deriv * quad_pows[m - 1] * Wq_pows[m] * (1 / math.factorial(m))
                rhs = rhs - term
            kappa = (rhs * inv_Wq).integrate_w().truncate_weight(W)
        return cls(kappa, u, W)

    def coefficients_at(self, eps: complex) -> list[complex]:
        return [complex(x) for x in self.series.coefficients_at(eps)]


# =============================================================================
# Translation domains
# =============================================================================
@dataclasses.dataclass(frozen=True)
class TranslationDomain:
    """
    The line ``base + t * direction`` (t real) in the time chart and the strip between
    it and its image under the lifted dynamics. `holes` lists discs covering the
    fundamental hole and its translates by the periods.
    """

    eps: Param
    side: int
    kind: DomainKind
    base: complex
    direction: complex
    holes: tuple[tuple[complex, float], ...]
    clearance: float

    def samples(self, n: int = 9, half_length: float = 1.0) -> list[complex]:
        ts = np.linspace(-half_length, half_length, n)
        return [self.base + float(t) * self.direction for t in ts]


def domain_kind(eps: Param) -> DomainKind:
    e = param_value(eps)
    if abs(e) < PARABOLIC_EPS:
        return "parabolic"
    if param_is_real(eps):
        return "glutsyuk" if e.real > 0 else "lavaurs"
    return "sectoral"


def translation_domain(
    eps: Param,
    side: int,
    chart: TimeChart,
    *,
    slope: float = 0.0,
    delta: float = 0.2,
    distance: float = 2.0,
) -> TranslationDomain:
    """
    Place the line of the translation domain at `distance` from the fundamental hole, on
    the left for the + side and on the right for the - side, tilted by `slope` from the
    vertical. Every hole must stay at least `MIN_CLEARANCE` away from the line.
    """
    if isinstance(eps, SectorParameter) and not eps.in_sector(delta):
        raise GeometryError(
            "The parameter lies outside the sector.", arg=eps.arg, delta=delta
        )
    direction = 1j * cmath.exp(1j * slope)
    if direction.imag < 0.2:
        raise GeometryError(
            "The line is too close to horizontal to separate it from its image.",
            slope=slope,
        )
    center, radius = chart.hole_disc()
    reach = (radius + distance) / direction.imag
    base = complex(center.real - side * reach, center.imag)
    holes = [(center, radius)]
    if not chart.parabolic:
        alpha = chart.periods()[0]
        for k in (-2, -1, 1, 2):
            holes.append((center + k * alpha, radius))

    def dist(c: complex) -> float:
        return abs((np.conj(direction) * (c - base)).imag) / abs(direction)

    clearance = min(dist(c) - r for c, r in holes)
    if clearance < MIN_CLEARANCE - 1e-9:
        raise GeometryError(
            "The line passes too close to a hole.", clearance=clearance, side=side
        )
    return TranslationDomain(
        eps, side, domain_kind(eps), base, direction, tuple(holes), clearance
    )


# =============================================================================
# Dynamics at a fixed parameter
# =============================================================================
class Dynamics:
    """The second iterate, its inverse, the chart increment and the Abel defect at one eps."""

    def __init__(
        self,
        fam: GermFamily,
        g: SeriesFamily,
        eps: Param,
        chart: TimeChart,
        abel: AbelSeries,
        config: RunConfig,
    ):
        self.fam = fam
        self.eps = eps
        self.eps_value = param_value(eps)
        self.chart = chart
        self.config = config
        self.gc = [complex(x) for x in g.coefficients_at(self.eps_value)]
        self.dgc = [k * c for k, c in enumerate(self.gc)][1:]
        self.kc = abel.coefficients_at(self.eps_value)
        if chart.parabolic:
            self.residues: tuple[complex, ...] = ()
        else:
            self.residues = chart.residues

    def g(self, z: complex) -> complex:
        return _horner(self.gc, z)

    def ginv(self, z: complex) -> complex:
        y = 2 * z - self.g(z)
        for _ in range(40):
            step = (self.g(y) - z) / _horner(self.dgc, y)
            y -= step
            if abs(step) <= 1e-16 * (1 + abs(y)):
                return y
        if abs(self.g(y) - z) < 1e-14:
            return y
        raise NewtonError("Inverse of the second iterate did not converge.", z=z)

    def increment(self, z: complex, gz: complex) -> complex:
        """Chart value at ``g(z)`` minus chart value at ``z``, minus one."""
        ch = self.chart
        if ch.parabolic:
            return -ch.scale / gz + ch.scale / z + ch.b * cmath.log(gz / z) - 1
        total = -1 + 0j
        for res, p in zip(self.residues, ch.points):
            total += res * cmath.log((gz - p) / (z - p))
        return total

    def kappa_a(self, z: complex) -> complex:
        return _horner(self.kc, z)

    def conj_map(self, z: complex) -> complex:
        """The antiholomorphic map ``f`` at this parameter."""
        return complex(self.fam.series.evaluate(np.conj(self.eps_value), np.conj(z)))

    def route(self, z: complex, side: int) -> tuple[complex, int, float]:
        """
        Orbit sum of the Fatou correction at `z`: backward orbit for the + side, forward
        for the - side, anchored on the formal correction where its Abel defect is
        smallest (the first point below ``tail_tol``, otherwise the first local minimum
        below ``tol``). An orbit leaving the disc is an error only if no anchor below
        ``tol`` was seen before.
        """
        cfg = self.config
        total = 0j
        zk = complex(z)
        best: Optional[tuple[float, complex, int]] = None
        for k in range(cfg.max_depth):
            if abs(zk) > cfg.escape_radius or not cmath.isfinite(zk):
                if best is not None and best[0] <= cfg.tol:
                    break
                raise EscapeError(
                    "Orbit left the disc before reaching the formal region.",
                    start=z,
                    steps=k,
                )
            ka = self.kappa_a(zk)
            if side < 0:
                nxt = self.g(zk)
                u = self.increment(zk, nxt)
                defect = abs(self.kappa_a(nxt) - ka + u)
            else:
                nxt = self.ginv(zk)
                u = self.increment(nxt, zk)
                defect = abs(ka - self.kappa_a(nxt) + u)
            candidate = total + ka
            if defect < cfg.tail_tol:
                return candidate, k, defect
            if best is None or defect < best[0]:
                best = (defect, candidate, k)
            elif best[0] < cfg.tol and defect > 100 * best[0]:
                break
            if side < 0:
                total += u
            else:
                total -= u
            zk = nxt
        assert best is not None
        if best[0] > cfg.tol:
            raise FatouConvergenceError(
                "The orbit never entered the region where the formal correction holds.",
                start=z,
                defect=best[0],
            )
        return best[1], best[2], best[0]


# =============================================================================
# Fatou coordinates
# =============================================================================
class FatouCoordinate:
    """
    ``Phi(Z) = Z + kappa(z(Z)) + C`` on one side, where ``z(Z)`` inverts the time chart
    and ``kappa`` is the orbit sum of `Dynamics.route`.
    """

    def __init__(
        self,
        dynamics: Dynamics,
        chart: TimeChart,
        domain: TranslationDomain,
        constant: complex = 0j,
        normalization: Optional[dict[str, Any]] = None,
    ):
        self.dynamics = dynamics
        self.chart = chart
        self.domain = domain
        self.constant = complex(constant)
        self.normalization: dict[str, Any] = dict(normalization or {})
        self.residual = math.nan

    @property
    def side(self) -> int:
        return self.chart.sign

    def shifted(self, d: complex, **record: Any) -> FatouCoordinate:
        out = FatouCoordinate(
            self.dynamics, self.chart, self.domain, self.constant + d, self.normalization
        )
        out.normalization.update(record)
        out.residual = self.residual
        return out

    def kappa(self, z: complex) -> complex:
        return self.dynamics.route(z, self.side)[0]

    def at(self, z: complex, Z: Optional[complex] = None) -> complex:
        """Value at the point `z` whose chart value is `Z` (principal if omitted)."""
        if Z is None:
            Z = self.chart.principal(z)
        return Z + self.kappa(z) + self.constant

    def __call__(self, Z: complex, seed: Optional[tuple[complex, complex]] = None) -> complex:
        z = time_inverse(self.chart, Z, seed)
        return self.at(z, Z)

    def inverse(
        self,
        W: complex,
        seed: Optional[tuple[complex, complex]] = None,
        maxiter: int = 60,
    ) -> tuple[complex, complex]:
        """
        Chart value and point ``(Z, z)`` with ``Phi(Z) = W``, by fixed-point iteration.

        The iteration stops once the step is within the orbit-sum defect at the current
        point, since `kappa` is only known to that accuracy.
        """
        Z = W - self.constant
        if seed is not None:
            Z = W - self.constant - self.kappa(seed[0])
        z = time_inverse(self.chart, Z, seed)
        step = math.inf
        for _ in range(maxiter):
            kappa, _, defect = self.dynamics.route(z, self.side)
            Z_new = W - self.constant - kappa
            z = time_inverse(self.chart, Z_new, (z, Z))
            step = abs(Z_new - Z)
            if step <= 1e-13 * (1 + abs(W)) + 10 * defect:
                return Z_new, z
            Z = Z_new
        raise InverseError(
            "Fatou coordinate inversion did not converge.", target=W, step=step
        )

    def abel_residual(self, samples: Sequence[complex]) -> float:
        """sup of ``|Phi(G(Z)) - Phi(Z) - 1|`` over chart samples."""
        dyn = self.dynamics
        worst = 0.0
        seed = None
        for Z in samples:
            z = time_inverse(self.chart, Z, seed)
            seed = (z, Z)
            gz = dyn.g(z)
            Z1 = Z + 1 + dyn.increment(z, gz)
            worst = max(worst, abs(self.at(gz, Z1) - self.at(z, Z) - 1))
        return worst


# =============================================================================
# Context: everything that depends only on the family
# =============================================================================
class FatouContext:
    """Per-family data shared by all parameter values: dynamics series, invariants, formal correction."""

    def __init__(
        self,
        fam: GermFamily,
        config: RunConfig,
        invariants: PreparedInvariants,
        abel: AbelSeries,
    ):
        self.fam = fam
        self.config = config
        self.g = dynamics_series(fam)
        self.invariants = invariants
        self.abel = abel

    @classmethod
    def build(
        cls,
        fam: GermFamily,
        config: Optional[RunConfig] = None,
        invariants: Optional[PreparedInvariants] = None,
    ) -> FatouContext:
        config = config or RunConfig()
        g = dynamics_series(fam)
        _, remainder = split_prepared(g)
        if np.max(np.abs(remainder.coeffs)) > 1e-9:
            raise MisuseError(
                "Fatou coordinates need fixed points at z^2 = eps; prepare the family first."
            )
        if invariants is None:
            invariants = canonical_invariants(fam, config.eta_nodes, normalize=False)
        abel = AbelSeries.build(g, invariants.b_of_eta, invariants.scale_of_eta)
        return cls(fam, config, invariants, abel)

    def chart(self, eps: Param) -> TimeChart:
        e = param_value(eps)
        r = self.config.radius
        if abs(e) < PARABOLIC_EPS:
            inv = self.invariants
            return TimeChart(0j, 0j, complex(inv.b_of_eta[0]), complex(inv.scale_of_eta[0]), 1, r)
        data = fixed_point_data(self.fam, eps, dynamics=self.g)
        mu_plus, mu_minus = (log_multiplier(lam) for lam in data.multipliers)
        return TimeChart.from_multipliers(eps, data.points[0], mu_plus, mu_minus, 1, r)

    def raw_pair(self, eps: Param) -> tuple[FatouCoordinate, FatouCoordinate]:
        chart = self.chart(eps)
        dyn = Dynamics(self.fam, self.g, eps, chart, self.abel, self.config)
        out: list[FatouCoordinate] = []
        for side in (1, -1):
            ch = chart.with_sign(side)
            dom = translation_domain(eps, side, ch, delta=self.config.delta)
            phi = FatouCoordinate(dyn, ch, dom)
            out.append(phi)
        return out[0], out[1]

    def pair(
        self, eps: Param, normalization: Normalization = "weak"
    ) -> tuple[FatouCoordinate, FatouCoordinate]:
        plus, minus = self.raw_pair(eps)
        if normalization == "none":
            return plus, minus
        antiholomorphic = self.fam.conjugating and param_is_real(eps)
        if normalization == "strong" and not param_is_real(eps):
            antiholomorphic = False

        # Base point: Phi+ vanishes at the point z = r, i.e. at Z = 0.
        base = -plus.kappa(complex(self.config.radius))
        plus = plus.shifted(base, kind=normalization, base_point=0j, base_shift=base)

        if antiholomorphic:
            plus = _antiholomorphic_adjust(plus)
            minus = _antiholomorphic_adjust(minus)

        b = plus.chart.b
        height = sampling_height(plus.chart, self.config.height)
        samples = transition_samples(plus, minus, height, 16)
        c0 = complex(np.mean(samples.values))
        delta = -1j * math.pi * b - c0
        if antiholomorphic:
            minus = minus.shifted(
                delta.real,
                c0_shift=delta.real,
                c0_imaginary_defect=abs((c0 + delta.real).imag + math.pi * b.real),
            )
        else:
            minus = minus.shifted(delta, c0_shift=delta)
        minus.normalization["sampling_height"] = height
        plus.normalization["translation_residual"] = plus.at(complex(self.config.radius), 0j)
        for phi in (plus, minus):
            phi.residual = phi.abel_residual(phi.domain.samples())
        status(
            f"  Fatou pair at eps={param_value(eps):.4g}: abel residuals "
            f"{plus.residual:.2e}, {minus.residual:.2e}",
            self.config.verbose,
        )
        return plus, minus


def _real_samples(phi: FatouCoordinate) -> list[complex]:
    center, radius = phi.chart.hole_disc()
    if phi.side > 0:
        xs = [center.real - radius - d for d in (3.0, 2.5, 2.0)]
    else:
        xs = [center.real + radius + d for d in (2.0, 2.5, 3.0)]
    return [complex(x, y) for x in xs for y in (-0.5, 0.0, 0.5)]


def antiholomorphic_defects(phi: FatouCoordinate) -> list[complex]:
    """
    ``rho = P(W) - conj(W) - 1/2`` on real-axis samples, where ``P = Phi o F o Phi^{-1}``
    and ``F`` is the lift of the antiholomorphic map to the chart.
    """
    dyn = phi.dynamics
    out: list[complex] = []
    seed = None
    for Z in _real_samples(phi):
        z = time_inverse(phi.chart, Z, seed)
        seed = (z, Z)
        W = phi.at(z, Z)
        hz = complex(np.conj(dyn.conj_map(z)))
        FZ = np.conj(Z + dyn.increment(z, hz) + 1)
        fz = complex(np.conj(hz))
        P = phi.at(fz, complex(FZ))
        out.append(P - np.conj(W) - 0.5)
    return out


def _antiholomorphic_adjust(phi: FatouCoordinate) -> FatouCoordinate:
    rho = antiholomorphic_defects(phi)
    mean = complex(np.mean(rho))
    shift = -0.5j * mean.imag
    spread = max(abs(r - mean) for r in rho)
    return phi.shifted(
        shift,
        antiholomorphic_shift=shift,
        antiholomorphic_residual=max(spread, abs(mean.real)),
    )


# =============================================================================
# Transition samples
# =============================================================================
@dataclasses.dataclass(frozen=True)
class TransitionSamples:
    """Samples of ``Psi(W) - W`` at ``W = x0 + j / M + i * height``."""

    x0: float
    height: float
    points: tuple[complex, ...]
    values: tuple[complex, ...]
    zs: tuple[complex, ...]


def sampling_origin(chart: TimeChart) -> float:
    """Left end of the sampling segment: one period centered over the fundamental hole."""
    center, _ = chart.hole_disc()
    return center.real - 0.5


def sampling_height(chart: TimeChart, height: float) -> float:
    """
    Imaginary part of the sampling line `height` above the top of the fundamental hole
    (below its bottom for negative `height`).
    """
    center, radius = chart.hole_disc()
    if height >= 0:
        return center.imag + radius + height
    return center.imag - radius + height


def transition_samples(
    plus: FatouCoordinate,
    minus: FatouCoordinate,
    height: float,
    M: int,
    x0: Optional[float] = None,
) -> TransitionSamples:
    """
    Sample ``Psi = Phi- o Phi+^{-1}`` on the horizontal line at `height` (positive: above
    the hole, negative: below). The value is ``W + Phi-(z) - Phi+(z)`` with principal
    charts at the common point z.
    """
    if x0 is None:
        x0 = sampling_origin(plus.chart)
    points = [complex(x0 + j / M, height) for j in range(M)]
    values: list[complex] = []
    zs: list[complex] = []
    seed: Optional[tuple[complex, complex]] = None
    for W in points:
        Z, z = plus.inverse(W, seed)
        seed = (z, Z)
        Zp = plus.chart.principal(z)
        if abs(Zp - Z) > 1e-8 * (1 + abs(Z)):
            raise GeometryError(
                "A sampling point lies on a non-principal sheet of the chart.",
                W=W,
                height=height,
            )
        values.append(minus.at(z) - plus.at(z, Z))
        zs.append(z)
    return TransitionSamples(x0, height, tuple(points), tuple(values), tuple(zs))


def fatou_pair(
    fam: GermFamily,
    eps: Param,
    config: Optional[RunConfig] = None,
    normalization: Normalization = "weak",
    context: Optional[FatouContext] = None,
) -> tuple[FatouCoordinate, FatouCoordinate]:
    """Normalized Fatou coordinates ``(Phi+, Phi-)`` of the family at `eps`."""
    if context is None:
        context = FatouContext.build(fam, config)
    return context.pair(eps, normalization)


def glutsyuk_residual(phi: FatouCoordinate, samples: Sequence[complex]) -> float:
    """sup of ``|Phi(Z + alpha) - Phi(Z) - alpha|`` for the period of the + point."""
    if phi.chart.parabolic:
        return 0.0
    alpha = phi.chart.periods()[0]
    worst = 0.0
    for Z in samples:
        z = time_inverse(phi.chart, Z)
        z2 = time_inverse(phi.chart, Z + alpha, (z, Z))
        worst = max(worst, abs(phi.at(z2, Z + alpha) - phi.at(z, Z) - alpha))
    return worst
