from __future__ import annotations

import cmath
import dataclasses
import math
from typing import Any, Callable, Literal, Optional, Sequence

import numpy as np
import numpy.typing as npt
from scipy.optimize import least_squares

from ._config import RunConfig
from ._errors import (
    ClassificationError,
    ComparisonError,
    CriterionError,
    DataError,
    EscapeError,
    FatouConvergenceError,
    GeometryError,
    InverseError,
    NormalizationMismatchError,
    ResolutionError,
)
from ._fatou import FatouContext, FatouCoordinate
from ._germ import GermFamily, Param, SectorParameter, evaluate, param_root
from ._modulus import (
    FourierModulus,
    ModulusData,
    ModulusRecord,
    conjugate_partner,
    modulus_record,
    strong_modulus,
    weak_modulus,
)
from ._series import SeriesFamily
from ._utils import chebyshev_nodes, complex_to_pair, status

Array = npt.NDArray[Any]
Verdict = Literal["equivalent", "inequivalent", "inconclusive"]


# =============================================================================
# Comparison of moduli
# =============================================================================
@dataclasses.dataclass
class EquivalenceReport:
    verdict: Verdict
    shifts: list[Optional[float]]
    worst_residual: float
    failing_record: Optional[int] = None
    reason: str = ""

    def to_json(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict,
            "shifts": self.shifts,
            "worst_residual": self.worst_residual,
            "failing_record": self.failing_record,
            "reason": self.reason,
        }


def _coefficient_lists(rec: ModulusRecord) -> list[FourierModulus]:
    return [m for m in (rec.upper, rec.c_0) if m is not None]


def _line_difference(m: FourierModulus, n: int, d: float) -> float:
    """A coefficient difference `d` of mode `n`, measured on the sampling line of `m`."""
    return 0.0 if d == 0 else d * m.line_scale(n)


def _phase_shift(a: Sequence[FourierModulus], b: Sequence[FourierModulus], tol: float) -> Optional[tuple[int, complex, complex, FourierModulus]]:
    """
    The lowest mode resolved in both and above `tol` on both sampling lines, as
    ``(n, c_a, c_b, list of b holding it)``.
    """
    best: Optional[tuple[int, complex, complex, FourierModulus]] = None
    for ma, mb in zip(a, b):
        for n in sorted(range(-ma.nmax, ma.nmax + 1), key=lambda k: (abs(k), -k)):
            if n == 0 or not (ma.is_resolved(n) and mb.is_resolved(n)):
                continue
            if ma.line_amplitude(n) > tol and mb.line_amplitude(n) > tol:
                if best is None or abs(n) < abs(best[0]):
                    best = (n, ma.c(n), mb.c(n), mb)
                break
    return best


def _shift_residual(
    a: Sequence[FourierModulus], b: Sequence[FourierModulus], C: float
) -> float:
    worst = 0.0
    for ma, mb in zip(a, b):
        shifted = ma.shifted(C)
        for n in shifted.modes():
            worst = max(worst, _line_difference(mb, n, abs(mb.c(n) - shifted.c(n))))
    return worst


def _wrap(C: float) -> float:
    C = math.fmod(C, 1.0)
    if C > 0.5:
        C -= 1.0
    elif C <= -0.5:
        C += 1.0
    return C


def compare_records(
    r1: ModulusRecord, r2: ModulusRecord, tol: float = 1e-6
) -> tuple[bool, Optional[float], float, str]:
    """
    Whether ``c'_n = c_n exp(-2 pi i n C)`` for one real C and every mode. Returns
    ``(equivalent, C, residual, reason)``; mode differences are measured on the sampling
    lines, where the coefficients were resolved.
    """
    db = abs(r1.b - r2.b)
    if db > tol:
        return False, None, db, "formal invariant b differs"
    a, b = _coefficient_lists(r1), _coefficient_lists(r2)
    if len(a) != len(b):
        raise ComparisonError("Records carry different coefficient lists.")
    for ma, mb in zip(a, b):
        d0 = abs(ma.c(0) - mb.c(0))
        if d0 > tol:
            return False, None, d0, "constant terms differ"
    mode = _phase_shift(a, b, tol)
    if mode is None:
        residual = _shift_residual(a, b, 0.0)
        return residual <= tol, 0.0, residual, "" if residual <= tol else "nonzero modes in one modulus only"
    n, ca, cb, mb = mode
    dm = _line_difference(mb, n, abs(abs(ca) - abs(cb)))
    if dm > tol:
        return False, None, dm, f"|c_{n}| differs"
    C0 = -cmath.phase(cb / ca) / (2 * math.pi * n)
    candidates = [_wrap(C0 + k / abs(n)) for k in range(abs(n))]
    scored = sorted((_shift_residual(a, b, C), C) for C in candidates)
    residual, C = scored[0]
    if residual > tol:
        return False, None, residual, "no single real shift matches all modes"
    return True, C, residual, ""


def compare_moduli(
    M1: ModulusData, M2: ModulusData, tol: float = 1e-6
) -> EquivalenceReport:
    """
    Compare two moduli record by record under ``Psi' = T_C o Psi o T_{-C}`` with C real.
    Strong moduli must also satisfy ``C(conj e) = conj C(e)`` (mod 1) on paired rays.
    """
    if M1.normalization != M2.normalization:
        raise ComparisonError(
            "Moduli use different normalizations.",
            first=M1.normalization,
            second=M2.normalization,
        )
    if len(M1.records) != len(M2.records):
        raise ComparisonError("Moduli are sampled on different grids.")
    for r1, r2 in zip(M1.records, M2.records):
        if abs(r1.eps_value - r2.eps_value) > 1e-12 or abs(r1.arg_lift - r2.arg_lift) > 1e-12:
            raise ComparisonError(
                "Moduli are sampled on different grids.",
                first=r1.eps_value,
                second=r2.eps_value,
            )

    shifts: list[Optional[float]] = []
    worst = 0.0
    inconclusive = False
    for i, (r1, r2) in enumerate(zip(M1.records, M2.records)):
        if r1.failed or r2.failed:
            shifts.append(None)
            inconclusive = True
            continue
        ok, C, residual, reason = compare_records(r1, r2, tol)
        worst = max(worst, residual)
        if not ok:
            shifts.append(None)
            return EquivalenceReport("inequivalent", shifts, worst, i, reason)
        shifts.append(C)

    if M1.normalization == "strong":
        for i, r in enumerate(M1.records):
            C = shifts[i]
            if C is None:
                continue
            for j, other in enumerate(M1.records):
                D = shifts[j]
                if D is None or abs(other.eps_value - np.conj(r.eps_value)) > 1e-12:
                    continue
                if abs(other.arg_lift - (2 * math.pi - r.arg_lift)) > 1e-12:
                    continue
                gap = abs(_wrap(C - D))
                if gap > tol:
                    return EquivalenceReport(
                        "inequivalent", shifts, max(worst, gap), i, "shifts not conjugate-symmetric"
                    )
    verdict: Verdict = "inconclusive" if inconclusive else "equivalent"
    return EquivalenceReport(verdict, shifts, worst)


# =============================================================================
# Conjugacy
# =============================================================================
@dataclasses.dataclass
class ConjugacyResult:
    """Sampled conjugacy ``h`` with ``h o f1 = f2 o h``."""

    eps: float
    points: list[complex]
    values: list[complex]
    shift: float
    conjugation_residual: float
    seam_residual: float
    skipped: int = 0

    def to_json(self) -> dict[str, Any]:
        return {
            "eps": self.eps,
            "shift": self.shift,
            "points": [complex_to_pair(z) for z in self.points],
            "values": [complex_to_pair(z) for z in self.values],
            "conjugation_residual": self.conjugation_residual,
            "seam_residual": self.seam_residual,
            "skipped": self.skipped,
        }


def conjugacy_grid(radius: float, n: int = 20, eps: float = 0.0, clearance: float = 0.03) -> list[complex]:
    """An n x n grid on ``[-radius/3, radius/3]^2`` without the points near the fixed points."""
    side = radius / 3
    xs = np.linspace(-side, side, n)
    root = complex(np.sqrt(complex(eps)))
    out: list[complex] = []
    for x in xs:
        for y in xs:
            z = complex(x, y)
            if min(abs(z - root), abs(z + root)) > clearance:
                out.append(z)
    return out


def _pull_back(
    source: FatouCoordinate, target: FatouCoordinate, z: complex, shift: float
) -> complex:
    """The point w with ``target(w) - shift = source(z)``."""
    W = source.at(z) + shift
    seed = (z, target.chart.principal(z))
    return target.inverse(W, seed)[1]


def _pull_back_sides(
    sides: Sequence[tuple[FatouCoordinate, FatouCoordinate]], z: complex, shift: float
) -> list[Optional[complex]]:
    """`_pull_back` on every side; None where the point lies outside that side's domain."""
    out: list[Optional[complex]] = []
    for source, target in sides:
        try:
            out.append(_pull_back(source, target, z, shift))
        except (EscapeError, InverseError, FatouConvergenceError):
            out.append(None)
    return out


def build_conjugacy(
    f1: GermFamily,
    f2: GermFamily,
    eps: float,
    grid: Optional[Sequence[complex]] = None,
    config: Optional[RunConfig] = None,
    tol: float = 1e-6,
) -> ConjugacyResult:
    """
    ``h = (Phi2)^{-1} o Phi1`` on each side, after aligning the Fatou coordinates of the
    second family so that both have the same transition maps.

    Each grid point uses the + side when it lies in its domain and the - side
    otherwise; the seam is measured where both apply. Points in neither domain are
    skipped.
    """
    config = config or RunConfig()
    ctx1 = FatouContext.build(f1, config)
    ctx2 = FatouContext.build(f2, config)
    rec1 = modulus_record(ctx1, eps)
    rec2 = modulus_record(ctx2, eps)
    ok, C, residual, reason = compare_records(rec1, rec2, tol)
    if not ok or C is None:
        raise ClassificationError(
            "The families have different moduli; no conjugacy exists.",
            reason=reason,
            residual=residual,
        )
    plus1, minus1 = ctx1.pair(eps)
    plus2, minus2 = ctx2.pair(eps)
    sides = [(plus1, plus2), (minus1, minus2)]
    if grid is None:
        grid = conjugacy_grid(f1.radius, 20, eps)

    points: list[complex] = []
    values: list[complex] = []
    seam = 0.0
    for z in grid:
        hp, hm = _pull_back_sides(sides, z, C)
        if hp is not None and hm is not None:
            seam = max(seam, abs(hp - hm))
        h = hp if hp is not None else hm
        if h is not None:
            points.append(z)
            values.append(h)
    skipped = len(grid) - len(points)
    if not points:
        raise ClassificationError("No grid point lies in a Fatou domain.", eps=eps)

    worst = 0.0
    for z, hz in zip(points, values):
        fz = complex(evaluate(f1, eps, z, check_domain=False))
        lhs = next((w for w in _pull_back_sides(sides, fz, C) if w is not None), None)
        if lhs is None:
            continue
        rhs = complex(evaluate(f2, eps, hz, check_domain=False))
        worst = max(worst, abs(lhs - rhs))
    if seam > max(tol, 1e-7):
        raise NormalizationMismatchError(
            "The two sides of the conjugacy disagree on their overlap.", seam=seam
        )
    status(
        f"Conjugacy at eps={eps:g}: shift {C:.3g}, residual {worst:.2e}, {skipped} skipped",
        config.verbose,
    )
    return ConjugacyResult(eps, points, values, C, worst, seam, skipped)



# =============================================================================
# Square roots
# =============================================================================
def fit_sqrt_shift(upper: FourierModulus, lower: FourierModulus) -> tuple[float, float]:
    """
    Imaginary shift y and residual of ``c_inf_n (-1)^n = conj(c_0_{-n}) exp(-4 pi n y)``
    over the modes resolved on both lines. y is fitted to the log-moduli, weighted by
    the squared amplitude on the sampling lines; residuals are measured on the upper line.
    """
    pairs: list[tuple[int, complex, complex, float]] = []
    worst = 0.0
    for n in range(0, min(upper.nmax, lower.nmax) + 1):
        a, b = upper.c(n), lower.c(-n)
        if upper.is_resolved(n) and lower.is_resolved(-n):
            if n > 0 and a != 0 and b != 0:
                weight = min(upper.line_amplitude(n), lower.line_amplitude(-n)) ** 2
                pairs.append((n, a, b, weight))
            elif n == 0:
                worst = max(worst, abs(a - np.conj(b)))
        else:
            worst = max(worst, upper.line_amplitude(n), lower.line_amplitude(-n))
    y = 0.0
    if pairs:
        num = sum(w * n * math.log(abs(a) / abs(b)) for n, a, b, w in pairs)
        den = sum(w * n * n for n, _, _, w in pairs)
        if den > 0:
            y = -num / (4 * math.pi * den)
    for n, a, b, _ in pairs:
        diff = abs(a * (-1) ** n - np.conj(b) * math.exp(-4 * math.pi * n * y))
        worst = max(worst, diff * upper.line_scale(n))
    return y, worst


@dataclasses.dataclass
class SquareRootVerdict:
    passes: bool
    residual: float
    shifts: list[Optional[float]]
    residuals: list[Optional[float]]

    def to_json(self) -> dict[str, Any]:
        return {
            "verdict": "root" if self.passes else "no-root",
            "residual": self.residual,
            "shifts": self.shifts,
            "residuals": self.residuals,
        }


def square_root_test(Mg: ModulusData, tol: float = 1e-6) -> SquareRootVerdict:
    """
    Whether the holomorphic family behind `Mg` is the second iterate of an
    antiholomorphic family: on every record (or pair of conjugate rays) the upper and
    lower transition maps must be exchanged by ``Sigma T_1/2`` after an imaginary shift
    of the Fatou coordinates.
    """
    shifts: list[Optional[float]] = []
    residuals: list[Optional[float]] = []
    for rec in Mg.records:
        partner = rec
        if Mg.normalization == "strong":
            found = conjugate_partner(rec, Mg.records)
            if found is None:
                shifts.append(None)
                residuals.append(None)
                continue
            partner = found
        if rec.failed or partner.failed or rec.upper is None or partner.c_0 is None:
            shifts.append(None)
            residuals.append(None)
            continue
        y, res = fit_sqrt_shift(rec.upper, partner.c_0)
        shifts.append(y)
        residuals.append(res)
    measured = [r for r in residuals if r is not None]
    if not measured:
        raise CriterionError("No record allows the square-root criterion to be checked.")
    worst = max(measured)
    return SquareRootVerdict(worst <= tol, worst, shifts, residuals)


@dataclasses.dataclass
class SquareRootResult:
    family: GermFamily
    fit_residual: float
    residual: float
    verdict: SquareRootVerdict

    def to_json(self) -> dict[str, Any]:
        out = self.verdict.to_json()
        out.update(
            {
                "family": self.family.to_json(),
                "fit_residual": self.fit_residual,
                "reconstruction_residual": self.residual,
            }
        )
        return out


def _half_step(coord: FatouCoordinate, z: complex, shift: complex) -> complex:
    """The point w with ``coord(w) = conj(coord(z)) + shift``, seeded at conj z."""
    zc = complex(np.conj(z))
    target = complex(np.conj(coord.at(z))) + shift
    return coord.inverse(target, (zc, coord.chart.principal(zc)))[1]


def _root_samples(
    context: FatouContext, eps: float, y: float, points: Sequence[complex]
) -> list[complex]:
    """
    ``f(z) = Phi^{-1}(conj(Phi(z)) + 1/2 - 2iy)`` for the + Fatou coordinate of g.

    Points outside the + domain use the - coordinate, whose constant is measured at
    the first point both coordinates reach.
    """
    plus, minus = context.pair(eps)
    shift_plus = 0.5 - 2j * y
    shift_minus: Optional[complex] = None
    out: list[Optional[complex]] = []
    missed: list[int] = []
    for i, z in enumerate(points):
        try:
            fz = _half_step(plus, z, shift_plus)
        except (EscapeError, InverseError, FatouConvergenceError):
            out.append(None)
            missed.append(i)
            continue
        out.append(fz)
        if shift_minus is None:
            try:
                shift_minus = minus.at(fz) - complex(np.conj(minus.at(z)))
            except (EscapeError, InverseError, FatouConvergenceError):
                pass
    if missed:
        if shift_minus is None:
            raise GeometryError(
                "No sample point lies in both Fatou domains.", eps=eps, missed=len(missed)
            )
        for i in missed:
            out[i] = _half_step(minus, points[i], shift_minus)
    return [complex(v) for v in out if v is not None]


def extract_square_root(
    g: GermFamily,
    config: Optional[RunConfig] = None,
    tol: float = 1e-6,
    sample_radius: Optional[float] = None,
) -> SquareRootResult:
    """
    Antiholomorphic family f with ``f_{conj eps} o f_eps = g_eps``, sought in prepared
    shape (fixing the origin with multiplier one), fitted by least squares to sampled
    values ``f = Phi^{-1} o Sigma T_1/2 o Phi`` on Chebyshev parameter nodes.
    """
    config = config or RunConfig()
    if g.conjugating:
        raise CriterionError("The square root is extracted from a holomorphic family.")
    context = FatouContext.build(g, config)
    dw, de = g.deg_w, g.deg_eps
    nodes = [float(e) for e in chebyshev_nodes(de + 3, g.param_radius / 4)]
    data = weak_modulus(g, nodes, config, context)
    verdict = square_root_test(data, tol)
    if not verdict.passes:
        raise CriterionError(
            "The modulus fails the square-root criterion.",
            residual=verdict.residual,
            verdict="no-root",
        )

    rho = sample_radius or g.radius / 2
    nz = 2 * (dw + 1) + 6
    angles = (np.arange(nz) + 0.5) * 2 * math.pi / nz
    zs = [complex(rho * np.exp(1j * t)) for t in angles]

    rows: list[Array] = []
    rhs: list[complex] = []
    e_scale = g.param_radius / 4
    for eps, y in zip(nodes, verdict.shifts):
        status(f"  square root samples at eps = {eps:.4g}", config.verbose)
        values = _root_samples(context, eps, y or 0.0, zs)
        for z, fz in zip(zs, values):
            w = np.conj(z) / rho
            row = np.array(
                [[w**j * (eps / e_scale) ** k for k in range(de + 1)] for j in range(dw + 1)],
                dtype=complex,
            ).ravel()
            rows.append(row)
            # Known terms: the origin is fixed with multiplier one at eps = 0.
            rhs.append(fz - np.conj(z))
    A = np.array(rows)
    keep = np.ones((dw + 1) * (de + 1), dtype=bool)
    keep[0] = False  # c[0, 0]
    keep[de + 1] = False  # c[1, 0]
    sol, *_ = np.linalg.lstsq(A[:, keep], np.array(rhs), rcond=None)
    fit_residual = float(np.max(np.abs(A[:, keep] @ sol - np.array(rhs))))
    full = np.zeros((dw + 1) * (de + 1), dtype=complex)
    full[keep] = sol
    coeffs = full.reshape(dw + 1, de + 1)
    coeffs = coeffs / (rho ** np.arange(dw + 1)).reshape(-1, 1)
    coeffs = coeffs / (e_scale ** np.arange(de + 1)).reshape(1, -1)
    coeffs[1, 0] += 1
    if g.series.is_real():
        coeffs = coeffs.real.astype(complex)
    series = SeriesFamily(coeffs, conjugating=True)
    label = f"square root of {g.label}" if g.label else "square root"
    f = GermFamily(series, g.radius, g.param_radius, label)
    residual = reconstruction_residual(f, g, nodes, [z * 0.6 for z in zs])
    return SquareRootResult(f, fit_residual, residual, verdict)


def reconstruction_residual(
    f: GermFamily, g: GermFamily, eps_values: Sequence[float], points: Sequence[complex]
) -> float:
    """sup of ``|f_{conj eps}(f_eps(z)) - g_eps(z)|``."""
    worst = 0.0
    for eps in eps_values:
        for z in points:
            once = evaluate(f, eps, z, check_domain=False)
            twice = evaluate(f, np.conj(eps), once, check_domain=False)
            worst = max(worst, abs(complex(twice) - complex(g.series.evaluate(eps, z))))
    return worst


# =============================================================================
# Invariant curve
# =============================================================================
def invariant_curve_test(record: ModulusRecord, tol: float = 1e-6) -> tuple[bool, float]:
    """
    At eps = 0 the germ has an invariant analytic curve through the origin iff the
    transition maps commute with ``T_1/2``, i.e. every odd mode vanishes on the sampling
    lines.
    """
    worst = 0.0
    for m in _coefficient_lists(record):
        for n in m.modes():
            if n % 2:
                worst = max(worst, m.line_amplitude(n))
    return worst <= tol, worst


# =============================================================================
# Return-map linearizers and compatibility
# =============================================================================
def alpha_plus(eps: Param, b: complex, scale: complex = 1.0) -> complex:
    return 1j * math.pi * scale / param_root(eps) + 1j * math.pi * b


def linearize_return_map(
    R: Callable[[complex], complex],
    shift: complex,
    points: Sequence[complex],
    tol: float = 1e-13,
    max_iter: int = 2000,
) -> list[complex]:
    """
    ``H(W) = lim (R^n(W) - n shift)`` for a map R asymptotic to ``T_shift``; the limit is
    reached when one more step changes it by less than `tol`.
    """
    out: list[complex] = []
    for W0 in points:
        W = complex(W0)
        value = W
        for n in range(1, max_iter + 1):
            W = R(W)
            new = W - n * shift
            if abs(new - value) < tol * (1 + abs(new)):
                value = new
                break
            value = new
        else:
            raise FatouConvergenceError(
                "The return-map linearizer did not converge.", start=W0
            )
        out.append(value)
    return out


def _invert_series_map(m: FourierModulus, V: complex, tol: float = 1e-15) -> complex:
    """Newton inversion of ``W + sum c_n exp(2 pi i n W)``."""
    W = V - m.c(0)
    for _ in range(60):
        val = m.value(W) - V
        der = 1 + sum(
            2j * math.pi * n * m.c(n) * cmath.exp(2j * math.pi * n * W)
            for n in m.modes()
            if n != 0
        )
        step = val / der
        W -= step
        if abs(step) < tol * (1 + abs(W)):
            return W
    raise InverseError("Inversion of the transition series did not converge.", target=V)


class ReturnLinearizer:
    """
    H with ``H o R = T_{-alpha+} o H`` and ``H - id -> 0`` upward, for the return map
    ``R = Psi o T_L`` when ``arg eps < pi`` and ``R = T_L o Psi`` on the second sheet.

    Only the nonnegative modes of `psi` are used: the map is continued to the whole upper
    half-plane, where the iteration runs. The dropped negative modes must stay below
    `mode_tol` up to the height `band_top` (two units above the sampling line by default).
    """

    def __init__(
        self,
        psi: FourierModulus,
        eps: Param,
        b: complex,
        scale: complex = 1.0,
        tol: float = 1e-13,
        band_top: Optional[float] = None,
        mode_tol: float = 1e-10,
    ):
        if band_top is None:
            band_top = psi.height + 2.0 if math.isfinite(psi.height) else 0.0
        dropped = 0.0
        for n in psi.modes():
            c = abs(psi.c(n))
            if n < 0 and c > 0:
                exponent = math.log(c) - 2 * math.pi * n * band_top
                dropped = max(dropped, math.exp(min(exponent, 700.0)))
        if dropped > mode_tol:
            raise ResolutionError(
                "The transition map has negative modes that do not vanish on the band.",
                dropped=dropped,
                band_top=band_top,
            )
        self.psi = FourierModulus(
            psi.nmax,
            tuple(psi.c(n) if n >= 0 else 0j for n in psi.modes()),
            psi.resolved,
            psi.aliasing,
            psi.height,
            psi.x0,
        )
        self.eps = eps
        self.alpha = alpha_plus(eps, b, scale)
        self.L = -1j * math.pi * scale / param_root(eps)
        self.translate_after = isinstance(eps, SectorParameter) and eps.arg > math.pi
        self.tol = tol
        if abs(self.alpha.imag) < 1e-3:
            raise GeometryError(
                "The return map does not move upward; the linearizer needs Im alpha+ != 0.",
                alpha=self.alpha,
            )

    def R(self, W: complex) -> complex:
        if self.translate_after:
            return self.psi.value(W) + self.L
        return self.psi.value(W + self.L)

    def R_inv(self, W: complex) -> complex:
        if self.translate_after:
            return _invert_series_map(self.psi, W - self.L)
        return _invert_series_map(self.psi, W) - self.L

    def __call__(self, W: complex) -> complex:
        if self.alpha.imag > 0:
            return linearize_return_map(self.R_inv, self.alpha, [W], self.tol)[0]
        return linearize_return_map(self.R, -self.alpha, [W], self.tol)[0]

    def inverse(self, V: complex, tol: float = 1e-14) -> complex:
        W = complex(V)
        for _ in range(100):
            step = self(W) - V
            W -= step
            if abs(step) < tol * (1 + abs(W)):
                return W
        raise InverseError("Inversion of the linearizer did not converge.", target=V)

    def residual(self, points: Sequence[complex]) -> float:
        """sup of ``|H(R(W)) - H(W) + alpha+|``."""
        return max(abs(self(self.R(W)) - self(W) + self.alpha) for W in points)

    def decay(self, x: float = 0.25, steps: Sequence[float] = (1.0, 2.0, 3.0)) -> list[float]:
        """``|H(W) - W|`` at `steps` above the sampling line."""
        base = self.psi.height if math.isfinite(self.psi.height) else 0.0
        return [abs(self(complex(x, base + s)) - complex(x, base + s)) for s in steps]


def return_linearizer(
    record: ModulusRecord, tol: float = 1e-13
) -> ReturnLinearizer:
    if record.upper is None:
        raise CriterionError("The record has no upper transition map.")
    return ReturnLinearizer(record.upper, record.eps, record.b, tol=tol)


@dataclasses.dataclass
class CompatibilityReport:
    residual: float
    D: complex
    D_prime: complex
    band: tuple[float, float]

    def to_json(self) -> dict[str, Any]:
        return {
            "residual": self.residual,
            "D": complex_to_pair(self.D),
            "D_prime": complex_to_pair(self.D_prime),
            "band": list(self.band),
        }


def compatibility_from_linearizers(
    H_hat: Callable[[complex], complex],
    H_hat_inv: Callable[[complex], complex],
    H_tilde: Callable[[complex], complex],
    root: complex,
    band: tuple[float, float] = (2.5, 3.5),
    n: int = 6,
) -> CompatibilityReport:
    """
    Residual of ``H~ o N o H^^-1 o N^-1 = T_D o N o H~ o N^-1 o H^^-1 o T_D'`` with
    ``N(W) = conj(W) + 1/2 + i pi / root``; D and D' are fitted by least squares.
    """
    shift = 0.5 + 1j * math.pi / root

    def N(W: complex) -> complex:
        return complex(np.conj(W)) + shift

    def N_inv(W: complex) -> complex:
        return complex(np.conj(W - shift))

    points = [
        complex(x, y)
        for x in np.linspace(0.0, 1.0, n, endpoint=False)
        for y in np.linspace(band[0], band[1], 3)
    ]
    lhs = [H_tilde(N(H_hat_inv(N_inv(W)))) for W in points]

    def rhs(D: complex, Dp: complex) -> list[complex]:
        return [D + N(H_tilde(N_inv(H_hat_inv(W + Dp)))) for W in points]

    def fun(x: Array) -> Array:
        vals = np.array(rhs(complex(x[0], x[1]), complex(x[2], x[3]))) - np.array(lhs)
        return np.concatenate([vals.real, vals.imag])

    fit = least_squares(fun, np.zeros(4), xtol=1e-15, ftol=1e-15, gtol=1e-15)
    D, Dp = complex(fit.x[0], fit.x[1]), complex(fit.x[2], fit.x[3])
    residual = float(np.max(np.abs(np.array(rhs(D, Dp)) - np.array(lhs))))
    return CompatibilityReport(residual, D, Dp, band)


def compatibility_residual(
    fam: GermFamily,
    eps: float,
    config: Optional[RunConfig] = None,
    data: Optional[ModulusData] = None,
) -> CompatibilityReport:
    """
    Compatibility of the two determinations of the strong modulus at ``|eps|``: the
    linearizers at arg 0 and arg 2 pi must satisfy the real-parameter condition.
    """
    config = config or RunConfig()
    if eps <= 0:
        raise GeometryError("The compatibility condition is checked at eps > 0.", eps=eps)
    if data is None:
        data = strong_modulus(fam, [0.0, 2 * math.pi], [eps], config)
    hat = tilde = None
    for rec in data.records:
        if rec.failed or abs(abs(rec.eps_value) - eps) > 1e-15:
            continue
        if abs(rec.arg_lift) < 1e-12:
            hat = rec
        elif abs(rec.arg_lift - 2 * math.pi) < 1e-12:
            tilde = rec
    if hat is None or tilde is None:
        raise DataError("Compatibility needs records at arg 0 and arg 2 pi.", eps=eps)
    H_hat = return_linearizer(hat)
    H_tilde = return_linearizer(tilde)
    h = H_hat.psi.height if math.isfinite(H_hat.psi.height) else config.height
    band = (h + 1.0, h + 2.0)
    root = SectorParameter(eps, 0.0).sqrt
    return compatibility_from_linearizers(H_hat, H_hat.inverse, H_tilde, root, band)
