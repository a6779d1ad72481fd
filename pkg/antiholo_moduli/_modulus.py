from __future__ import annotations

import cmath
import dataclasses
import math
import sys
from pathlib import Path
from typing import Any, Literal, Optional, Sequence, Union

if sys.version_info >= (3, 11):
    from typing import NotRequired, TypedDict
else:
    from typing_extensions import NotRequired, TypedDict

import numpy as np
import numpy.typing as npt

from ._config import RunConfig
from ._errors import (
    DataError,
    FatouConvergenceError,
    GeometryError,
    ModuliError,
    ResolutionError,
)
from ._fatou import (
    FatouContext,
    FatouCoordinate,
    Normalization,
    TransitionSamples,
    antiholomorphic_defects,
    domain_kind,
    glutsyuk_residual,
    sampling_height,
    sampling_origin,
    transition_samples,
)
from ._germ import (
    GermFamily,
    Param,
    SectorParameter,
    param_is_real,
    param_root,
    param_value,
)
from ._utils import complex_to_pair, pair_to_complex, read_json, status, write_json
from ._version import FILE_FORMAT_VERSION

Array = npt.NDArray[Any]
MapKind = Literal["inf", "0", "G", "L"]

# A record whose identity residuals exceed this is flagged invalid.
HARD_CAP = 1e-3


# Layout of one record in a modulus file.
class ModulusRecordJson(TypedDict):
    eps_re: float
    eps_im: float
    arg_lift: float
    b: float
    b_im: float
    c_inf: Optional[list[list[float]]]
    c_0: Optional[list[list[float]]]
    c_G: Optional[list[list[float]]]
    resolved: dict[str, Optional[list[bool]]]
    residuals: dict[str, Any]
    normalization: dict[str, Any]
    failed: NotRequired[bool]
    heights: NotRequired[dict[str, Optional[float]]]


# =============================================================================
# Fourier coefficients
# =============================================================================
@dataclasses.dataclass(frozen=True)
class FourierModulus:
    """
    Coefficients ``c_n``, ``|n| <= nmax``, of ``Psi(W) - W = sum c_n exp(2 pi i n W)``.

    Modes whose raw discrete Fourier amplitude is below the noise floor are stored as
    zero and marked unresolved.
    """

    nmax: int
    coeffs: tuple[complex, ...]
    resolved: tuple[bool, ...]
    aliasing: float
    height: float
    x0: float

    def c(self, n: int) -> complex:
        if abs(n) > self.nmax:
            return 0j
        return self.coeffs[n + self.nmax]

    def is_resolved(self, n: int) -> bool:
        return abs(n) <= self.nmax and self.resolved[n + self.nmax]

    def modes(self) -> range:
        return range(-self.nmax, self.nmax + 1)

    def value(self, W: complex) -> complex:
        """``W + sum c_n exp(2 pi i n W)``."""
        return W + sum(self.c(n) * cmath.exp(2j * math.pi * n * W) for n in self.modes())

    def shifted(self, C: float) -> FourierModulus:
        """Coefficients of ``T_C o Psi o T_{-C}``."""
        coeffs = tuple(
            self.c(n) * cmath.exp(-2j * math.pi * n * C) for n in self.modes()
        )
        return dataclasses.replace(self, coeffs=coeffs)

    def max_nonconstant(self) -> float:
        return max((abs(self.c(n)) for n in self.modes() if n != 0), default=0.0)

    def line_scale(self, n: int) -> float:
        """
        ``exp(-2 pi n height)``: the size on the sampling line of mode `n` with unit
        coefficient. Records without a known height compare coefficients directly.
        """
        if not math.isfinite(self.height):
            return 1.0
        exponent = -2 * math.pi * n * self.height
        return math.exp(exponent) if exponent < 700 else math.inf

    def line_amplitude(self, n: int) -> float:
        """Size of mode `n` on the sampling line."""
        c = abs(self.c(n))
        return 0.0 if c == 0 else c * self.line_scale(n)

    def max_line_amplitude(self) -> float:
        return max((self.line_amplitude(n) for n in self.modes() if n != 0), default=0.0)

    def to_json(self) -> list[list[float]]:
        return [complex_to_pair(c) for c in self.coeffs]

    @classmethod
    def from_json(
        cls,
        pairs: Sequence[Sequence[float]],
        resolved: Optional[Sequence[bool]] = None,
        height: float = math.nan,
    ) -> FourierModulus:
        if len(pairs) % 2 != 1:
            raise DataError("A coefficient list must have odd length (modes -nmax..nmax).")
        coeffs = tuple(pair_to_complex(p) for p in pairs)
        nmax = len(coeffs) // 2
        if resolved is None:
            resolved = [c != 0 or n == nmax for n, c in enumerate(coeffs)]
        return cls(nmax, coeffs, tuple(bool(r) for r in resolved), 0.0, height, 0.0)


def fourier_from_samples(
    samples: TransitionSamples, nmax: int, tol: float = 1e-8
) -> FourierModulus:
    """
    Discrete Fourier transform of ``Psi(W) - W`` sampled over one period, rescaled from
    the sampling line to ``Im W = 0``.
    """
    values = np.asarray(samples.values, dtype=complex)
    M = len(values)
    if M < 2 * nmax + 2:
        raise ResolutionError(
            "Too few samples for the requested number of modes.", samples=M, nmax=nmax
        )
    F = np.fft.fft(values) / M
    freqs = np.fft.fftfreq(M, 1 / M).astype(int)
    high = [abs(F[i]) for i, n in enumerate(freqs) if abs(n) > nmax]
    aliasing = float(max(high, default=0.0))
    if aliasing > tol:
        raise ResolutionError(
            "Aliasing estimate exceeds the tolerance; use a larger height or more samples.",
            aliasing=aliasing,
            height=samples.height,
        )
    floor = max(100 * aliasing, 1e-15 * (1 + abs(F[0])))
    coeffs: list[complex] = []
    resolved: list[bool] = []
    y = samples.height
    for n in range(-nmax, nmax + 1):
        raw = F[n % M]
        ok = n == 0 or abs(raw) > floor
        resolved.append(ok)
        if ok:
            coeffs.append(
                complex(raw * math.exp(2 * math.pi * n * y) * cmath.exp(-2j * math.pi * n * samples.x0))
            )
        else:
            coeffs.append(0j)
    return FourierModulus(nmax, tuple(coeffs), tuple(resolved), aliasing, y, samples.x0)


# =============================================================================
# Transition maps
# =============================================================================
class TransitionMap:
    """
    ``Psi = Phi- o T_{-i pi b} o (Phi+)^{-1}`` on the horizontal line ``Im W = height``,
    above the fundamental hole for the upper maps and below it for the lower ones.
    """

    def __init__(
        self,
        kind: MapKind,
        plus: FatouCoordinate,
        minus: FatouCoordinate,
        height: float,
        eps: Param,
    ):
        self.kind = kind
        self.plus = plus
        self.minus = minus
        self.height = height
        self.eps = eps

    def __call__(self, W: complex, seed: Optional[tuple[complex, complex]] = None) -> complex:
        Z, z = self.plus.inverse(W, seed)
        return W + self.minus.at(z) - self.plus.at(z, Z)

    def samples(self, M: int, height: Optional[float] = None) -> TransitionSamples:
        h = self.height if height is None else height
        return transition_samples(self.plus, self.minus, h, M)

    def line_points(self, n: int) -> list[complex]:
        x0 = sampling_origin(self.plus.chart)
        return [complex(x0 + (j + 0.5) / n, self.height) for j in range(n)]

    def commutation_residual(self, points: Sequence[complex]) -> float:
        """sup of ``|Psi(W + 1) - Psi(W) - 1|``."""
        return max(abs(self(W + 1) - self(W) - 1) for W in points)


def transition_maps(
    plus: FatouCoordinate, minus: FatouCoordinate, eps: Param, height: float = 1.5
) -> dict[str, TransitionMap]:
    """
    The transition maps `height` above and below the fundamental hole: ``inf`` and ``0``
    for eps <= 0 and sector parameters, ``G`` (the upper one) and ``L`` for eps > 0.
    """
    up = sampling_height(plus.chart, height)
    down = sampling_height(plus.chart, -height)
    if domain_kind(eps) == "glutsyuk":
        return {
            "G": TransitionMap("G", plus, minus, up, eps),
            "L": TransitionMap("L", plus, minus, down, eps),
        }
    return {
        "inf": TransitionMap("inf", plus, minus, up, eps),
        "0": TransitionMap("0", plus, minus, down, eps),
    }


def sample_count(nmax: int) -> int:
    return max(4 * nmax, 64)


def fourier_modulus(
    psi: TransitionMap,
    nmax: int = 16,
    height: Optional[float] = None,
    tol: float = 1e-8,
) -> FourierModulus:
    """Fourier coefficients of a transition map, sampled on its line (or at `height`)."""
    if nmax < 1 or nmax > 32:
        raise ResolutionError("nmax must lie in [1, 32].", nmax=nmax)
    return fourier_from_samples(psi.samples(sample_count(nmax), height), nmax, tol)


# =============================================================================
# Records
# =============================================================================
@dataclasses.dataclass
class ModulusRecord:
    """One parameter sample of a modulus. `c_inf` is above the hole, `c_0` below."""

    eps: Param
    b: complex
    c_inf: Optional[FourierModulus]
    c_0: Optional[FourierModulus]
    c_G: Optional[FourierModulus] = None
    residuals: dict[str, Any] = dataclasses.field(default_factory=dict)
    normalization: dict[str, Any] = dataclasses.field(default_factory=dict)
    failed: bool = False

    @property
    def eps_value(self) -> complex:
        return param_value(self.eps)

    @property
    def arg_lift(self) -> float:
        if isinstance(self.eps, SectorParameter):
            return self.eps.arg
        return cmath.phase(self.eps_value) if self.eps_value != 0 else 0.0

    @property
    def upper(self) -> Optional[FourierModulus]:
        return self.c_G if self.c_G is not None else self.c_inf

    def to_json(self) -> ModulusRecordJson:
        e = self.eps_value

        def coeffs(m: Optional[FourierModulus]) -> Optional[list[list[float]]]:
            return None if m is None else m.to_json()

        def resolved(m: Optional[FourierModulus]) -> Optional[list[bool]]:
            return None if m is None else list(m.resolved)

        def height(m: Optional[FourierModulus]) -> Optional[float]:
            return None if m is None or not math.isfinite(m.height) else m.height

        out: ModulusRecordJson = {
            "eps_re": e.real,
            "eps_im": e.imag,
            "arg_lift": self.arg_lift,
            "b": self.b.real,
            "b_im": self.b.imag,
            "c_inf": coeffs(self.c_inf),
            "c_0": coeffs(self.c_0),
            "c_G": coeffs(self.c_G),
            "resolved": {
                "c_inf": resolved(self.c_inf),
                "c_0": resolved(self.c_0),
                "c_G": resolved(self.c_G),
            },
            "residuals": _jsonable(self.residuals),
            "normalization": _jsonable(self.normalization),
            "heights": {
                "c_inf": height(self.c_inf),
                "c_0": height(self.c_0),
                "c_G": height(self.c_G),
            },
        }
        if self.failed:
            out["failed"] = True
        return out

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> ModulusRecord:
        try:
            e = complex(float(data["eps_re"]), float(data["eps_im"]))
            arg = float(data.get("arg_lift", cmath.phase(e) if e != 0 else 0.0))
            b = complex(float(data["b"]), float(data.get("b_im", 0.0)))
        except (KeyError, TypeError, ValueError) as err:
            raise DataError(f"Malformed modulus record: {err}") from err
        eps: Param = SectorParameter(abs(e), arg)
        if e.imag == 0 and abs(arg - cmath.phase(e)) < 1e-12:
            eps = e.real
        res = data.get("resolved") or {}
        heights = data.get("heights") or {}

        def load(name: str) -> Optional[FourierModulus]:
            pairs = data.get(name)
            if pairs is None:
                return None
            h = heights.get(name)
            return FourierModulus.from_json(
                pairs, res.get(name), math.nan if h is None else float(h)
            )

        return cls(
            eps,
            b,
            load("c_inf"),
            load("c_0"),
            load("c_G"),
            dict(data.get("residuals") or {}),
            dict(data.get("normalization") or {}),
            bool(data.get("failed", False)),
        )


def _jsonable(d: dict[str, Any]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for k, v in d.items():
        if isinstance(v, complex):
            out[k] = complex_to_pair(v)
        elif isinstance(v, (np.floating, np.integer)):
            out[k] = v.item()
        elif isinstance(v, dict):
            out[k] = _jsonable(v)  # pyright: ignore[reportUnknownArgumentType]
        else:
            out[k] = v
    return out


@dataclasses.dataclass
class ModulusData:
    """A weak (real grid) or strong (sector rays) modulus of a family."""

    family: str
    normalization: Normalization
    records: list[ModulusRecord]
    grid: dict[str, Any] = dataclasses.field(default_factory=dict)
    config: dict[str, Any] = dataclasses.field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {
            "format_version": FILE_FORMAT_VERSION,
            "family": self.family,
            "normalization": self.normalization,
            "grid": self.grid,
            "config": self.config,
            "records": [r.to_json() for r in self.records],
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> ModulusData:
        if not isinstance(data.get("records"), list):
            raise DataError("A modulus file needs a list of records.")
        norm = data.get("normalization", "weak")
        if norm not in ("weak", "strong", "none"):
            raise DataError(f"Unknown normalization {norm!r}.")
        return cls(
            str(data.get("family", "")),
            norm,
            [ModulusRecord.from_json(r) for r in data["records"]],
            dict(data.get("grid") or {}),
            dict(data.get("config") or {}),
        )

    def write(self, path: Union[str, Path]) -> None:
        write_json(path, self.to_json())

    @classmethod
    def read(cls, path: Union[str, Path]) -> ModulusData:
        return cls.from_json(read_json(path))


# =============================================================================
# Relations
# =============================================================================
def lavaurs_constant(eps: Param, scale: complex = 1.0) -> complex:
    """``-i pi c / sqrt(eps)``; ``-i pi / sqrt(eps)`` for normalized families."""
    return -1j * math.pi * scale / param_root(eps)


def first_return(
    plus: FatouCoordinate,
    W: complex,
    seed: Optional[tuple[complex, complex]] = None,
    max_steps: int = 100000,
) -> complex:
    """
    ``Phi+ o T_{-alpha+} o (Phi+)^{-1}`` at `W`: the orbit of the point is followed once
    around the + fixed point and its Fatou value, less the number of steps, returned.
    """
    Z, z = plus.inverse(W, seed)
    p = plus.chart.points[0]
    dyn = plus.dynamics
    angle = 0.0
    zk = z
    for k in range(1, max_steps):
        nxt = dyn.g(zk)
        angle += cmath.phase((nxt - p) / (zk - p))
        zk = nxt
        if abs(angle) >= 2 * math.pi:
            return plus.at(zk) - k
    raise FatouConvergenceError(
        "The orbit did not wind around the fixed point.", start=z, angle=angle
    )


def record_relations(
    record: ModulusRecord,
    maps: dict[str, TransitionMap],
    plus: FatouCoordinate,
    minus: FatouCoordinate,
    *,
    points: int = 4,
) -> dict[str, Any]:
    """Residuals of the identities satisfied by the transition maps of one record."""
    eps = record.eps
    kind = domain_kind(eps)
    b = record.b
    upper = record.upper
    lower = record.c_0
    assert upper is not None and lower is not None
    upper_map = maps["G"] if "G" in maps else maps["inf"]
    lower_map = maps["L"] if "L" in maps else maps["0"]
    out: dict[str, Any] = {}

    c0_inf, c0_0 = upper.c(0), lower.c(0)
    out["a_im_c0_inf"] = abs(c0_inf.imag + math.pi * b.real)
    out["a_literal"] = abs(c0_inf.imag + 1j * math.pi * b)
    out["a_normalized"] = abs(c0_inf + 1j * math.pi * b)
    out["b_constant_terms"] = abs(c0_inf - c0_0 + 2j * math.pi * b)

    pts = upper_map.line_points(points)
    out["t1_commutation"] = max(
        upper_map.commutation_residual(pts[:2]),
        lower_map.commutation_residual(lower_map.line_points(points)[:2]),
    )
    if kind != "glutsyuk":
        out["one_sided"] = max(
            (upper.line_amplitude(n) for n in range(-upper.nmax, 0)), default=0.0
        )
    out["aliasing"] = max(upper.aliasing, lower.aliasing)
    out["decay_ratio"] = decay_ratio(upper)
    out["abel_plus"] = plus.residual
    out["abel_minus"] = minus.residual

    fam_conj = plus.dynamics.fam.conjugating
    if fam_conj and param_is_real(eps):
        worst = 0.0
        for W in lower_map.line_points(points):
            lhs = upper_map(complex(W.real, -W.imag) + 0.5)
            rhs = complex(np.conj(lower_map(W))) + 0.5
            worst = max(worst, abs(lhs - rhs))
        out["c_sigma_half"] = worst
        out["antiholomorphic"] = max(
            plus.normalization.get("antiholomorphic_residual", 0.0),
            minus.normalization.get("antiholomorphic_residual", 0.0),
        )

    if kind == "lavaurs":
        L_expected = lavaurs_constant(eps, plus.chart.scale)
        worst_d = 0.0
        for W in pts:
            R = first_return(plus, W)
            worst_d = max(worst_d, abs(R - upper_map(W) - L_expected))
        out["d_first_return"] = worst_d
        s = abs(plus.chart.root)
        gate = [complex(t * s, 0.0) for t in (-0.5, 0.0, 0.5)]
        measured = [plus.at(z) - minus.at(z) for z in gate]
        L = complex(np.mean(measured))
        out["lavaurs_constant"] = L
        out["e_lavaurs"] = max(abs(m - L_expected) for m in measured)
    if kind == "glutsyuk":
        out["glutsyuk_commutation"] = glutsyuk_residual(plus, plus.domain.samples(3))

    checked = [
        k
        for k in (
            "a_im_c0_inf",
            "b_constant_terms",
            "t1_commutation",
            "c_sigma_half",
            "d_first_return",
            "e_lavaurs",
        )
        if k in out
    ]
    out["invalid"] = any(out[k] > HARD_CAP for k in checked)
    return out


def decay_ratio(m: FourierModulus) -> float:
    """Largest ``(|c_n| / |c_1|)^{1/(n-1)}`` over resolved positive modes; nan if c_1 vanishes."""
    c1 = abs(m.c(1))
    if c1 == 0:
        return math.nan
    ratios = [
        (abs(m.c(n)) / c1) ** (1 / (n - 1))
        for n in range(2, m.nmax + 1)
        if m.is_resolved(n)
    ]
    return max(ratios, default=0.0)


def sector_pair_residual(a: ModulusRecord, b: ModulusRecord) -> float:
    """
    Coefficient form of ``Psi_inf(e) o Sigma T_1/2 = Sigma T_1/2 o Psi_0(conj e)``:
    ``c_inf_{-m}(e) (-1)^m = conj(c_0_m(conj e))`` over modes resolved in both, measured
    on the upper sampling line of `a`.
    """
    up, low = a.upper, b.c_0
    if up is None or low is None:
        raise DataError("Sector pair residual needs both coefficient lists.")
    worst = 0.0
    n = min(up.nmax, low.nmax)
    for m in range(-n, n + 1):
        if up.is_resolved(-m) and low.is_resolved(m):
            diff = abs(up.c(-m) * (-1) ** m - np.conj(low.c(m)))
            worst = max(worst, diff * up.line_scale(-m))
    return worst


def relation_report(data: ModulusData) -> dict[str, float]:
    """Worst value of every residual over the records that did not fail."""
    out: dict[str, float] = {}
    for rec in data.records:
        if rec.failed:
            continue
        for k, v in rec.residuals.items():
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                continue
            if math.isnan(v):
                continue
            out[k] = max(out.get(k, 0.0), float(v))
    out["failed_records"] = float(sum(r.failed for r in data.records))
    return out


# =============================================================================
# Sweeps
# =============================================================================
def modulus_record(
    context: FatouContext, eps: Param, normalization: Normalization = "weak"
) -> ModulusRecord:
    cfg = context.config
    plus, minus = context.pair(eps, normalization)
    maps = transition_maps(plus, minus, eps, cfg.height)
    glutsyuk = "G" in maps
    upper = fourier_modulus(maps["G" if glutsyuk else "inf"], cfg.nmax, tol=cfg.tol)
    lower = fourier_modulus(maps["L" if glutsyuk else "0"], cfg.nmax, tol=cfg.tol)
    record = ModulusRecord(
        eps,
        plus.chart.b,
        upper,
        lower,
        upper if glutsyuk else None,
        normalization={
            "kind": normalization,
            "plus": plus.normalization,
            "minus": minus.normalization,
            "height": cfg.height,
            "sampling_heights": [upper.height, lower.height],
            "delta": cfg.delta,
        },
    )
    record.residuals = record_relations(record, maps, plus, minus)
    return record


def _failed_record(eps: Param, err: ModuliError) -> ModulusRecord:
    return ModulusRecord(
        eps, complex(math.nan), None, None, residuals={"error": err.to_json()}, failed=True
    )


def weak_modulus(
    fam: GermFamily,
    eps_grid: Sequence[float],
    config: Optional[RunConfig] = None,
    context: Optional[FatouContext] = None,
) -> ModulusData:
    """Weakly normalized transition maps on a grid of real parameters."""
    config = config or RunConfig()
    context = context or FatouContext.build(fam, config)
    records: list[ModulusRecord] = []
    for eps in eps_grid:
        if abs(eps) >= fam.param_radius:
            records.append(
                _failed_record(eps, GeometryError("Parameter outside the disc.", eps=eps))
            )
            continue
        status(f"Modulus record at eps = {eps:g}", config.verbose)
        try:
            records.append(modulus_record(context, float(eps), "weak"))
        except ModuliError as e:
            status(f"  failed: {e}", config.verbose)
            records.append(_failed_record(float(eps), e))
    return ModulusData(
        fam.label,
        "weak",
        records,
        {"kind": "real", "values": [float(e) for e in eps_grid]},
        config.to_dict(),
    )


def strong_modulus(
    fam: GermFamily,
    rays: Sequence[float],
    radii: Sequence[float],
    config: Optional[RunConfig] = None,
    context: Optional[FatouContext] = None,
) -> ModulusData:
    """
    Strongly normalized transition maps on rays of the sector. Pairs of rays ``arg`` and
    ``2 pi - arg`` get the cross residual of the conjugate-parameter identity.
    """
    config = config or RunConfig()
    context = context or FatouContext.build(fam, config)
    records: list[ModulusRecord] = []
    for radius in radii:
        for arg in rays:
            eps = SectorParameter(float(radius), float(arg))
            status(f"Modulus record at |eps| = {radius:g}, arg = {arg:.4f}", config.verbose)
            try:
                if not eps.in_sector(config.delta):
                    raise GeometryError(
                        "Ray outside the sector.", arg=arg, delta=config.delta
                    )
                records.append(modulus_record(context, eps, "strong"))
            except ModuliError as e:
                status(f"  failed: {e}", config.verbose)
                records.append(_failed_record(eps, e))

    for rec in records:
        if rec.failed:
            continue
        partner = conjugate_partner(rec, records)
        if partner is not None:
            rec.residuals["sector_pair"] = sector_pair_residual(rec, partner)
    return ModulusData(
        fam.label,
        "strong",
        records,
        {
            "kind": "rays",
            "rays": [float(a) for a in rays],
            "radii": [float(r) for r in radii],
            "delta": config.delta,
        },
        config.to_dict(),
    )


def conjugate_partner(rec: ModulusRecord, records: Sequence[ModulusRecord]) -> Optional[ModulusRecord]:
    e = rec.eps
    if not isinstance(e, SectorParameter):
        return None
    for other in records:
        o = other.eps
        if other.failed or not isinstance(o, SectorParameter):
            continue
        if abs(o.modulus - e.modulus) < 1e-15 and abs(o.arg - (2 * math.pi - e.arg)) < 1e-12:
            return other
    return None


def antiholomorphic_check(phi: FatouCoordinate) -> float:
    """Spread of ``Phi o F o Phi^{-1} - Sigma T_1/2`` on real-axis samples."""
    rho = antiholomorphic_defects(phi)
    return max(abs(r) for r in rho)
