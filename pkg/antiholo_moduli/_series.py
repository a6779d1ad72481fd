"""Truncated bivariate power series in (w, eps)."""

from __future__ import annotations

import contextlib
import math
from typing import Any, Iterator, Literal, Mapping, Optional, Sequence, cast

import mpmath
import numpy as np
import numpy.polynomial.polynomial as npp
import numpy.typing as npt

from ._errors import (
    DataError,
    DegeneracyError,
    MisuseError,
    SingularSeriesError,
    TruncationOrderError,
)

SeriesKind = Literal[
    "antiholomorphic-unfolding", "holomorphic-unfolding", "coordinate-change"
]
SERIES_KINDS: tuple[SeriesKind, ...] = (
    "antiholomorphic-unfolding",
    "holomorphic-unfolding",
    "coordinate-change",
)

Array = npt.NDArray[Any]

# Coefficients below this (relative to the largest one) count as zero in structural
# checks such as "the constant term vanishes".
ZERO_TOL = 1e-13


class SeriesFamily:
    """
    A truncated power series ``S(eps, w) = sum_{j,k} coeffs[j, k] eps^k w^j``.

    If `conjugating` is true, the series represents the antiholomorphic map
    ``z -> S(eps, conj(z))``; otherwise the holomorphic map ``z -> S(eps, z)``.
    Coefficients are complex floats, or mpmath numbers in an object array when working
    in extended precision (see `to_mp`).

    Instances are immutable: the coefficient array is read-only.
    """

    def __init__(
        self,
        coeffs: npt.ArrayLike,
        conjugating: bool = False,
        kind: Optional[SeriesKind] = None,
    ):
        arr = np.array(coeffs)
        if arr.dtype != object:
            arr = arr.astype(complex)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise MisuseError(
                f"Series coefficients must be a non-empty 2-D array, got shape {arr.shape}."
            )
        arr.setflags(write=False)
        self.coeffs: Array = arr
        self.conjugating = bool(conjugating)
        if kind is None:
            kind = (
                "antiholomorphic-unfolding" if conjugating else "holomorphic-unfolding"
            )
        self.kind: SeriesKind = kind

    # ------------------------------------------------------------------------
    # Construction helpers
    # ------------------------------------------------------------------------
    @classmethod
    def zeros(
        cls, deg_w: int, deg_eps: int, conjugating: bool = False, dtype: Any = complex
    ) -> SeriesFamily:
        return cls(np.zeros((deg_w + 1, deg_eps + 1), dtype=dtype), conjugating)

    @classmethod
    def from_terms(
        cls,
        terms: Mapping[tuple[int, int], complex],
        deg_w: int,
        deg_eps: int,
        conjugating: bool = False,
        kind: Optional[SeriesKind] = None,
    ) -> SeriesFamily:
        """Build a series from ``{(j, k): coefficient of eps^k w^j}``."""
        c = np.zeros((deg_w + 1, deg_eps + 1), dtype=complex)
        for (j, k), value in terms.items():
            if j <= deg_w and k <= deg_eps:
                c[j, k] += value
        return cls(c, conjugating, kind)

    @classmethod
    def constant_in_w(
        cls, eps_coeffs: npt.ArrayLike, deg_w: int, conjugating: bool = False
    ) -> SeriesFamily:
        """The series ``a(eps)`` with no dependence on w."""
        vec = np.asarray(eps_coeffs)
        c = np.zeros((deg_w + 1, vec.shape[0]), dtype=_dtype_of(vec))
        c[0, :] = vec
        return cls(c, conjugating)

    @property
    def deg_w(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def deg_eps(self) -> int:
        return self.coeffs.shape[1] - 1

    @property
    def shape(self) -> tuple[int, int]:
        return cast("tuple[int, int]", self.coeffs.shape)

    def with_coeffs(self, coeffs: npt.ArrayLike) -> SeriesFamily:
        return SeriesFamily(coeffs, self.conjugating, self.kind)

    def as_kind(self, kind: SeriesKind) -> SeriesFamily:
        conjugating = kind == "antiholomorphic-unfolding"
        return SeriesFamily(self.coeffs, conjugating, kind)

    def plain(self) -> SeriesFamily:
        """The same coefficients read as a holomorphic series (for algebra)."""
        if not self.conjugating:
            return self
        return SeriesFamily(self.coeffs, False)

    # ------------------------------------------------------------------------
    # Arithmetic. Products are products of the coefficient series; the result keeps
    # the flag of the left operand.
    # ------------------------------------------------------------------------
    def _other(self, other: SeriesFamily) -> Array:
        if other.shape != self.shape:
            raise MisuseError(
                f"Series degrees differ: {self.shape} vs {other.shape}."
            )
        return other.coeffs

    def __add__(self, other: SeriesFamily | complex) -> SeriesFamily:
        if isinstance(other, SeriesFamily):
            return self.with_coeffs(self.coeffs + self._other(other))
        c = np.array(self.coeffs)
        c[0, 0] += other
        return self.with_coeffs(c)

    def __sub__(self, other: SeriesFamily | complex) -> SeriesFamily:
        if isinstance(other, SeriesFamily):
            return self.with_coeffs(self.coeffs - self._other(other))
        return self + (-other)

    def __neg__(self) -> SeriesFamily:
        return self.with_coeffs(-self.coeffs)

    def __mul__(self, other: SeriesFamily | complex) -> SeriesFamily:
        if isinstance(other, SeriesFamily):
            return self.with_coeffs(_mul(self.coeffs, self._other(other)))
        return self.with_coeffs(self.coeffs * other)

    def __rmul__(self, other: complex) -> SeriesFamily:
        return self.with_coeffs(self.coeffs * other)

    def derivative_w(self) -> SeriesFamily:
        c = np.zeros_like(self.coeffs)
        j = np.arange(1, self.deg_w + 1).reshape(-1, 1)
        c[:-1, :] = self.coeffs[1:, :] * j
        return self.with_coeffs(c)

    def derivative_eps(self) -> SeriesFamily:
        c = np.zeros_like(self.coeffs)
        k = np.arange(1, self.deg_eps + 1).reshape(1, -1)
        c[:, :-1] = self.coeffs[:, 1:] * k
        return self.with_coeffs(c)

    def integrate_w(self) -> SeriesFamily:
        """Antiderivative in w vanishing at w = 0 (the top-degree term is dropped)."""
        c = np.zeros_like(self.coeffs)
        j = np.arange(1, self.deg_w + 1).reshape(-1, 1)
        c[1:, :] = self.coeffs[:-1, :] / j
        return self.with_coeffs(c)

    def truncate_weight(self, weight: int) -> SeriesFamily:
        """Drop every term eps^k w^j with ``j + 2k > weight``."""
        j = np.arange(self.deg_w + 1).reshape(-1, 1)
        k = np.arange(self.deg_eps + 1).reshape(1, -1)
        c = np.array(self.coeffs)
        c[(j + 2 * k) > weight] = 0
        return self.with_coeffs(c)

    def row(self, j: int) -> Array:
        """The eps-series multiplying w^j."""
        return np.array(self.coeffs[j, :])

    def scale(self) -> float:
        return float(max(1.0, max(abs(x) for x in self.coeffs.flat)))

    def is_real(self, tol: float = 1e-12) -> bool:
        return all(abs(complex(x).imag) <= tol * self.scale() for x in self.coeffs.flat)

    # ------------------------------------------------------------------------
    # Evaluation
    # ------------------------------------------------------------------------
    def coefficients_at(self, eps: complex) -> Array:
        """The w-polynomial ``S(eps, .)`` as a coefficient vector (lowest degree first)."""
        if self.coeffs.dtype == object:
            return np.array([_horner(self.coeffs[j, :], eps) for j in range(self.deg_w + 1)], dtype=object)
        return npp.polyval(eps, self.coeffs.T)

    def evaluate(self, eps: Any, w: Any) -> Any:
        """Evaluate ``S(eps, w)``; `eps` and `w` broadcast against each other."""
        if self.coeffs.dtype == object:
            return _horner(self.coefficients_at(eps), w)
        if np.ndim(eps) == 0:
            return npp.polyval(w, self.coefficients_at(eps))
        eps_b, w_b = np.broadcast_arrays(np.asarray(eps, dtype=complex), np.asarray(w, dtype=complex))
        return npp.polyval2d(w_b, eps_b, self.coeffs)

    def map_value(self, eps: Any, z: Any) -> Any:
        """The value of the represented map at z (conjugating z first if needed)."""
        if self.conjugating:
            z = np.conj(z)
        return self.evaluate(eps, z)

    # ------------------------------------------------------------------------
    # Precision and I/O
    # ------------------------------------------------------------------------
    def to_mp(self) -> SeriesFamily:
        """Object-array copy with mpmath coefficients at the current working precision."""
        c = np.empty(self.shape, dtype=object)
        for idx, x in np.ndenumerate(self.coeffs):
            c[idx] = mpmath.mpc(complex(x))
        return self.with_coeffs(c)

    def to_float(self) -> SeriesFamily:
        c = np.array([[complex(x) for x in row] for row in self.coeffs], dtype=complex)
        return self.with_coeffs(c)

    def to_json(self) -> dict[str, Any]:
        coeffs: list[dict[str, Any]] = []
        for (j, k), x in np.ndenumerate(self.coeffs):
            x = complex(x)
            if x != 0:
                coeffs.append({"j": int(j), "k": int(k), "re": x.real, "im": x.imag})
        return {
            "kind": self.kind,
            "deg_w": self.deg_w,
            "deg_eps": self.deg_eps,
            "coeffs": coeffs,
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> SeriesFamily:
        try:
            kind = data["kind"]
            deg_w = int(data["deg_w"])
            deg_eps = int(data["deg_eps"])
            entries = data["coeffs"]
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"Malformed series JSON: {e}") from e
        if kind not in SERIES_KINDS:
            raise DataError(f"Unknown series kind '{kind}'.")
        if deg_w < 0 or deg_eps < 0:
            raise DataError("Series degrees must be non-negative.")
        c = np.zeros((deg_w + 1, deg_eps + 1), dtype=complex)
        for entry in entries:
            try:
                j, k = int(entry["j"]), int(entry["k"])
                value = complex(float(entry["re"]), float(entry["im"]))
            except (KeyError, TypeError, ValueError) as e:
                raise DataError(f"Malformed coefficient entry {entry!r}: {e}") from e
            if not (0 <= j <= deg_w and 0 <= k <= deg_eps):
                raise DataError(f"Coefficient index ({j}, {k}) outside the declared degrees.")
            if not (math.isfinite(value.real) and math.isfinite(value.imag)):
                raise DataError(f"Non-finite coefficient at ({j}, {k}).")
            c[j, k] = value
        return cls(c, kind == "antiholomorphic-unfolding", kind)

    def __repr__(self) -> str:
        flag = "conjugating" if self.conjugating else "holomorphic"
        return f"SeriesFamily(deg_w={self.deg_w}, deg_eps={self.deg_eps}, {flag})"


@contextlib.contextmanager
def extended_precision(dps: int = 40) -> Iterator[None]:
    """Run series algebra on mpmath numbers with `dps` decimal digits."""
    with mpmath.workdps(dps):
        yield


# ----------------------------------------------------------------------------
# Low-level coefficient helpers
# ----------------------------------------------------------------------------
def _dtype_of(*arrays: Array) -> Any:
    return object if any(a.dtype == object for a in arrays) else complex


def _mul(a: Array, b: Array) -> Array:
    """Truncated product of two coefficient arrays of the same shape."""
    dw, de = a.shape[0] - 1, a.shape[1] - 1
    out = np.zeros(a.shape, dtype=_dtype_of(a, b))
    for j, k in zip(*np.nonzero(a)):
        out[j:, k:] += a[j, k] * b[: dw + 1 - j, : de + 1 - k]
    return out


def _horner(coeffs: Sequence[Any] | Array, x: Any) -> Any:
    acc: Any = 0
    for c in reversed(list(coeffs)):
        acc = acc * x + c
    return acc


def _row_series(vec: Array, shape: tuple[int, ...]) -> Array:
    out = np.zeros(shape, dtype=_dtype_of(vec))
    out[0, :] = vec
    return out


def _poly_mul_trunc(a: Array, b: Array) -> Array:
    """Product of two 1-D coefficient vectors truncated to the length of `a`."""
    n = a.shape[0]
    out = np.zeros(n, dtype=_dtype_of(a, b))
    for i in range(n):
        if a[i] != 0:
            out[i:] += a[i] * b[: n - i]
    return out


def _one_half(dtype: Any) -> Any:
    return mpmath.mpf(1) / 2 if dtype == object else 0.5


def _power_series_of(x: Array, taylor: Sequence[Any]) -> Array:
    """``sum_n taylor[n] x^n`` for a series x with zero constant term."""
    acc = np.zeros(x.shape, dtype=_dtype_of(x))
    for t in reversed(list(taylor)):
        acc = _mul(acc, x)
        acc[0, 0] += t
    return acc


def _check_zero_constant(s: Array, what: str) -> None:
    scale = max(1.0, max(abs(x) for x in s.flat))
    if abs(s[0, 0]) > ZERO_TOL * scale:
        raise TruncationOrderError(
            f"{what} has a nonzero constant term at eps = 0; "
            "the truncated composition is not determined.",
            constant=complex(s[0, 0]),
        )


# ----------------------------------------------------------------------------
# Series operations
# ----------------------------------------------------------------------------
def identity(deg_w: int, deg_eps: int, conjugating: bool = False) -> SeriesFamily:
    c = np.zeros((deg_w + 1, deg_eps + 1), dtype=complex)
    c[1, 0] = 1
    return SeriesFamily(c, conjugating, None if conjugating else "coordinate-change")


def conjugate_series(s: SeriesFamily) -> SeriesFamily:
    """Coefficientwise complex conjugate (same flag)."""
    return s.with_coeffs(np.conj(s.coeffs))


def compose(outer: SeriesFamily, inner: SeriesFamily) -> SeriesFamily:
    """The series of the map ``outer o inner``.

    When `outer` is conjugating, the inner series is conjugated before substitution;
    the result is conjugating exactly when one of the two maps is.
    """
    if outer.shape != inner.shape:
        raise MisuseError(f"Series degrees differ: {outer.shape} vs {inner.shape}.")
    _check_zero_constant(inner.coeffs, "Inner series")
    inner_c = np.conj(inner.coeffs) if outer.conjugating else inner.coeffs
    o = outer.coeffs
    acc = _row_series(o[-1, :], o.shape)
    for j in range(outer.deg_w - 1, -1, -1):
        acc = _mul(acc, inner_c) + _row_series(o[j, :], o.shape)
    conjugating = outer.conjugating != inner.conjugating
    kind: Optional[SeriesKind] = None
    if outer.kind == "coordinate-change" and inner.kind == "coordinate-change":
        kind = "coordinate-change"
    return SeriesFamily(acc, conjugating, kind)


def eps_reciprocal(vec: Array) -> Array:
    """Reciprocal of an eps-series with nonzero constant term."""
    vec = np.asarray(vec)
    if abs(vec[0]) < ZERO_TOL:
        raise SingularSeriesError("The eps-series has no reciprocal (zero constant term).")
    n = vec.shape[0]
    out = np.zeros(n, dtype=_dtype_of(vec))
    out[0] = 1 / vec[0]
    for k in range(1, n):
        out[k] = -sum(vec[m] * out[k - m] for m in range(1, k + 1)) / vec[0]
    return out


def invert(s: SeriesFamily) -> SeriesFamily:
    """
    Compositional inverse, computed by the fixed-point iteration
    ``t <- (w - c - N(t)) / L`` where ``s = c + L w + N``.
    """
    c = s.coeffs
    _check_zero_constant(c, "Series to invert")
    lin = c[1, :]
    if abs(lin[0]) < ZERO_TOL:
        raise SingularSeriesError(
            "The linear coefficient vanishes at eps = 0; the series is not invertible."
        )
    shape = c.shape
    recip = _row_series(eps_reciprocal(lin), shape)
    const = _row_series(c[0, :], shape)
    nonlin = np.array(c)
    nonlin[0, :] = 0
    nonlin[1, :] = 0
    nonlin_s = SeriesFamily(nonlin)
    w = np.zeros(shape, dtype=_dtype_of(c))
    w[1, 0] = 1
    t = _mul(w - const, recip)
    for _ in range(s.deg_w + s.deg_eps + 1):
        t = _mul(w - const - compose(nonlin_s, SeriesFamily(t)).coeffs, recip)
    if s.conjugating:
        return SeriesFamily(np.conj(t), True, s.kind)
    return SeriesFamily(t, False, s.kind)


def quadratic_coefficients(quadratic: SeriesFamily) -> tuple[Array, Array]:
    """The eps-series ``(alpha1, alpha0)`` of a monic quadratic ``w^2 + alpha1 w + alpha0``."""
    q = quadratic.coeffs
    return np.array(q[1, :]), np.array(q[0, :])


def make_quadratic(alpha1: Array, alpha0: Array, deg_w: int) -> SeriesFamily:
    c = np.zeros((deg_w + 1, len(alpha1)), dtype=_dtype_of(np.asarray(alpha1), np.asarray(alpha0)))
    c[2, 0] = 1
    c[1, :] = alpha1
    c[0, :] = alpha0
    return SeriesFamily(c, kind="coordinate-change")


def weierstrass_prepare(F: SeriesFamily) -> tuple[SeriesFamily, SeriesFamily]:
    """
    Factor ``F = P * h`` with ``P = w^2 + alpha1(eps) w + alpha0(eps)`` and a unit ``h``.

    `F` must vanish to order exactly two in w at eps = 0. The factors are computed order
    by order in eps; real input gives real factors.
    """
    c = F.coeffs
    dw, de = F.deg_w, F.deg_eps
    if dw < 2:
        raise MisuseError("Weierstrass preparation needs deg_w >= 2.")
    scale = F.scale()
    f0 = c[:, 0]
    order = next((j for j in range(3) if abs(f0[j]) > ZERO_TOL * scale), 3)
    if order != 2:
        raise DegeneracyError(
            "F(0, w) must vanish to order exactly 2 at w = 0.",
            order=order if order < 3 else ">2",
        )

    dtype = _dtype_of(c)
    h = np.zeros(c.shape, dtype=dtype)
    h[: dw - 1, 0] = f0[2:]
    alpha1 = np.zeros(de + 1, dtype=dtype)
    alpha0 = np.zeros(de + 1, dtype=dtype)
    h00, h01 = h[0, 0], h[1, 0]

    def times_linear(p: Array, a1: Any, a0: Any) -> Array:
        out = p * a0
        out[1:] = out[1:] + p[:-1] * a1
        return out

    for k in range(1, de + 1):
        rem = np.array(c[:, k])
        for m in range(1, k):
            rem = rem - times_linear(h[:, k - m], alpha1[m], alpha0[m])
        alpha0[k] = rem[0] / h00
        alpha1[k] = (rem[1] - h01 * alpha0[k]) / h00
        rem = rem - times_linear(h[:, 0], alpha1[k], alpha0[k])
        h[: dw - 1, k] = rem[2:]

    return make_quadratic(alpha1, alpha0, dw), SeriesFamily(h)


def divide_by_quadratic(
    F: SeriesFamily, quadratic: SeriesFamily
) -> tuple[SeriesFamily, SeriesFamily]:
    """
    Weierstrass division ``F = P * Q + R`` by a monic quadratic ``P`` whose lower
    coefficients vanish at eps = 0. ``R`` is linear in w.
    """
    alpha1, alpha0 = quadratic_coefficients(quadratic)
    if abs(alpha1[0]) > ZERO_TOL or abs(alpha0[0]) > ZERO_TOL:
        raise MisuseError("The divisor must reduce to w^2 at eps = 0.")
    c = F.coeffs
    dw, de = F.deg_w, F.deg_eps
    dtype = _dtype_of(c, alpha1, alpha0)
    q = np.zeros(c.shape, dtype=dtype)
    r = np.zeros(c.shape, dtype=dtype)

    def qget(j: int, k: int) -> Any:
        if 0 <= j <= dw - 2:
            return q[j, k]
        return 0

    for k in range(de + 1):
        for j in range(dw, -1, -1):
            acc = c[j, k]
            for kk in range(1, k + 1):
                acc = acc - alpha1[kk] * qget(j - 1, k - kk) - alpha0[kk] * qget(j, k - kk)
            if j >= 2:
                q[j - 2, k] = acc
            else:
                r[j, k] = acc
    return SeriesFamily(q), SeriesFamily(r)


def eps_compose(a: Array, e: Array) -> Array:
    """``a(e(eta))`` for eps-series `a` and a parameter series `e` with ``e(0) = 0``."""
    n = len(e)
    acc = np.zeros(n, dtype=_dtype_of(np.asarray(a), np.asarray(e)))
    for coef in reversed(list(a)):
        acc = _poly_mul_trunc(acc, np.asarray(e))
        acc[0] += coef
    return acc


def eps_mul(a: Array, b: Array) -> Array:
    return _poly_mul_trunc(np.asarray(a), np.asarray(b))


def reparametrize(s: SeriesFamily, eps_map: npt.ArrayLike) -> SeriesFamily:
    """Substitute ``eps = eps_map(eta)``; the result is a series in (w, eta)."""
    e = np.asarray(eps_map)
    if e.shape[0] != s.deg_eps + 1:
        raise MisuseError("The parameter map must have the same eps-degree as the series.")
    if abs(e[0]) > ZERO_TOL:
        raise TruncationOrderError("The parameter map must vanish at eta = 0.")
    c = np.array([eps_compose(s.coeffs[j, :], e) for j in range(s.deg_w + 1)])
    return s.with_coeffs(c)


def invert_parameter(e: npt.ArrayLike) -> Array:
    """Reversion of a parameter series ``eps = e(eta)`` with ``e(0) = 0``, ``e'(0) != 0``."""
    vec = np.asarray(e)
    as_w = SeriesFamily(vec.reshape(-1, 1))
    return np.array(invert(as_w).coeffs[:, 0])


def series_sqrt(s: SeriesFamily) -> SeriesFamily:
    """Principal square root of a unit series via the binomial series."""
    c = s.coeffs
    c00 = c[0, 0]
    if abs(c00) < ZERO_TOL:
        raise SingularSeriesError("Square root of a non-unit series.")
    dtype = _dtype_of(c)
    x = c / c00
    x[0, 0] = 0
    half = _one_half(dtype)
    taylor: list[Any] = [1]
    for n in range(s.deg_w + s.deg_eps):
        taylor.append(taylor[-1] * (half - n) / (n + 1))
    root = mpmath.sqrt(c00) if dtype == object else np.sqrt(complex(c00))
    return s.with_coeffs(_power_series_of(x, taylor) * root)


def reciprocal(s: SeriesFamily) -> SeriesFamily:
    """Multiplicative inverse of a unit series."""
    c = s.coeffs
    c00 = c[0, 0]
    if abs(c00) < ZERO_TOL:
        raise SingularSeriesError("Reciprocal of a non-unit series.")
    x = c / c00
    x[0, 0] = 0
    taylor = [(-1) ** n for n in range(s.deg_w + s.deg_eps + 1)]
    return s.with_coeffs(_power_series_of(x, taylor) / c00)
