from __future__ import annotations

import cmath
import dataclasses
import math
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from ._errors import InfinitePeriodError, InverseError, MisuseError, PoleError
from ._germ import Param, param_root, param_value

# Below this modulus a parameter is treated as eps = 0 (the parabolic chart).
PARABOLIC_EPS = 1e-14


@dataclasses.dataclass(frozen=True)
class TimeChart:
    """
    Time coordinate of the model field ``(c + b z)^{-1}(z^2 - eps)`` (with ``c`` the
    `scale`), i.e. a primitive of ``(c + b z) / (z^2 - eps)``.

    `root` is the chosen square root of eps; the singular points are ``+root`` and
    ``-root``. The + chart uses principal logarithms with cuts going left from the
    singular points, the - chart cuts going right. Both charts share the additive
    constant that makes the + chart vanish at ``z = radius``.
    """

    eps: complex
    root: complex
    b: complex
    scale: complex
    sign: int
    radius: float = 0.5

    def __post_init__(self) -> None:
        if self.sign not in (1, -1):
            raise MisuseError("Chart sign must be +1 or -1.")

    # ------------------------------------------------------------------------
    @classmethod
    def for_parameter(
        cls,
        eps: Param,
        b: complex,
        sign: int = 1,
        radius: float = 0.5,
        scale: complex = 1.0,
    ) -> TimeChart:
        e = param_value(eps)
        root = 0j if abs(e) < PARABOLIC_EPS else param_root(eps)
        return cls(e, root, complex(b), complex(scale), sign, radius)

    @classmethod
    def from_multipliers(
        cls,
        eps: Param,
        root: complex,
        mu_plus: complex,
        mu_minus: complex,
        sign: int = 1,
        radius: float = 0.5,
    ) -> TimeChart:
        """
        The chart whose residues at ``+root`` / ``-root`` are ``1/mu_plus`` /
        ``1/mu_minus``, so that it linearizes a map with multipliers
        ``exp(mu_plus)``, ``exp(mu_minus)``.
        """
        a, bb = 1 / mu_plus, 1 / mu_minus
        return cls(param_value(eps), complex(root), a + bb, root * (a - bb), sign, radius)

    def with_sign(self, sign: int) -> TimeChart:
        return dataclasses.replace(self, sign=sign)

    # ------------------------------------------------------------------------
    @property
    def parabolic(self) -> bool:
        return self.root == 0

    @property
    def residues(self) -> tuple[complex, complex]:
        """Residues ``(A, B)`` of the chart derivative at ``+root`` and ``-root``."""
        if self.parabolic:
            raise InfinitePeriodError("The parabolic chart has a double pole.")
        p = self.root
        return (self.scale + self.b * p) / (2 * p), -(self.scale - self.b * p) / (2 * p)

    @property
    def points(self) -> tuple[complex, ...]:
        if self.parabolic:
            return (0j,)
        return (self.root, -self.root)

    def derivative(self, z: Any) -> Any:
        return (self.scale + self.b * z) / (z * z - self.eps)

    def _logs(self, z: complex, sign: int) -> tuple[complex, ...]:
        if self.parabolic:
            return (cmath.log(z if sign > 0 else -z),)
        p = self.root
        if sign > 0:
            return cmath.log(z - p), cmath.log(z + p)
        return cmath.log(p - z), cmath.log(-p - z)

    def _combine(self, z: complex, logs: Sequence[complex]) -> complex:
        if self.parabolic:
            return -self.scale / z + self.b * logs[0]
        a, bb = self.residues
        return a * logs[0] + bb * logs[1]

    @property
    def constant(self) -> complex:
        r = complex(self.radius)
        return self._combine(r, self._logs(r, 1))

    def principal(self, z: complex) -> complex:
        z = complex(z)
        for p in self.points:
            if abs(z - p) < 1e-15:
                raise PoleError("The time chart is singular at a fixed point.", z=z)
        return self._combine(z, self._logs(z, self.sign)) - self.constant

    def __call__(self, z: complex) -> complex:
        return self.principal(z)

    def anchor(self) -> tuple[complex, complex]:
        """A point of the chart and its value: ``(r, 0)`` for +, ``(-r, kappa)`` for -."""
        if self.sign > 0:
            return complex(self.radius), 0j
        z = complex(-self.radius)
        return z, self.principal(z)

    @property
    def chart_length(self) -> complex:
        """The value at ``-r`` of the - chart (the length of the fundamental hole)."""
        return self.with_sign(-1).anchor()[1]

    def hole_disc(self) -> tuple[complex, float]:
        """Disc covering the image of the circle ``|z| = r`` in this chart."""
        kappa = self.chart_length
        return kappa / 2, abs(kappa) / 2

    def periods(self) -> tuple[complex, complex]:
        a, bb = self.residues
        return 2j * math.pi * a, 2j * math.pi * bb


def time_coord(chart: TimeChart, z: complex) -> complex:
    """Principal value of the chart at `z`."""
    return chart.principal(z)


def period(eps: Param, b: complex, sign: int, scale: complex = 1.0) -> complex:
    """``sign * i pi c / sqrt(eps) + i pi b`` (the lifted root for sector parameters)."""
    if abs(param_value(eps)) < PARABOLIC_EPS:
        raise InfinitePeriodError("The period is infinite at eps = 0.")
    root = param_root(eps)
    return sign * 1j * math.pi * scale / root + 1j * math.pi * b


class ChartTracker:
    """Chart values continued along a path, starting from a principal value."""

    def __init__(self, chart: TimeChart, z: complex, value: Optional[complex] = None):
        self.chart = chart
        self.z = complex(z)
        self.logs = list(chart._logs(self.z, chart.sign))
        self.shift = 0j
        if value is not None:
            self.shift = value - self.value()

    def value(self) -> complex:
        return self.chart._combine(self.z, self.logs) - self.chart.constant + self.shift

    def distance(self) -> float:
        return min(abs(self.z - p) for p in self.chart.points)

    def move(self, z_new: complex) -> None:
        for i, p in enumerate(self.chart.points):
            ratio = (z_new - p) / (self.z - p)
            self.logs[i] += cmath.log(ratio)
        self.z = complex(z_new)


def continue_along(chart: TimeChart, path: Iterable[complex]) -> list[complex]:
    """Chart values along a polyline, principal at the first point."""
    points = list(path)
    tracker = ChartTracker(chart, points[0])
    out = [tracker.value()]
    for z in points[1:]:
        # Subdivide so no segment turns by more than a quarter turn around a point.
        n = max(1, math.ceil(4 * abs(z - tracker.z) / max(tracker.distance(), 1e-300)))
        start = tracker.z
        for m in range(1, n + 1):
            tracker.move(start + (z - start) * m / n)
        out.append(tracker.value())
    return out


def _newton_to(
    tracker: ChartTracker, target: complex, tol: float, maxiter: int
) -> float:
    chart = tracker.chart
    err = abs(target - tracker.value())
    for _ in range(maxiter):
        if err <= tol:
            return err
        dz = (target - tracker.value()) / chart.derivative(tracker.z)
        limit = 0.5 * tracker.distance()
        if abs(dz) > limit:
            dz *= limit / abs(dz)
        tracker.move(tracker.z + dz)
        if not np.isfinite(tracker.z) or abs(tracker.z) > 1e3:
            raise InverseError("Chart inversion left the plane.", target=target)
        err = abs(target - tracker.value())
    return err


def time_inverse(
    chart: TimeChart,
    Z: complex,
    seed: Optional[tuple[complex, complex]] = None,
    *,
    tol: float = 1e-13,
    step: float = 0.25,
    maxiter: int = 60,
) -> complex:
    """
    The point z with chart value `Z` on the sheet selected by `seed` ``(z0, Z0)``.

    The sheet is followed by a homotopy from ``Z0`` to ``Z`` with Newton corrections;
    logarithms are continued along the corrections. The default seed is the chart
    anchor.
    """
    z0, Z0 = seed if seed is not None else chart.anchor()
    tracker = ChartTracker(chart, z0, Z0)
    n = max(1, math.ceil(abs(Z - Z0) / step))
    for m in range(1, n):
        _newton_to(tracker, Z0 + (Z - Z0) * m / n, 1e-6 * (1 + abs(Z)), maxiter)
    err = _newton_to(tracker, Z, tol * max(1.0, abs(Z)), maxiter)
    if err > tol * max(1.0, abs(Z)):
        raise InverseError(
            "Chart inversion did not converge.", target=Z, residual=err, last=tracker.z
        )
    return tracker.z


def flow_map(
    eps: Param, b: complex, t: float, z: complex, scale: complex = 1.0
) -> complex:
    """Time-`t` flow of the model field, computed as ``Z^{-1}(Z(z) + t)``."""
    chart = TimeChart.for_parameter(eps, b, 1, scale=scale)
    Z0 = chart(z)
    return time_inverse(chart, Z0 + t, seed=(complex(z), Z0))
