from __future__ import annotations

import csv
import dataclasses
import math
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ._config import RunConfig
from ._errors import InverseError, MisuseError
from ._fatou import FatouContext
from ._germ import GermFamily, evaluate
from ._time_chart import time_inverse

CSV_COLUMNS = ("z_re", "z_im", "orbit_id", "iterate_index")

# Boundary curves use negative ids: the line of each side and its image.
BOUNDARY_IDS = {(1, 0): -1, (1, 1): -2, (-1, 0): -3, (-1, 1): -4}


@dataclasses.dataclass
class Portrait:
    """Rows ``(z, orbit_id, iterate_index)``; orbits have ids >= 0, boundaries < 0."""

    eps: float
    rows: list[tuple[complex, int, int]]

    def orbit(self, orbit_id: int) -> list[complex]:
        return [z for z, i, _ in self.rows if i == orbit_id]

    def write_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(CSV_COLUMNS)
            for z, orbit_id, k in self.rows:
                writer.writerow([repr(float(z.real)), repr(float(z.imag)), orbit_id, k])

    def write_png(self, path: Union[str, Path]) -> None:
        try:
            import matplotlib

            matplotlib.use("Agg")
            import matplotlib.pyplot as plt
        except ImportError as e:
            raise MisuseError(
                "PNG output needs matplotlib; install the 'plot' extra."
            ) from e

        fig, ax = plt.subplots(figsize=(6, 6))
        ids = sorted({i for _, i, _ in self.rows})
        for i in ids:
            pts = np.array(self.orbit(i))
            if i >= 0:
                ax.plot(pts.real, pts.imag, ".", markersize=2)
            else:
                ax.plot(pts.real, pts.imag, "-", color="black", linewidth=0.8)
        ax.set_aspect("equal")
        ax.set_title(f"eps = {self.eps:g}")
        fig.savefig(path, dpi=150)
        plt.close(fig)


def orbit_starts(radius: float, n: int) -> list[complex]:
    angles = (np.arange(n) + 0.5) * 2 * math.pi / n
    return [complex(0.8 * radius * np.exp(1j * t)) for t in angles]


def portrait(
    fam: GermFamily,
    eps: float,
    config: Optional[RunConfig] = None,
    n_orbits: int = 12,
    steps: int = 200,
    boundary_points: int = 120,
) -> Portrait:
    """Forward orbits of the family and the boundary curves of both translation domains."""
    config = config or RunConfig()
    rows: list[tuple[complex, int, int]] = []
    for k, z0 in enumerate(orbit_starts(fam.radius, n_orbits)):
        z = z0
        for j in range(steps):
            if not abs(z) < fam.radius:
                break
            rows.append((z, k, j))
            z = complex(evaluate(fam, eps, z, check_domain=False))

    context = FatouContext.build(fam, config)
    plus, minus = context.raw_pair(eps)
    for phi in (plus, minus):
        dom = phi.domain
        ts = np.linspace(-6.0, 6.0, boundary_points)
        seed = None
        curve: list[complex] = []
        for t in ts:
            Z = dom.base + float(t) * dom.direction
            try:
                z = time_inverse(phi.chart, Z, seed)
            except InverseError:
                seed = None
                continue
            seed = (z, Z)
            if abs(z) < fam.radius:
                curve.append(z)
        for j, z in enumerate(curve):
            rows.append((z, BOUNDARY_IDS[(phi.side, 0)], j))
        for j, z in enumerate(curve):
            rows.append((phi.dynamics.g(z), BOUNDARY_IDS[(phi.side, 1)], j))
    return Portrait(eps, rows)
