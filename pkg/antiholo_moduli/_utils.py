from __future__ import annotations

import json
import math
import sys
from pathlib import Path
from typing import Any, Iterable, Sequence

import chevron
import numpy as np
import numpy.typing as npt

TEMPLATE_DIR = Path(__file__).parent / "templates"


def print_as_json(x: object) -> None:
    print(json.dumps(x, indent=None, sort_keys=True))


def status(msg: str, verbose: bool = True) -> None:
    """Print a status line to stderr (never to stdout, which carries JSON)."""
    if verbose:
        print(msg, file=sys.stderr)


def write_json(path: str | Path, data: object) -> None:
    # Deterministic output: sorted keys and repr-exact floats.
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def read_json(path: str | Path) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def complex_to_pair(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def pair_to_complex(pair: Sequence[float]) -> complex:
    return complex(float(pair[0]), float(pair[1]))


def complex_list(values: Iterable[complex]) -> list[list[float]]:
    return [complex_to_pair(z) for z in values]


def chebyshev_nodes(n: int, radius: float) -> npt.NDArray[np.float64]:
    """
    Chebyshev nodes of the first kind on ``[-radius, radius]``. For even `n` none of the
    nodes is zero.
    """
    k = np.arange(n)
    return radius * np.cos((2 * k + 1) * math.pi / (2 * n))


def render_summary(template_name: str, data: dict[str, object]) -> str:
    with open(TEMPLATE_DIR / template_name, "r", encoding="utf-8") as f:
        template = f.read()
    return chevron.render(template, data)


def format_float(x: float) -> str:
    return f"{x:.3e}"
