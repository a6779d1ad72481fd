from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path
from typing import Any, Mapping, Optional

from ._errors import ConfigError

# Default values for every tunable used by the numerical pipeline. These are the
# values used when neither a user config file nor a command-line flag overrides them.
DEFAULTS: dict[str, Any] = {
    # Radius of the z-disc on which families are represented.
    "radius": 0.5,
    # Radius of the parameter disc.
    "param_radius": 0.05,
    # Acceptance tolerance for residuals and verdicts.
    "tol": 1e-8,
    # Opening margin of the lifted parameter sector.
    "delta": 0.2,
    # Number of Fourier modes kept on each side.
    "nmax": 16,
    # Clearance of the sampling lines above and below the fundamental hole.
    "height": 1.5,
    # Truncation degrees of series families.
    "deg_w": 12,
    "deg_eps": 6,
    # Number of Chebyshev nodes used to fit the canonical invariants.
    "eta_nodes": 16,
    # Orbit sums stop once the Abel defect of the formal correction is below this.
    "tail_tol": 1e-15,
    "max_depth": 100_000,
    "escape_radius": 1.5,
    "seed": 0,
    "verbose": False,
    "grid": (-0.04, -0.01, 0.01, 0.04),
    "rays": (0.0, math.pi / 2, math.pi, 3 * math.pi / 2, 2 * math.pi),
    "radii": (0.01,),
}


@dataclasses.dataclass(frozen=True)
class RunConfig:
    radius: float = DEFAULTS["radius"]
    param_radius: float = DEFAULTS["param_radius"]
    tol: float = DEFAULTS["tol"]
    delta: float = DEFAULTS["delta"]
    nmax: int = DEFAULTS["nmax"]
    height: float = DEFAULTS["height"]
    deg_w: int = DEFAULTS["deg_w"]
    deg_eps: int = DEFAULTS["deg_eps"]
    eta_nodes: int = DEFAULTS["eta_nodes"]
    tail_tol: float = DEFAULTS["tail_tol"]
    max_depth: int = DEFAULTS["max_depth"]
    escape_radius: float = DEFAULTS["escape_radius"]
    seed: int = DEFAULTS["seed"]
    verbose: bool = DEFAULTS["verbose"]
    grid: tuple[float, ...] = DEFAULTS["grid"]
    rays: tuple[float, ...] = DEFAULTS["rays"]
    radii: tuple[float, ...] = DEFAULTS["radii"]

    def __post_init__(self) -> None:
        for name in ("radius", "param_radius", "tol", "height", "tail_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"`{name}` must be positive.", value=getattr(self, name))
        if not 0 < self.delta < math.pi / 2:
            raise ConfigError("`delta` must lie in (0, pi/2).", value=self.delta)
        if not 1 <= self.nmax <= 32:
            raise ConfigError("`nmax` must lie in [1, 32].", value=self.nmax)
        if self.deg_w < 2 or self.deg_eps < 1:
            raise ConfigError("Truncation degrees must satisfy deg_w >= 2, deg_eps >= 1.")
        if self.eta_nodes <= self.deg_eps + 1:
            raise ConfigError("`eta_nodes` must exceed deg_eps + 1.")
        if self.escape_radius <= self.radius:
            raise ConfigError("`escape_radius` must exceed `radius`.")
        for eps in self.grid:
            if abs(eps) >= self.param_radius:
                raise ConfigError(
                    f"Grid value {eps} lies outside the parameter disc.",
                    param_radius=self.param_radius,
                )
        for rho in self.radii:
            if not 0 < rho < self.param_radius:
                raise ConfigError(f"Sector radius {rho} must lie in (0, param_radius).")
        for theta in self.rays:
            if not -math.pi + self.delta <= theta <= 3 * math.pi - self.delta:
                raise ConfigError(f"Ray argument {theta} lies outside the sector.")

    def replace(self, **changes: Any) -> RunConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        for key in ("grid", "rays", "radii"):
            out[key] = list(out[key])
        return out


def user_config_path() -> Path:
    """
    Returns the location of the optional per-user configuration file.
    """
    import appdirs  # pyright: ignore[reportMissingTypeStubs]

    return Path(appdirs.user_config_dir("antiholo-moduli")) / "config.json"  # pyright: ignore


def _read_config_file(path: Path) -> dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must contain a JSON object.")
    unknown = set(data) - set(DEFAULTS)  # pyright: ignore[reportUnknownArgumentType]
    if unknown:
        raise ConfigError(f"Unknown config keys in {path}: {sorted(unknown)}")
    return dict(data)  # pyright: ignore[reportUnknownArgumentType]


def load_config(
    path: Optional[str | Path] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    *,
    use_user_file: bool = True,
) -> RunConfig:
    """Build a `RunConfig`.

    Values are taken from `DEFAULTS`, then the user config file (if present), then the
    explicit `path`, then `overrides`. ``None`` values in `overrides` are ignored so that
    unset command-line flags fall through.
    """
    values: dict[str, Any] = dict(DEFAULTS)
    if use_user_file:
        user_path = user_config_path()
        if user_path.exists():
            values.update(_read_config_file(user_path))
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Config file does not exist: {path}")
        values.update(_read_config_file(path))
    if overrides is not None:
        values.update({k: v for k, v in overrides.items() if v is not None})
    for key in ("grid", "rays", "radii"):
        values[key] = tuple(float(x) for x in values[key])
    return RunConfig(**values)
