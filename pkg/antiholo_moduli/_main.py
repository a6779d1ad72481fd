from __future__ import annotations

import collections
import functools
import json
import sys
from typing import Any, Callable, MutableMapping, Optional, TypeVar

import click

from ._classify import (
    compare_moduli,
    compatibility_residual,
    extract_square_root,
    invariant_curve_test,
    square_root_test,
)
from ._config import RunConfig, load_config, user_config_path
from ._errors import CriterionError, DataError, ModuliError
from ._germ import GermFamily, SectorParameter, random_generic_family
from ._modulus import ModulusData, ModulusRecord, relation_report, strong_modulus, weak_modulus
from ._portrait import portrait as make_portrait
from ._prepare import _fixed_points_centered, check_genericity, prepare as prepare_family
from ._utils import format_float, print_as_json, read_json, render_summary, status, write_json
from ._version import ANTIHOLO_MODULI_PACKAGE_VERSION, FILE_FORMAT_VERSION

F = TypeVar("F", bound=Callable[..., Any])

EXIT_NEGATIVE = 2


# Make sure commands are listed in the order they are added in the code.
class OrderedGroup(click.Group):
    def __init__(
        self,
        name: Optional[str] = None,
        commands: Optional[MutableMapping[str, click.Command]] = None,
        **kwargs: object,
    ):
        super(OrderedGroup, self).__init__(name, commands, **kwargs)
        #: the registered subcommands by their exported names.
        self.commands = commands or collections.OrderedDict()

    def list_commands(self, ctx: click.Context) -> list[str]:
        return list(self.commands.keys())


version_txt = f"""
    \b
    antiholo-moduli Python package version: {ANTIHOLO_MODULI_PACKAGE_VERSION}
    file format version:                    {FILE_FORMAT_VERSION}
"""

# CLI structure:
# * antiholo-moduli
#     * --version
#     * validate GERM
#     * random
#         * Options: -o
#     * prepare GERM
#         * Options: -o, --report, --summary
#     * modulus GERM
#         * Options: --grid | --rays, --radii, -o, --summary
#     * compare A B
#         * Options: -o, --threshold, --summary
#     * sqrt
#         * check G
#             * Options: --grid, --threshold, --summary
#         * extract G
#             * Options: -o, --threshold
#     * curve
#         * check F
#             * Options: --threshold, --summary
#     * compat GERM
#         * Options: --eps, --threshold, --summary
#     * portrait GERM
#         * Options: --eps, -o, --png
#     * config
#         * show
#
# Every command except `config show` also takes the run options: --radius,
# --param-radius, --tol, --delta, --nmax, --seed, --config, --verbose.


# #############################################################################
# ## Shared plumbing
# #############################################################################


def run_options(fn: F) -> F:
    """Options that override `RunConfig` values."""
    options = [
        click.option("--radius", type=float, default=None, help="Radius of the z-disc."),
        click.option(
            "--param-radius", type=float, default=None, help="Radius of the parameter disc."
        ),
        click.option("--tol", type=float, default=None, help="Numerical tolerance."),
        click.option("--delta", type=float, default=None, help="Sector opening margin."),
        click.option("--nmax", type=int, default=None, help="Fourier modes kept per side."),
        click.option("--seed", type=int, default=None, help="Random seed."),
        click.option(
            "--config",
            "config_file",
            type=str,
            default=None,
            help="Path to a JSON config file.",
        ),
        click.option(
            "--verbose",
            is_flag=True,
            default=None,
            help="Print progress information to stderr.",
        ),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def handles_errors(fn: F) -> F:
    """Print a `ModuliError` (or unreadable input) as JSON on stderr and exit with 1."""

    @functools.wraps(fn)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return fn(*args, **kwargs)
        except ModuliError as e:
            print(json.dumps(e.to_json(), sort_keys=True), file=sys.stderr)
            sys.exit(1)
        except (OSError, json.JSONDecodeError) as e:
            err = DataError(f"Could not read input: {e}")
            print(json.dumps(err.to_json(), sort_keys=True), file=sys.stderr)
            sys.exit(1)

    return wrapper  # pyright: ignore[reportReturnType]


def build_config(
    config_file: Optional[str], **overrides: Any
) -> RunConfig:
    return load_config(config_file, overrides)


def read_family(
    path: str, config: RunConfig, overrides: dict[str, Any]
) -> tuple[GermFamily, RunConfig]:
    """
    Read a germ family. Explicit --radius/--param-radius flags win over the radii stored
    in the file; otherwise the file's radii are used for the run.
    """
    try:
        fam = GermFamily.from_json(read_json(path))
    except json.JSONDecodeError as e:
        raise DataError(f"{path} is not valid JSON: {e}") from e
    if overrides.get("radius") is not None:
        fam = fam.replace(radius=config.radius)
    else:
        config = config.replace(radius=fam.radius)
    if overrides.get("param_radius") is not None:
        fam = fam.replace(param_radius=config.param_radius)
    else:
        config = config.replace(param_radius=fam.param_radius)
    return fam, config


def parse_floats(text: Optional[str]) -> Optional[tuple[float, ...]]:
    if text is None:
        return None
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as e:
        raise DataError(f"Expected a comma-separated list of numbers, got {text!r}.") from e


def emit(data: Any, out: Optional[str]) -> None:
    if out is None:
        print_as_json(data)
    else:
        write_json(out, data)


def eps_label(rec: ModulusRecord) -> str:
    if isinstance(rec.eps, SectorParameter):
        return f"|eps| = {rec.eps.modulus:g}, arg = {rec.eps.arg:.4f}"
    return f"eps = {rec.eps_value.real:g}"


def verdict_summary(title: str, verdict: str, residual: float, threshold: float, notes: list[str]) -> None:
    print(
        render_summary(
            "verdict_summary.mustache",
            {
                "title": title,
                "verdict": verdict,
                "residual": format_float(residual),
                "threshold": format_float(threshold),
                "notes": notes,
            },
        ),
        file=sys.stderr,
    )


# #############################################################################
# ## Main
# #############################################################################


@click.group(
    invoke_without_command=True,
    no_args_is_help=True,
    help=version_txt,
    cls=OrderedGroup,
)
# > Add a --version option which immediately prints the version number and exits the
# > program.
@click.version_option(ANTIHOLO_MODULI_PACKAGE_VERSION, message="%(version)s")
def main() -> None: ...


# #############################################################################
# ## Validate
# #############################################################################


@main.command(
    short_help="Check that a germ family file is well formed and generic.",
    help="""
Check that GERM is a well-formed germ family: the origin is a parabolic fixed point at
eps = 0, the quadratic term is nonzero and the unfolding is generic.

Prints a JSON description of the family to stdout.
""",
    no_args_is_help=True,
)
@click.argument("germ", type=str)
@run_options
@handles_errors
def validate(germ: str, config_file: Optional[str], **overrides: Any) -> None:
    config = build_config(config_file, **overrides)
    fam, config = read_family(germ, config, overrides)
    margin = check_genericity(fam)
    print_as_json(
        {
            "valid": True,
            "label": fam.label,
            "conjugating": fam.conjugating,
            "deg_w": fam.deg_w,
            "deg_eps": fam.deg_eps,
            "radius": fam.radius,
            "param_radius": fam.param_radius,
            "genericity_margin": margin,
            "fixed_points_centered": _fixed_points_centered(fam),
        }
    )


# #############################################################################
# ## Random
# #############################################################################


@main.command(
    "random",
    short_help="Write a random generic antiholomorphic unfolding.",
    help="""
Write a random real generic antiholomorphic unfolding whose second iterate has its
fixed points at +/- sqrt(eps). The family is determined by --seed.

The family is written to the -o file (stdout when omitted).
""",
)
@click.option("-o", "--out", type=str, default=None, help="Output file for the family.")
@run_options
@handles_errors
def random_family(
    out: Optional[str],
    config_file: Optional[str],
    **overrides: Any,
) -> None:
    config = build_config(config_file, **overrides)
    status(f"Random family with seed {config.seed}", config.verbose)
    fam = random_generic_family(
        config.seed,
        radius=config.radius,
        param_radius=config.param_radius,
    )
    emit(fam.to_json(), out)


# #############################################################################
# ## Prepare
# #############################################################################


@main.command(
    short_help="Bring an antiholomorphic unfolding to prepared form.",
    help="""
Bring the antiholomorphic unfolding in GERM to the prepared form in its canonical
parameter.

The prepared family is written to the -o file (stdout when omitted). The full
preparation (change of coordinates, invariants, parameter map and residuals) is written
to the --report file.
""",
    no_args_is_help=True,
)
@click.argument("germ", type=str)
@click.option("-o", "--out", type=str, default=None, help="Output file for the prepared family.")
@click.option("--report", type=str, default=None, help="Output file for the preparation report.")
@click.option("--summary", is_flag=True, default=False, help="Print a text summary to stderr.")
@run_options
@handles_errors
def prepare(
    germ: str,
    out: Optional[str],
    report: Optional[str],
    summary: bool,
    config_file: Optional[str],
    **overrides: Any,
) -> None:
    config = build_config(config_file, **overrides)
    fam, config = read_family(germ, config, overrides)
    status(f"Preparing {germ}", config.verbose)
    prep = prepare_family(fam, tol=config.tol, nodes=config.eta_nodes)
    emit(prep.family.to_json(), out)
    if report is not None:
        data = prep.to_json()
        data["config"] = config.to_dict()
        write_json(report, data)
    if summary:
        rep = prep.report
        print(
            render_summary(
                "prepare_summary.mustache",
                {
                    "label": fam.label or germ,
                    "margin": format_float(rep["genericity_margin"]),
                    "rotation": format_float(rep["rotation"]),
                    "symmetrized": rep["symmetrized"],
                    "residuals": [
                        {"name": k, "value": format_float(v)}
                        for k, v in sorted(rep["residuals"].items())
                    ],
                    "worst": format_float(rep["worst_residual"]),
                },
            ),
            file=sys.stderr,
        )


# #############################################################################
# ## Modulus
# #############################################################################


@main.command(
    short_help="Compute the modulus of a prepared family.",
    help="""
Compute the transition maps of the prepared family in GERM and their Fourier
coefficients.

With --grid (comma-separated real parameters) the weakly normalized modulus is computed.
With --rays (comma-separated lifted arguments) and --radii the strongly normalized
modulus on rays of the sector is computed. Without either, the grid from the
configuration is used.
""",
    no_args_is_help=True,
)
@click.argument("germ", type=str)
@click.option("--grid", type=str, default=None, help="Comma-separated real parameters.")
@click.option("--rays", type=str, default=None, help="Comma-separated lifted arguments.")
@click.option("--radii", type=str, default=None, help="Comma-separated sector radii.")
@click.option("-o", "--out", type=str, default=None, help="Output file for the modulus.")
@click.option("--summary", is_flag=True, default=False, help="Print a text summary to stderr.")
@run_options
@handles_errors
def modulus(
    germ: str,
    grid: Optional[str],
    rays: Optional[str],
    radii: Optional[str],
    out: Optional[str],
    summary: bool,
    config_file: Optional[str],
    **overrides: Any,
) -> None:
    if grid is not None and rays is not None:
        raise DataError("--grid and --rays are mutually exclusive.")
    config = build_config(
        config_file,
        grid=parse_floats(grid),
        rays=parse_floats(rays),
        radii=parse_floats(radii),
        **overrides,
    )
    fam, config = read_family(germ, config, overrides)
    if rays is not None:
        data = strong_modulus(fam, config.rays, config.radii, config)
    else:
        data = weak_modulus(fam, config.grid, config)
    if out is not None:
        data.write(out)
        report: dict[str, Any] = dict(relation_report(data))
        report["config"] = config.to_dict()
        print_as_json(report)
    else:
        print_as_json(data.to_json())
    if summary:
        print_modulus_summary(data, config)


def print_modulus_summary(data: ModulusData, config: RunConfig) -> None:
    records: list[dict[str, Any]] = []
    for rec in data.records:
        up = rec.upper
        error = rec.residuals.get("error", {}) if rec.failed else {}
        records.append(
            {
                "label": eps_label(rec),
                "size": "-" if up is None else format_float(up.max_nonconstant()),
                "failed": rec.failed,
                "error": error.get("error", ""),
            }
        )
    relations = relation_report(data)
    print(
        render_summary(
            "modulus_summary.mustache",
            {
                "family": data.family or "family",
                "normalization": data.normalization,
                "n_records": len(data.records),
                "n_failed": int(relations.get("failed_records", 0)),
                "nmax": config.nmax,
                "records": records,
                "relations": [
                    {"name": k, "value": format_float(v)}
                    for k, v in sorted(relations.items())
                    if k != "failed_records"
                ],
            },
        ),
        file=sys.stderr,
    )


# #############################################################################
# ## Compare
# #############################################################################


@main.command(
    short_help="Decide whether two moduli are equivalent.",
    help="""
Compare the moduli in the files A and B record by record, up to a real translation of
the Fatou coordinates.

Exits with status 2 when the moduli are inequivalent.
""",
    no_args_is_help=True,
)
@click.argument("a", type=str)
@click.argument("b", type=str)
@click.option("-o", "--out", type=str, default=None, help="Output file for the report.")
@click.option(
    "--threshold", type=float, default=1e-6, show_default=True, help="Acceptance threshold."
)
@click.option("--summary", is_flag=True, default=False, help="Print a text summary to stderr.")
@run_options
@handles_errors
def compare(
    a: str,
    b: str,
    out: Optional[str],
    threshold: float,
    summary: bool,
    config_file: Optional[str],
    **overrides: Any,
) -> None:
    config = build_config(config_file, **overrides)
    report = compare_moduli(ModulusData.read(a), ModulusData.read(b), threshold)
    data = report.to_json()
    data["config"] = config.to_dict()
    emit(data, out)
    if summary:
        notes = [report.reason] if report.reason else []
        verdict_summary("Comparison", report.verdict, report.worst_residual, threshold, notes)
    if report.verdict == "inequivalent":
        sys.exit(EXIT_NEGATIVE)


# #############################################################################
# ## Square roots
# #############################################################################


@main.group(
    short_help="Square-root criterion for holomorphic families.",
    help="Decide whether a holomorphic family is the second iterate of an antiholomorphic one, and extract the root.",
    no_args_is_help=True,
    cls=OrderedGroup,
)
def sqrt() -> None:
    pass


@sqrt.command(
    name="check",
    short_help="Check the square-root criterion.",
    help="""
Compute the weak modulus of the holomorphic family G on the configured grid and check
that the upper and lower transition maps are exchanged by the antiholomorphic symmetry.

Exits with status 2 when G has no antiholomorphic square root.
""",
    no_args_is_help=True,
)
@click.argument("g", type=str)
@click.option("--grid", type=str, default=None, help="Comma-separated real parameters.")
@click.option(
    "--threshold", type=float, default=1e-6, show_default=True, help="Acceptance threshold."
)
@click.option("--summary", is_flag=True, default=False, help="Print a text summary to stderr.")
@run_options
@handles_errors
def sqrt_check(
    g: str,
    grid: Optional[str],
    threshold: float,
    summary: bool,
    config_file: Optional[str],
    **overrides: Any,
) -> None:
    config = build_config(config_file, grid=parse_floats(grid), **overrides)
    fam, config = read_family(g, config, overrides)
    if fam.conjugating:
        raise CriterionError("The square-root criterion applies to holomorphic families.")
    verdict = square_root_test(weak_modulus(fam, config.grid, config), threshold)
    data = verdict.to_json()
    data["config"] = config.to_dict()
    print_as_json(data)
    if summary:
        verdict_summary("Square root", data["verdict"], verdict.residual, threshold, [])
    if not verdict.passes:
        sys.exit(EXIT_NEGATIVE)


@sqrt.command(
    name="extract",
    short_help="Extract the antiholomorphic square root.",
    help="""
Extract an antiholomorphic family f with f_{conj eps} o f_eps = g_eps from the
holomorphic family G, and write it as a germ family.

Exits with status 2 when G fails the square-root criterion.
""",
    no_args_is_help=True,
)
@click.argument("g", type=str)
@click.option("-o", "--out", type=str, default=None, help="Output file for the root.")
@click.option(
    "--threshold", type=float, default=1e-6, show_default=True, help="Acceptance threshold."
)
@run_options
@handles_errors
def sqrt_extract(
    g: str,
    out: Optional[str],
    threshold: float,
    config_file: Optional[str],
    **overrides: Any,
) -> None:
    config = build_config(config_file, **overrides)
    fam, config = read_family(g, config, overrides)
    try:
        result = extract_square_root(fam, config, threshold)
    except CriterionError as e:
        if e.details.get("verdict") != "no-root":
            raise
        print(json.dumps(e.to_json(), sort_keys=True), file=sys.stderr)
        sys.exit(EXIT_NEGATIVE)
    if out is None:
        print_as_json(result.to_json())
    else:
        write_json(out, result.family.to_json())
        data = result.to_json()
        del data["family"]
        print_as_json(data)


# #############################################################################
# ## Invariant curve
# #############################################################################


@main.group(
    short_help="Invariant analytic curve at eps = 0.",
    help="Decide whether the germ at eps = 0 has an invariant analytic curve through the fixed point.",
    no_args_is_help=True,
    cls=OrderedGroup,
)
def curve() -> None:
    pass


@curve.command(
    name="check",
    short_help="Check for an invariant analytic curve.",
    help="""
Compute the modulus of the prepared antiholomorphic family F at eps = 0 and check that
every odd Fourier mode vanishes.

Exits with status 2 when there is no invariant analytic curve.
""",
    no_args_is_help=True,
)
@click.argument("f", type=str)
@click.option(
    "--threshold", type=float, default=1e-6, show_default=True, help="Acceptance threshold."
)
@click.option("--summary", is_flag=True, default=False, help="Print a text summary to stderr.")
@run_options
@handles_errors
def curve_check(
    f: str,
    threshold: float,
    summary: bool,
    config_file: Optional[str],
    **overrides: Any,
) -> None:
    config = build_config(config_file, **overrides)
    fam, config = read_family(f, config, overrides)
    data = weak_modulus(fam, [0.0], config)
    record = data.records[0]
    if record.failed:
        raise CriterionError(
            "The modulus at eps = 0 could not be computed.", error=str(record.residuals.get("error"))
        )
    exists, residual = invariant_curve_test(record, threshold)
    print_as_json(
        {"invariant_curve": exists, "residual": residual, "config": config.to_dict()}
    )
    if summary:
        verdict_summary(
            "Invariant curve", "yes" if exists else "no", residual, threshold, []
        )
    if not exists:
        sys.exit(EXIT_NEGATIVE)


# #############################################################################
# ## Compatibility
# #############################################################################


@main.command(
    short_help="Check the compatibility condition of the strong modulus.",
    help="""
Check the compatibility condition of the strong modulus of the prepared family in GERM
at the real parameter --eps, from the determinations at arg 0 and arg 2 pi.

Exits with status 2 when the residual exceeds the threshold.
""",
    no_args_is_help=True,
)
@click.argument("germ", type=str)
@click.option("--eps", type=float, default=0.01, show_default=True, help="Positive parameter.")
@click.option(
    "--threshold", type=float, default=1e-5, show_default=True, help="Acceptance threshold."
)
@click.option("--summary", is_flag=True, default=False, help="Print a text summary to stderr.")
@run_options
@handles_errors
def compat(
    germ: str,
    eps: float,
    threshold: float,
    summary: bool,
    config_file: Optional[str],
    **overrides: Any,
) -> None:
    config = build_config(config_file, **overrides)
    fam, config = read_family(germ, config, overrides)
    report = compatibility_residual(fam, eps, config)
    data = report.to_json()
    data["eps"] = eps
    data["compatible"] = report.residual <= threshold
    data["config"] = config.to_dict()
    print_as_json(data)
    if summary:
        verdict_summary(
            "Compatibility",
            "compatible" if data["compatible"] else "incompatible",
            report.residual,
            threshold,
            [f"D = {report.D:.3e}", f"D' = {report.D_prime:.3e}"],
        )
    if not data["compatible"]:
        sys.exit(EXIT_NEGATIVE)


# #############################################################################
# ## Portrait
# #############################################################################


@main.command(
    short_help="Write forward orbits and translation-domain boundaries.",
    help="""
Write forward orbits of the prepared family in GERM at the parameter --eps, together
with the boundaries of both translation domains, as CSV with columns
z_re, z_im, orbit_id, iterate_index. Boundary curves have negative orbit ids.

With --png the portrait is also rendered with matplotlib (install the 'plot' extra).
""",
    no_args_is_help=True,
)
@click.argument("germ", type=str)
@click.option("--eps", type=float, required=True, help="Parameter value.")
@click.option("-o", "--out", type=str, required=True, help="Output CSV file.")
@click.option("--png", type=str, default=None, help="Optional PNG output file.")
@run_options
@handles_errors
def portrait(
    germ: str,
    eps: float,
    out: str,
    png: Optional[str],
    config_file: Optional[str],
    **overrides: Any,
) -> None:
    config = build_config(config_file, **overrides)
    fam, config = read_family(germ, config, overrides)
    result = make_portrait(fam, eps, config)
    result.write_csv(out)
    status(f"Wrote {len(result.rows)} points to {out}", config.verbose)
    if png is not None:
        result.write_png(png)
        status(f"Wrote {png}", config.verbose)


# #############################################################################
# ## Config
# #############################################################################


@main.group(
    short_help="Inspect the configuration.",
    help="Inspect the configuration used by the other commands.",
    no_args_is_help=True,
    cls=OrderedGroup,
)
def config() -> None:
    pass


@config.command(
    name="show",
    help="Print the effective configuration and the location of the user config file.",
)
@click.option("--config", "config_file", type=str, default=None, help="Path to a JSON config file.")
@handles_errors
def config_show(config_file: Optional[str]) -> None:
    print_as_json(
        {
            "config": load_config(config_file).to_dict(),
            "user_config_path": str(user_config_path()),
        }
    )
