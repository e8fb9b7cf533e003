"""Command-line interface: CSV tables, SVG plots and the verification suite.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import DomainError, NumericalError
from .quadrature import QuadratureSpec
from .simulate import MAX_POINTS, TimeGrid

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3
MAX_INDEX = 4096
FORMATS = ("csv", "svg", "both")


class UsageError(Exception):
    """Invalid command line or configuration."""


@dataclass(frozen=True)
class RunConfig:
    """Validated settings of one command invocation."""

    command: str
    hurst: float = 0.7
    t: float = 1.0
    T: float = 1.0
    jmin: int = -512
    jmax: int = 512
    grid_l: float = 16.0
    grid_n: int = 2048
    paths: int = 1
    seed: int = 0
    tol_abs: float = 1e-8
    tol_rel: float = 1e-6
    count: int = 5
    t_max: float = 2.0
    out: str | None = None
    format: str = "csv"
    quick: bool = False
    only: str | None = None

    def __post_init__(self):
        if not 0 < self.hurst < 1:
            raise UsageError(f"hurst must lie in (0, 1), got {self.hurst}")
        if not math.isfinite(self.t):
            raise UsageError("t must be finite")
        if not self.T > 0:
            raise UsageError("T must be positive")
        if self.jmin > self.jmax:
            raise UsageError(f"empty index window [{self.jmin}, {self.jmax}]")
        if max(abs(self.jmin), abs(self.jmax)) > MAX_INDEX:
            raise UsageError(f"index window exceeds +-{MAX_INDEX}")
        if not self.grid_l > 0:
            raise UsageError("grid-l must be positive")
        if not 2 <= self.grid_n <= MAX_POINTS or self.grid_n % 2:
            raise UsageError(f"grid-n must be even and in [2, {MAX_POINTS}]")
        if self.paths < 1:
            raise UsageError("paths must be positive")
        if not (self.tol_abs > 0 and self.tol_rel > 0):
            raise UsageError("tolerances must be positive")
        if self.format not in FORMATS:
            raise UsageError(f"format must be one of {FORMATS}")

    @property
    def quadrature(self) -> QuadratureSpec:
        return QuadratureSpec(abs_tol=self.tol_abs, rel_tol=self.tol_rel)

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid.span(-self.grid_l, self.grid_l, self.grid_n)

    @property
    def window(self) -> tuple[int, int]:
        return self.jmin, self.jmax

    @property
    def stem(self) -> Path:
        if self.out is None:
            return Path(self.command.replace("-", "_"))
        p = Path(self.out)
        return p.with_suffix("") if p.suffix in (".csv", ".svg") else p


_CONVERTERS = {f.name: f.type for f in fields(RunConfig)}
_CASTS = {"float": float, "int": int, "str | None": str, "str": str, "bool": None}


def _cast(key: str, value: str):
    kind = _CONVERTERS[key]
    if kind == "bool":
        low = str(value).strip().lower()
        if low not in ("1", "0", "true", "false", "yes", "no"):
            raise UsageError(f"{key} expects a boolean, got {value!r}")
        return low in ("1", "true", "yes")
    try:
        return _CASTS[kind](value)
    except ValueError:
        raise UsageError(f"{key} expects {kind}, got {value!r}") from None


def read_config(path: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment; keys use flag names."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    out = {}
    for number, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().lstrip("-").replace("-", "_")
        if not sep or key not in _CONVERTERS or key == "command":
            raise UsageError(f"{path}:{number}: unrecognized line {raw!r}")
        out[key] = _cast(key, value.strip())
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fbmchaos", description="Chaos expansions and prediction of fractional Brownian motion.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _Parser(add_help=False)
    s = argparse.SUPPRESS
    common.add_argument("--config", help="key=value file; command-line flags take precedence")
    common.add_argument("--hurst", type=float, default=s, help="Hurst parameter in (0, 1) (default 0.7)")
    common.add_argument("--t", type=float, default=s, help="time of the predicted value (default 1)")
    common.add_argument("--T", type=float, default=s, help="finite horizon half-width (default 1)")
    common.add_argument("--jmin", type=int, default=s, help="lowest basis index (default -512)")
    common.add_argument("--jmax", type=int, default=s, help="highest basis index (default 512)")
    common.add_argument("--grid-l", type=float, default=s, help="simulation grid covers [-L, L] (default 16)")
    common.add_argument("--grid-n", type=int, default=s, help="number of grid cells (default 2048)")
    common.add_argument("--paths", type=int, default=s, help="number of simulated paths (default 1)")
    common.add_argument("--seed", type=int, default=s, help="random seed (default 0)")
    common.add_argument("--tol-abs", type=float, default=s, help="absolute quadrature tolerance (default 1e-8)")
    common.add_argument("--tol-rel", type=float, default=s, help="relative quadrature tolerance (default 1e-6)")
    common.add_argument("--out", default=s, help="output path stem; .csv/.svg are appended")
    common.add_argument("--format", choices=FORMATS, default=s, help="which files to write (default csv)")
    helps = {
        "coeffs": "coefficients r_j(t) over the index window",
        "error-curve": "prediction error after the k largest past coefficients",
        "render-path": "one simulated path split into past and future components",
        "simulate": "exact fBm sample paths on the grid",
        "gram": "Monte Carlo Gram matrix of the basis integrals",
        "finite-horizon": "Bessel-zero kernel basis on [-T, T] and its Gram matrix",
        "verify": "run the acceptance checks",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, parents=[common], help=text, description=text)
        if name == "render-path":
            p.add_argument("--t-max", type=float, default=s, help="render times with |t| <= t-max (default 2)")
        if name == "finite-horizon":
            p.add_argument("--count", type=int, default=s, help="number of basis elements (default 5)")
        if name == "verify":
            p.add_argument("--quick", action="store_true", default=s, help="skip the Monte Carlo checks")
            p.add_argument("--only", default=s, help="comma-separated check numbers")
    return parser


def parse_config(argv) -> RunConfig:
    ns = vars(_build_parser().parse_args(argv))
    command = ns.pop("command")
    settings = read_config(ns.pop("config")) if ns.get("config") else {}
    ns.pop("config", None)
    settings.update(ns)
    return RunConfig(command=command, **settings)


# Output helpers ----------------------------------------------------------------


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(text)


def _emit(cfg: RunConfig, csv_text: str | None, figure=None) -> list[Path]:
    written = []
    stem = cfg.stem
    if cfg.format in ("csv", "both") and csv_text is not None:
        written.append(stem.with_name(stem.name + ".csv"))
        _write(written[-1], csv_text)
    if cfg.format in ("svg", "both") and figure is not None:
        written.append(stem.with_name(stem.name + ".svg"))
        _write(written[-1], figure.render())
    return written


# Commands --------------------------------------------------------------------


def cmd_coeffs(cfg: RunConfig) -> int:
    from .figures import coefficient_figure
    from .prediction import coeff_table
    from .spectral import SpectralModel

    m = SpectralModel(cfg.hurst)
    tbl = coeff_table(m, cfg.t, cfg.jmin, cfg.jmax, cfg.quadrature)
    variance = m.variance(cfg.t)
    gap = abs(tbl.energy - variance) / variance if variance > 0 else abs(tbl.energy)
    footer = (f"# variance_check sum_r2={tbl.energy:.17g} expected={variance:.17g} "
              f"relative_gap={gap:.17g} within_2pct={'true' if gap < 0.02 else 'false'}\n")
    _emit(cfg, tbl.to_csv() + footer, coefficient_figure(tbl))
    return EXIT_OK


def cmd_error_curve(cfg: RunConfig) -> int:
    from .figures import error_curve
    from .spectral import SpectralModel

    curve = error_curve(SpectralModel(cfg.hurst), cfg.t, cfg.window, cfg.quadrature)
    _emit(cfg, curve.to_csv(), curve.figure())
    return EXIT_OK


def cmd_render_path(cfg: RunConfig) -> int:
    from .figures import render_path
    from .spectral import SpectralModel

    render = render_path(SpectralModel(cfg.hurst), cfg.window, cfg.grid, cfg.seed, t_max=cfg.t_max, q=cfg.quadrature)
    _emit(cfg, render.to_csv(), render.figure())
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    from .simulate import fbm_paths
    from .spectral import SpectralModel
    from .svg import Figure

    grid = cfg.grid
    paths = fbm_paths(SpectralModel(cfg.hurst), grid, cfg.paths, cfg.seed)
    t = grid.points
    lines = ["path,t,x\n"]
    for i, row in enumerate(paths):
        lines.extend(f"{i},{a:.17g},{b:.17g}\n" for a, b in zip(t, row))
    fig = Figure(title=f"fBm sample paths, H={cfg.hurst:g}", xlabel="t", ylabel="X(t)")
    for i, row in enumerate(paths[:8]):
        fig.add(t, row, label=f"path {i}")
    _emit(cfg, "".join(lines), fig)
    return EXIT_OK


def cmd_gram(cfg: RunConfig) -> int:
    from .simulate import mc_gram
    from .spectral import SpectralModel
    from .svg import Figure

    est = mc_gram(SpectralModel(cfg.hurst), cfg.window, cfg.grid, cfg.paths, cfg.seed, cfg.quadrature)
    z = est.z_scores().ravel()
    fig = Figure(title=f"Gram z-scores against the identity, H={cfg.hurst:g}", xlabel="entry", ylabel="z")
    fig.add(np.arange(len(z)), z, label="(empirical - identity) / stderr", style="stem")
    _emit(cfg, est.to_csv(), fig)
    return EXIT_OK


def cmd_finite_horizon(cfg: RunConfig) -> int:
    from .finite_horizon import fh_basis_gram, gram_to_csv, horizon_basis, kernel_S
    from .spectral import SpectralModel
    from .svg import Figure

    m = SpectralModel(cfg.hurst)
    basis = horizon_basis(m, cfg.T, cfg.count, cfg.quadrature)
    gram = fh_basis_gram(m, cfg.T, cfg.count, cfg.quadrature)
    if cfg.format in ("csv", "both"):
        stem = cfg.stem
        _write(stem.with_name(stem.name + "_zeros.csv"), basis.to_csv())
    g = np.linspace(-basis.nodes[-1] - 4 / cfg.T, basis.nodes[-1] + 4 / cfg.T, 801)
    fig = Figure(title=f"normalized kernels S(eta_n, g), H={cfg.hurst:g}, T={cfg.T:g}", xlabel="g", ylabel="S")
    for n, (eta, norm) in enumerate(zip(basis.nodes, basis.norms)):
        fig.add(g, np.real(kernel_S(m, cfg.T, eta, g)) / norm, label=f"n={n}")
    _emit(cfg, gram_to_csv(gram), fig)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    from .acceptance import report_csv, run_checks

    only = None
    if cfg.only:
        try:
            only = {int(v) for v in cfg.only.split(",") if v.strip()}
        except ValueError:
            raise UsageError(f"--only expects comma-separated integers, got {cfg.only!r}") from None
    results = run_checks(quick=cfg.quick, only=only, echo=lambda line: print(line, file=sys.stderr, flush=True))
    report = report_csv(results)
    sys.stdout.write(report)
    if cfg.out is not None:
        _write(cfg.stem.with_name(cfg.stem.name + ".csv"), report)
    return EXIT_OK if all(r.status != "FAIL" for r in results) else EXIT_VERIFY


COMMANDS = {
    "coeffs": cmd_coeffs,
    "error-curve": cmd_error_curve,
    "render-path": cmd_render_path,
    "simulate": cmd_simulate,
    "gram": cmd_gram,
    "finite-horizon": cmd_finite_horizon,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        return COMMANDS[cfg.command](cfg)
    except (UsageError, DomainError) as exc:
        print(f"fbmchaos: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"fbmchaos: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
