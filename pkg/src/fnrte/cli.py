"""Command-line driver: configuration parsing, method dispatch, q0 sweeps in
transport mean free path units, delimited output, and figure rendering."""

import argparse
import math
import sys
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import ConfigurationError, SolverError
from .fn_solver import FluxCurve, FluxSample, FnWorkspace, hemispheric_flux
from .mc_oracle import flux_fourier, simulate
from .mrrf_solver import mrrf_flux, solve_mrrf
from .spectrum import OpticalMedium

__all__ = ["RunConfig", "convert_units", "main", "parse_config", "run"]

_METHODS = ("fn", "mrrf", "mc")


@dataclass(frozen=True)
class RunConfig:
    """One sweep: medium, expansion cutoffs, q0 grid (in 1/ell* units)."""

    mu_a: float = 0.05
    mu_s: float = 100.0
    g: float = 0.01
    L: int = 9
    lmax: tuple = (9,)
    methods: tuple = ("fn",)
    q0_min: float = 0.0
    q0_max: float = 10.0
    q0_steps: int = 11
    n_mu: int = None
    n_phi: int = None
    photons: int = 100000
    seed: int = 12345
    out: str = "flux.csv"
    extended: bool = False
    plot: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lmax", tuple(int(v) for v in self.lmax))
        object.__setattr__(self, "methods", tuple(self.methods))
        if not self.methods:
            raise ConfigurationError("at least one method must be requested")
        for m in self.methods:
            if m not in _METHODS:
                raise ConfigurationError(f"unknown method '{m}'")
        if not self.lmax:
            raise ConfigurationError("at least one lmax value is required")
        if self.q0_steps < 1:
            raise ConfigurationError("q0 grid must be non-empty")
        if self.q0_max < self.q0_min or self.q0_min < 0:
            raise ConfigurationError("q0 grid bounds must satisfy 0 <= min <= max")
        for lm in self.lmax:
            if lm < self.L:
                raise ConfigurationError("lmax must be >= L")
        if self.photons < 1:
            raise ConfigurationError("photons must be >= 1")

    def medium(self) -> OpticalMedium:
        return OpticalMedium(self.mu_a, self.mu_s, self.g, self.L)

    def q0_grid(self) -> np.ndarray:
        if self.q0_steps == 1:
            return np.array([self.q0_min])
        return np.linspace(self.q0_min, self.q0_max, self.q0_steps)

    def serialize(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


def parse_config(text: str) -> RunConfig:
    """Parse 'key = value' lines (with # comments) into a RunConfig."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"config line {lineno}: expected key = value")
        key, val = (part.strip() for part in line.split("=", 1))
        raw[key] = val
    kwargs = {}
    casts = {f.name: f for f in fields(RunConfig)}
    for key, val in raw.items():
        if key == "methods" or key == "method":
            kwargs["methods"] = tuple(
                v.strip() for v in val.split(",") if v.strip()
            )
        elif key == "lmax":
            kwargs["lmax"] = tuple(int(v) for v in val.split(",") if v.strip())
        elif key in ("extended", "plot"):
            kwargs[key] = val.lower() in ("1", "true", "yes", "on")
        elif key in ("L", "q0_steps", "photons", "seed"):
            kwargs[key] = int(val)
        elif key in ("n_mu", "n_phi"):
            kwargs[key] = None if val == "None" else int(val)
        elif key == "out":
            kwargs[key] = val
        elif key in casts:
            kwargs[key] = float(val)
        else:
            raise ConfigurationError(f"unknown config key '{key}'")
    return RunConfig(**kwargs)


def convert_units(q0_per_ellstar: float, medium: OpticalMedium) -> float:
    """Spatial frequency from 1/ell* units to the internal 1/mu_t units."""
    return q0_per_ellstar * (medium.mu_t - medium.mu_s * medium.g) / medium.mu_t


def run(config: RunConfig) -> FluxCurve:
    """Execute every requested method over the q0 grid and write the CSV."""
    medium = config.medium()
    grid = config.q0_grid()
    samples = []
    for method in config.methods:
        if method == "fn":
            for lm in config.lmax:
                ws = FnWorkspace(
                    medium, lm, config.n_mu, config.n_phi, extended=config.extended
                )
                for q0 in grid:
                    system = ws.solve(convert_units(q0, medium))
                    samples.append(
                        FluxSample(float(q0), hemispheric_flux(system), "fn", lm)
                    )
        elif method == "mrrf":
            for lm in config.lmax:
                for q0 in grid:
                    sol = solve_mrrf(
                        medium, lm, convert_units(q0, medium),
                        extended=config.extended,
                    )
                    samples.append(
                        FluxSample(float(q0), mrrf_flux(sol, medium), "mrrf", lm)
                    )
        elif method == "mc":
            records = simulate(medium, config.photons, config.seed)
            for q0 in grid:
                value, stderr = flux_fourier(records, convert_units(q0, medium))
                samples.append(FluxSample(float(q0), value, "mc", 0, stderr))
    curve = FluxCurve(samples)
    _write_csv(curve, config.out)
    if config.plot:
        _write_plot(curve, config.out)
    return curve


def _write_csv(curve: FluxCurve, path: str):
    with open(path, "w") as fh:
        fh.write("q0_per_ellstar,method,l_max,J_plus,stderr\n")
        for s in curve.samples:
            err = "" if s.stderr is None else f"{s.stderr:.12g}"
            fh.write(
                f"{s.q0_per_ellstar:.12g},{s.method},{s.l_max},{s.j_plus:.12g},{err}\n"
            )


def _plot_path(out: str) -> str:
    stem = out[: -len(".csv")] if out.endswith(".csv") else out
    return stem + ".png"


def _write_plot(curve: FluxCurve, out: str) -> str:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    seen = sorted({(s.method, s.l_max) for s in curve.samples})
    for method, lm in seen:
        pts = curve.for_method(method, lm)
        label = method if method == "mc" else f"{method} (l_max={lm})"
        style = "o" if method == "mc" else "-"
        ax.plot(
            [p.q0_per_ellstar for p in pts],
            [p.j_plus for p in pts],
            style,
            ms=3,
            label=label,
        )
    ax.set_xlabel(r"$q_0$  [$1/\ell^*$]")
    ax.set_ylabel(r"$J_+$")
    ax.set_yscale("log")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    path = _plot_path(out)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fnrte",
        description="Half-space structured-illumination exitance by the "
        "facile boundary expansion, the rotated-frame expansion, and "
        "Monte Carlo.",
    )
    p.add_argument("--config", help="key = value config file; flags override")
    p.add_argument("--mu-a", type=float, dest="mu_a")
    p.add_argument("--mu-s", type=float, dest="mu_s")
    p.add_argument("--g", type=float)
    p.add_argument("--L", type=int)
    p.add_argument("--lmax", help="expansion cutoff, or comma list for sweeps")
    p.add_argument(
        "--method",
        action="append",
        choices=_METHODS,
        help="repeatable: fn, mrrf, mc",
    )
    p.add_argument("--q0-min", type=float, dest="q0_min")
    p.add_argument("--q0-max", type=float, dest="q0_max")
    p.add_argument("--q0-steps", type=int, dest="q0_steps")
    p.add_argument("--n-mu", type=int, dest="n_mu")
    p.add_argument("--n-phi", type=int, dest="n_phi")
    p.add_argument("--photons", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument(
        "--extended",
        action="store_true",
        default=None,
        help="80-bit assembly and 40-digit solves for fn/mrrf",
    )
    p.add_argument(
        "--plot",
        action="store_true",
        default=None,
        help="render the flux curves to PNG next to the CSV",
    )
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            with open(args.config) as fh:
                config = parse_config(fh.read())
        else:
            config = RunConfig()
        overrides = {}
        for name in (
            "mu_a", "mu_s", "g", "L", "q0_min", "q0_max", "q0_steps",
            "n_mu", "n_phi", "photons", "seed", "out", "extended", "plot",
        ):
            val = getattr(args, name)
            if val is not None:
                overrides[name] = val
        if args.lmax is not None:
            overrides["lmax"] = tuple(int(v) for v in str(args.lmax).split(","))
        if args.method:
            overrides["methods"] = tuple(args.method)
        config = replace(config, **overrides)
    except (ConfigurationError, OSError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        run(config)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
