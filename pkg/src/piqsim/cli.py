"""Command-line entry point: ``piqsim {evolve,sweep,rates,oracle,meanfield}``.

Every option may also be given in a JSON file passed with ``--config``; keys
are the option names with dashes replaced by underscores, and flags given on
the command line take precedence over the file.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analytic, csvio, dynamics, full_oracle, motional
from .dynamics import IntegrationError, SystemParams
from .full_oracle import CapacityError
from .motional import ConvergenceError, UnsupportedFeatureError
from .pi_state import PIState, fully_excited, ground_state, init_dicke
from .spin_algebra import DomainError

EXIT_OK, EXIT_VALIDATION, EXIT_CAPACITY, EXIT_NUMERICAL = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


class OracleFailure(RuntimeError):
    pass


# -- value parsing -----------------------------------------------------------

def parse_grid(spec, integer: bool = False) -> list:
    """Parse ``start:end:step`` (inclusive), ``a,b,c`` or a single value."""
    if isinstance(spec, (list, tuple)):
        vals = [float(v) for v in spec]
    elif isinstance(spec, (int, float)):
        vals = [float(spec)]
    else:
        text = str(spec).strip()
        if ":" in text:
            try:
                start, end, step = (float(p) for p in text.split(":"))
            except ValueError:
                raise ConfigError(f"bad range {text!r}; expected start:end:step") from None
            if step <= 0 or end < start:
                raise ConfigError(f"bad range {text!r}; need step > 0 and end >= start")
            count = int(math.floor((end - start) / step + 1e-9)) + 1
            vals = [start + i * step for i in range(count)]
            if abs(vals[-1] - end) <= 1e-12 * max(1.0, abs(end)):
                vals[-1] = end
        else:
            try:
                vals = [float(p) for p in text.split(",") if p.strip()]
            except ValueError:
                raise ConfigError(f"bad value list {text!r}") from None
    if not vals:
        raise ConfigError(f"empty grid {spec!r}")
    if integer:
        if any(v != int(v) for v in vals):
            raise ConfigError(f"expected integers, got {spec!r}")
        return [int(v) for v in vals]
    return vals


def parse_initial(spec: str, N: int) -> PIState:
    spec = str(spec).strip()
    if spec == "fully_excited":
        return fully_excited(N)
    if spec == "ground":
        return ground_state(N)
    if spec.startswith("dicke:"):
        try:
            tj, tm = (int(p) for p in spec[len("dicke:"):].split(","))
        except ValueError:
            raise ConfigError(f"bad initial state {spec!r}; expected dicke:2J0,2M0") from None
        return init_dicke(N, tj, tm)
    raise ConfigError(f"unknown initial state {spec!r}")


def make_params(N: int, gamma, dgamma, ddd) -> SystemParams:
    if gamma is not None and dgamma is not None:
        if abs(float(gamma) + float(dgamma) - 1.0) > 1e-12:
            raise ConfigError("gamma and dgamma given but gamma + dgamma != 1")
        return SystemParams(N, float(gamma), float(dgamma), float(ddd))
    if gamma is not None:
        return SystemParams.from_gamma(N, float(gamma), float(ddd))
    return SystemParams.from_dgamma(N, float(0.0 if dgamma is None else dgamma), float(ddd))


def worker_count() -> int:
    env = os.environ.get("PIQSIM_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"PIQSIM_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError("PIQSIM_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


# -- argument handling -------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


DEFAULTS = {
    "evolve": dict(gamma=None, dgamma=None, ddd=0.0, initial="fully_excited", t_end=10.0,
                   samples=201, rtol=dynamics.DEFAULT_RTOL, atol=dynamics.DEFAULT_ATOL,
                   populations=False, output=None),
    "sweep": dict(dgamma="0:1:0.05", ddd=0.0, initial="fully_excited", horizon=10.0,
                  rtol=dynamics.DEFAULT_RTOL, atol=dynamics.DEFAULT_ATOL, output=None),
    "rates": dict(eta=None, x=None, beta_omega=0.1, z=None, k0r=None, density=None, k0=None,
                  delta=False, normalize=False, output=None),
    "oracle": dict(seeds=10, t_end=5.0, samples=50, tol=1e-6, output=None),
    "meanfield": dict(gamma=None, dgamma=None, ddd=0.0, t_i=None, theta0=0.0, t_end=None,
                      samples=201, output=None),
}
REQUIRED = {"evolve": ("n",), "sweep": ("n",), "rates": ("model",), "oracle": ("n",),
            "meanfield": ("n",)}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="piqsim", description="Cooperative emission of permutation-invariant atoms.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON file with option values")
        sp.add_argument("--output", "-o", help="output CSV path (default: stdout)")

    def rates_opts(sp):
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--dgamma", type=float)
        sp.add_argument("--ddd", type=float)

    sp = sub.add_parser("evolve", help="integrate one trajectory")
    common(sp)
    sp.add_argument("--n", type=int)
    rates_opts(sp)
    sp.add_argument("--initial")
    sp.add_argument("--t-end", type=float)
    sp.add_argument("--samples", type=int)
    sp.add_argument("--rtol", type=float)
    sp.add_argument("--atol", type=float)
    sp.add_argument("--populations", action="store_const", const=True)

    sp = sub.add_parser("sweep", help="pulse metrics over an (N, dgamma) grid")
    common(sp)
    sp.add_argument("--n", help="atom numbers: start:end:step or a,b,c")
    sp.add_argument("--dgamma", help="dgamma grid: start:end:step or a,b,c")
    sp.add_argument("--ddd", type=float)
    sp.add_argument("--initial")
    sp.add_argument("--horizon", type=float)
    sp.add_argument("--rtol", type=float)
    sp.add_argument("--atol", type=float)

    sp = sub.add_parser("rates", help="gamma (and Delta_dd) for a motional model")
    common(sp)
    sp.add_argument("model", nargs="?",
                    choices=["gaussian", "thomas-fermi", "thermal-bose", "thermal-cloud", "custom"])
    sp.add_argument("--eta")
    sp.add_argument("--x")
    sp.add_argument("--beta-omega", type=float)
    sp.add_argument("--z")
    sp.add_argument("--k0r")
    sp.add_argument("--density", help="two-column CSV (r, rho1) for the custom model")
    sp.add_argument("--k0")
    sp.add_argument("--delta", action="store_const", const=True, help="also compute Delta_dd")
    sp.add_argument("--normalize", action="store_const", const=True,
                    help="rescale a tabulated density to unit norm")

    sp = sub.add_parser("oracle", help="PI solver vs full 2^N Lindblad evolution")
    common(sp)
    sp.add_argument("--n", help="atom numbers (<= 6): start:end:step or a,b,c")
    sp.add_argument("--seeds", type=int)
    sp.add_argument("--t-end", type=float)
    sp.add_argument("--samples", type=int)
    sp.add_argument("--tol", type=float)

    sp = sub.add_parser("meanfield", help="mean-field p(t), theta(t) and pulse")
    common(sp)
    sp.add_argument("--n", type=int)
    rates_opts(sp)
    sp.add_argument("--t-i", type=float, help="delay time (default ln N / (N gamma))")
    sp.add_argument("--theta0", type=float)
    sp.add_argument("--t-end", type=float)
    sp.add_argument("--samples", type=int)
    return p


def resolve(ns: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags (flags win)."""
    cfg = dict(DEFAULTS[ns.command])
    if ns.config:
        try:
            with open(ns.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        known = set(vars(ns)) - {"command", "config"}
        unknown = set(loaded) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for key, val in vars(ns).items():
        if key in ("command", "config") or val is None:
            continue
        cfg[key] = val
    for key in REQUIRED[ns.command]:
        if cfg.get(key) is None:
            raise ConfigError(f"missing required option --{key}")
    return cfg


# -- commands ----------------------------------------------------------------

@dataclass
class Output:
    text: str
    path: str | None

    def emit(self) -> None:
        if self.path:
            Path(self.path).write_text(self.text)
        else:
            sys.stdout.write(self.text)


def cmd_evolve(cfg: dict) -> Output:
    N = int(cfg["n"])
    params = make_params(N, cfg["gamma"], cfg["dgamma"], cfg["ddd"])
    state0 = parse_initial(cfg["initial"], N)
    t_end, samples = float(cfg["t_end"]), int(cfg["samples"])
    if t_end <= 0 or samples < 2:
        raise ConfigError("need t_end > 0 and samples >= 2")
    grid = np.linspace(0.0, t_end, samples)
    traj = dynamics.evolve(params, state0, t_end, float(cfg["rtol"]), float(cfg["atol"]), grid)
    return Output(csvio.trajectory_csv(traj, bool(cfg["populations"])), cfg["output"])


def _sweep_point(task):
    N, dg, ddd, initial, horizon, rtol, atol = task
    params = SystemParams.from_dgamma(N, dg, ddd)
    m = dynamics.pulse_metrics(params, parse_initial(initial, N), horizon,
                               reltol=rtol, abstol=atol)
    return csvio.metrics_row(params, m)


def sweep_tasks(cfg: dict) -> list[tuple]:
    ns = parse_grid(cfg["n"], integer=True)
    dgs = parse_grid(cfg["dgamma"])
    tasks = []
    for N in ns:
        for dg in dgs:
            SystemParams.from_dgamma(N, dg, float(cfg["ddd"]))
            parse_initial(cfg["initial"], N)
            tasks.append((N, dg, float(cfg["ddd"]), cfg["initial"], float(cfg["horizon"]),
                          float(cfg["rtol"]), float(cfg["atol"])))
    return tasks


def run_sweep(tasks: list[tuple], workers: int) -> list[tuple]:
    if workers <= 1 or len(tasks) <= 1:
        return [_sweep_point(t) for t in tasks]
    # longest trajectories (large N) first keeps the pool busy at the end
    order = sorted(range(len(tasks)), key=lambda i: -tasks[i][0])
    with ProcessPoolExecutor(max_workers=workers) as pool:
        done = list(pool.map(_sweep_point, [tasks[i] for i in order]))
    rows: list = [None] * len(tasks)
    for i, row in zip(order, done):
        rows[i] = row
    return rows


def cmd_sweep(cfg: dict) -> Output:
    tasks = sweep_tasks(cfg)
    rows = run_sweep(tasks, worker_count())
    return Output(csvio.metrics_csv(rows), cfg["output"])


def _fmt_params(d: dict) -> str:
    return ";".join(f"{k}={float(v)!r}" for k, v in d.items())


def rate_models(cfg: dict) -> list:
    model = cfg["model"]

    def need(key):
        if cfg.get(key) is None:
            raise ConfigError(f"model {model} needs --{key.replace('_', '-')}")
        return parse_grid(cfg[key])

    if model == "gaussian":
        return [motional.GaussianGround(v) for v in need("eta")]
    if model == "thomas-fermi":
        return [motional.ThomasFermi(v) for v in need("x")]
    if model == "thermal-cloud":
        return [motional.ThermalCloud(v) for v in need("k0r")]
    if model == "thermal-bose":
        if cfg["delta"]:
            raise UnsupportedFeatureError("Delta_dd is not available for the thermal-bose model")
        bo = float(cfg["beta_omega"])
        if bo <= 0:
            raise ConfigError("--beta-omega must be positive")
        zs = need("z")
        if any(not 0 <= z <= 1 for z in zs):
            raise ConfigError("fugacity z must lie in [0, 1]")
        return [motional.ThermalBose(eta, bo, z) for z in zs for eta in need("eta")]
    if model == "custom":
        if cfg.get("density") is None:
            raise ConfigError("model custom needs --density")
        try:
            data = np.loadtxt(cfg["density"], delimiter=",", ndmin=2)
        except (OSError, ValueError):
            try:
                data = np.loadtxt(cfg["density"], delimiter=",", skiprows=1, ndmin=2)
            except (OSError, ValueError) as exc:
                raise ConfigError(f"cannot read density table: {exc}") from None
        if data.shape[1] != 2:
            raise ConfigError("density table must have exactly two columns (r, rho1)")
        base = motional.CustomIsotropic.from_table(data[:, 0], data[:, 1], 1.0,
                                                   normalize=bool(cfg["normalize"]))
        return [base.with_k0(k0) for k0 in need("k0")]
    raise ConfigError(f"unknown model {model!r}")


def cmd_rates(cfg: dict) -> Output:
    models = rate_models(cfg)
    rows = []
    for m in models:
        if isinstance(m, motional.CustomIsotropic):
            params = {"k0": m.k0}
        else:
            params = m.params()
        gamma = motional.gamma_of(m)
        delta = ""
        if cfg["delta"]:
            k0 = m.k0 if isinstance(m, motional.CustomIsotropic) else m.to_density().k0
            delta = -math.inf if k0 == 0 else motional.delta_from_density(m)
        rows.append((cfg["model"], _fmt_params(params), float(gamma), delta))
    return Output(csvio.render(csvio.RATES_COLUMNS, rows), cfg["output"])


def cmd_oracle(cfg: dict) -> Output:
    ns = parse_grid(cfg["n"], integer=True)
    for N in ns:
        if N > full_oracle.MAX_N:
            raise CapacityError(f"oracle supports N <= {full_oracle.MAX_N}, got N={N}")
        if N < 1:
            raise ConfigError(f"N must be positive, got {N}")
    seeds = int(cfg["seeds"])
    if seeds < 1:
        raise ConfigError("--seeds must be >= 1")
    rows = [
        full_oracle.run_equivalence(N, s, float(cfg["t_end"]), int(cfg["samples"]),
                                    float(cfg["tol"]))
        for N in ns for s in range(seeds)
    ]
    out = Output(csvio.render(full_oracle.REPORT_COLUMNS, [r.as_row() for r in rows]),
                 cfg["output"])
    if not all(r.passed for r in rows):
        out.emit()
        raise OracleFailure("PI solver and full-space evolution disagree")
    return out


def cmd_meanfield(cfg: dict) -> Output:
    N = int(cfg["n"])
    params = make_params(N, cfg["gamma"], cfg["dgamma"], cfg["ddd"])
    g = params.gamma
    t_I = analytic.meanfield_delay_estimate(N, g) if cfg["t_i"] is None else float(cfg["t_i"])
    t_end = 4 * t_I + 10.0 / (N * g) if cfg["t_end"] is None else float(cfg["t_end"])
    samples = int(cfg["samples"])
    if t_end <= 0 or samples < 2:
        raise ConfigError("need t_end > 0 and samples >= 2")
    t = np.linspace(0.0, t_end, samples)
    p, theta = analytic.meanfield_trajectory(N, g, t_I, t, params.ddd, float(cfg["theta0"]))
    I = analytic.meanfield_intensity(N, g, t_I, t)
    rows = [(float(a), float(b), float(c), float(d)) for a, b, c, d in zip(t, p, theta, I)]
    return Output(csvio.render(csvio.MEANFIELD_COLUMNS, rows), cfg["output"])


COMMANDS = {
    "evolve": cmd_evolve,
    "sweep": cmd_sweep,
    "rates": cmd_rates,
    "oracle": cmd_oracle,
    "meanfield": cmd_meanfield,
}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = resolve(ns)
        out = COMMANDS[ns.command](cfg)
        out.emit()
    except CapacityError as exc:
        print(f"piqsim: capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (IntegrationError, ConvergenceError, OracleFailure) as exc:
        print(f"piqsim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DomainError, ConfigError, UnsupportedFeatureError) as exc:
        print(f"piqsim: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
