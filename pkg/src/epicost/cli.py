"""Command-line front end.

Every command writes one CSV (or an edge list for ``generate``) whose header
echoes the fully resolved configuration.  Options may come from a flat
``key=value`` file given with ``--config``; flags on the command line win.

Exit codes: 0 success, 1 usage, 2 instability on a single run, 3 I/O.
"""

from __future__ import annotations

import argparse
import itertools
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .cost import (asymptotic_cost, er_cost_report, kappa_for, linear_cost, spectral_bound,
                   system_lambda_max)
from .degree_dist import (DEFAULT_TAIL_MASS, Exponential, Pareto, PointMass, ScaledDistribution,
                          parse_dist, sample_weights)
from .epidemic import (EpidemicParams, iterate_linear, iterate_nonlinear, monte_carlo_cost,
                       path_rows, simulate_sis, trajectory_rows)
from .errors import EpicostError, InapplicableError, InstabilityError
from .graph import Graph, generate, load_edge_list, write_edge_list
from .immunize import delete_random_nodes, er_optimal_pi, er_social_cost
from .report import write_csv
from .rmt import (draw_sample, kappa_n, lemma1_limits, lemma1_terms, resolvent_stats)
from .seeding import child_seed

log = logging.getLogger("epicost")

EXIT_OK, EXIT_USAGE, EXIT_UNSTABLE, EXIT_IO = 0, 1, 2, 3
WORKERS_ENV = "EPICOST_WORKERS"

# option name -> (type, default); shared by flags and config files
OPTIONS = {
    "dist": (str, None),
    "n": (int, None),
    "edges": (str, None),
    "delta": (float, None),
    "beta": (float, None),
    "alpha": (float, 0.2),
    "cd": (float, 1.0),
    "seed": (int, 0),
    "runs": (int, 100),
    "max_steps": (int, 100_000),
    "tol": (float, 1e-10),
    "kappa": (str, "auto"),
    "tail_mass": (float, DEFAULT_TAIL_MASS),
    "samples": (int, 20),
    "p": (float, None),
    "cv": (float, None),
    "pi_grid": (str, "0:1:0.01"),
    "steps": (int, 100),
    "workers": (int, None),
    "out": (str, "-"),
    "trajectory": (str, None),
    "linear_trajectory": (str, None),
    "nonlinear_trajectory": (str, None),
}


class UsageError(EpicostError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_USAGE)


def parse_grid(text: str) -> list[float]:
    """Inclusive ``start:stop:step`` grid."""
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise UsageError(f"bad grid {text!r}; expected start:stop:step") from None
    if step <= 0 or stop < start:
        raise UsageError(f"bad grid {text!r}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


def parse_axis(text: str) -> tuple[str, list[float]]:
    name, sep, grid = text.partition("=")
    if not sep:
        raise UsageError(f"bad axis {text!r}; expected name=start:stop:step")
    name = name.strip()
    if name not in SWEEP_AXES:
        raise UsageError(f"unknown sweep axis {name!r}; choose from {sorted(SWEEP_AXES)}")
    return name, parse_grid(grid)


def read_config(path) -> dict:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        if key == "axis":
            out.setdefault("axis", []).append(value.strip())
        elif key in OPTIONS:
            out[key] = value.strip()
        else:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
    return out


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults < config file < command line, with type conversion."""
    cfg = {k: default for k, (_, default) in OPTIONS.items()}
    cfg["axis"] = []
    if args.config:
        for key, value in read_config(args.config).items():
            cfg[key] = value
    for key in OPTIONS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if getattr(args, "axis", None):
        cfg["axis"] = list(args.axis)
    for key, (typ, _) in OPTIONS.items():
        if cfg[key] is not None and not isinstance(cfg[key], typ):
            try:
                cfg[key] = typ(cfg[key])
            except ValueError:
                raise UsageError(f"option {key}: cannot convert {cfg[key]!r}") from None
    cfg["command"] = args.command
    return cfg


def _require(cfg: dict, *keys: str) -> None:
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise UsageError(f"{cfg['command']}: missing option(s) " +
                         ", ".join("--" + k.replace("_", "-") for k in missing))


def _params(cfg: dict) -> EpidemicParams:
    _require(cfg, "delta", "beta", "alpha", "cd")
    try:
        return EpidemicParams(cfg["delta"], cfg["beta"], cfg["alpha"], cfg["cd"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _dist(cfg: dict):
    _require(cfg, "dist")
    try:
        return parse_dist(cfg["dist"])
    except (ValueError, OSError) as exc:
        raise UsageError(f"--dist: {exc}") from None


def _graph(cfg: dict) -> Graph:
    """Load ``--edges`` or sample an expected-degree graph from ``--dist``/``--n``."""
    if cfg.get("edges"):
        return load_edge_list(cfg["edges"])
    _require(cfg, "dist", "n")
    dist = _dist(cfg)
    w = sample_weights(dist, cfg["n"], child_seed(cfg["seed"], 0))
    return generate(w, child_seed(cfg["seed"], 1))


def _meta(cfg: dict, **extra) -> dict:
    meta = {k: v for k, v in cfg.items() if v is not None and k != "axis"}
    for i, axis in enumerate(cfg.get("axis") or []):
        meta[f"axis{i}"] = axis
    meta.update(extra)
    return meta


COST_COLUMNS = ["method", "value", "lambda_max", "residual_or_stderr", "status",
                "delta", "beta", "alpha", "cd"]


def _cost_row(report, params: EpidemicParams, status="ok") -> dict:
    row = report.csv_row()
    row.update(status=status, delta=params.delta, beta=params.beta, alpha=params.alpha,
               cd=params.cost)
    return row


def cmd_generate(cfg):
    _require(cfg, "dist", "n")
    g = _graph(cfg)
    header = [f"epicost {__version__}"] + [f"{k}={v}" for k, v in sorted(_meta(cfg).items())]
    header += [f"nodes={g.n}", f"num_edges={g.num_edges}", f"clamped_pairs={g.clamped_pairs}"]
    if cfg["out"] in (None, "-"):
        for line in header:
            print(f"# {line}")
        for a, b in g.edges():
            print(a, b)
    else:
        write_edge_list(g, cfg["out"], header)
    return EXIT_OK


def cmd_cost(cfg, methods=("linear_solve", "spectral_bound", "er_closed_form")):
    params = _params(cfg)
    g = _graph(cfg)
    lam = system_lambda_max(g, params)
    rows = []
    if "linear_solve" in methods:
        rows.append(_cost_row(linear_cost(g, params, cfg["tol"], lambda_max=lam), params))
    if "spectral_bound" in methods:
        rows.append(_cost_row(spectral_bound(g, params, lambda_max=lam), params))
    if "er_closed_form" in methods and not cfg.get("edges"):
        dist = _dist(cfg)
        if isinstance(dist, PointMass):
            rows.append(_cost_row(er_cost_report(params.beta * dist.w0, params), params))
    write_csv(cfg["out"], COST_COLUMNS, rows, _meta(cfg, nodes=g.n, num_edges=g.num_edges))
    return EXIT_OK


def cmd_bound(cfg):
    return cmd_cost(cfg, methods=("spectral_bound",))


def cmd_simulate(cfg):
    params = _params(cfg)
    g = _graph(cfg)
    lam = system_lambda_max(g, params)
    mc = monte_carlo_cost(g, params, cfg["runs"], cfg["seed"], cfg["max_steps"])
    rows = [{"method": "monte_carlo", "value": mc.mean, "lambda_max": lam,
             "residual_or_stderr": mc.stderr,
             "status": "truncated" if mc.truncated_runs else "ok",
             "delta": params.delta, "beta": params.beta, "alpha": params.alpha,
             "cd": params.cost}]
    try:
        rows.append(_cost_row(spectral_bound(g, params, lambda_max=lam), params))
    except InstabilityError:
        rows.append({"method": "spectral_bound", "lambda_max": lam, "status": "unstable"})
    meta = _meta(cfg, nodes=g.n, num_edges=g.num_edges, truncated_runs=mc.truncated_runs)
    if cfg.get("trajectory"):
        path = simulate_sis(g, params, child_seed(cfg["seed"], 0), cfg["max_steps"])
        write_csv(cfg["trajectory"], ["t", "infected_count"], path_rows(path), meta)
    if cfg.get("linear_trajectory"):
        traj = iterate_linear(g, params, cfg["steps"])
        write_csv(cfg["linear_trajectory"], ["t", "mean_P"], trajectory_rows(traj), meta)
    if cfg.get("nonlinear_trajectory"):
        traj = iterate_nonlinear(g, params, cfg["steps"])
        write_csv(cfg["nonlinear_trajectory"], ["t", "mean_P"], trajectory_rows(traj),
                  _meta(cfg, clamped=traj.clamped))
    write_csv(cfg["out"], COST_COLUMNS, rows, meta)
    return EXIT_OK


def _kappa(cfg, beta, delta, v_bar) -> float:
    if cfg["kappa"] == "auto":
        return kappa_for(beta, delta, v_bar)
    try:
        return float(cfg["kappa"])
    except ValueError:
        raise UsageError(f"--kappa must be 'auto' or a number, got {cfg['kappa']!r}") from None


def cmd_asymptotic(cfg):
    params = _params(cfg)
    dist = ScaledDistribution(_dist(cfg), params.beta, cfg["tail_mass"])
    kappa = _kappa(cfg, params.beta, params.delta, dist.moments().mean)
    rep = asymptotic_cost(dist, params.delta, params.alpha, params.cost, kappa, cfg["tol"])
    cols = COST_COLUMNS + ["kappa", "F", "v_bar", "second_moment", "truncation_mass"]
    row = _cost_row(rep, params)
    row.update(kappa=kappa, **{k: rep.diagnostics.get(k) for k in
                               ("F", "v_bar", "second_moment", "truncation_mass")})
    write_csv(cfg["out"], cols, [row], _meta(cfg))
    return EXIT_OK


VERIFY_COLUMNS = ["n", "k", "sample", "seed", "gap", "trace", "total", "t11", "t1v", "tvv",
                  "t11_theory", "t1v_theory", "tvv_theory"]


def verification_rows(dist, beta, delta, n, samples, seed, tail_mass=DEFAULT_TAIL_MASS):
    """Per draw and k: Assumption-style gap (leave-one-out) plus the three quadratic forms."""
    v_bar = beta * dist.moments().mean
    theory = lemma1_limits(ScaledDistribution(dist, beta, tail_mass), delta,
                           kappa_n(beta, delta, v_bar))
    draws = []
    for s in range(samples):
        sd = child_seed(seed, s)
        smp = draw_sample(dist, beta, n, sd)
        draws.append((sd, resolvent_stats(smp, delta, v_bar), lemma1_terms(smp, delta)))
    traces = np.array([d[1].trace for d in draws])
    rows = []
    for s, (sd, stats, terms) in enumerate(draws):
        others = (traces.sum(axis=0) - traces[s]) / max(samples - 1, 1)
        for k in (1, 2, 3):
            rows.append({
                "n": n, "k": k, "sample": s, "seed": sd,
                "gap": abs(stats.total[k - 1] - others[k - 1]) if samples > 1 else None,
                "trace": stats.trace[k - 1], "total": stats.total[k - 1],
                "t11": terms[0], "t1v": terms[1], "tvv": terms[2],
                "t11_theory": theory[0], "t1v_theory": theory[1], "tvv_theory": theory[2],
            })
    return rows


def cmd_verify(cfg):
    params = _params(cfg)
    dist = _dist(cfg)
    _require(cfg, "n")
    rows = verification_rows(dist, params.beta, params.delta, cfg["n"], cfg["samples"],
                             cfg["seed"], cfg["tail_mass"])
    write_csv(cfg["out"], VERIFY_COLUMNS, rows,
              _meta(cfg, expectation_ensemble="weights and graph redrawn per sample"))
    return EXIT_OK


IMMUNIZE_COLUMNS = ["pi", "S_calculated", "S_simulated", "stderr", "regime", "status"]


def cmd_immunize(cfg):
    params = _params(cfg)
    _require(cfg, "cv")
    grid = parse_grid(cfg["pi_grid"])
    rows = []
    if cfg.get("edges"):
        # fixed graph: immunize by deleting nodes, evaluate on what remains
        g = load_edge_list(cfg["edges"])
        regime, pi_opt = "", None
        for i, pi in enumerate(grid):
            sub = delete_random_nodes(g, pi, child_seed(cfg["seed"], i, 0))
            row = {"pi": pi, "regime": regime}
            if sub.n == 0:
                row.update(S_calculated=cfg["cv"], S_simulated=cfg["cv"], status="ok")
                rows.append(row)
                continue
            try:
                lin = linear_cost(sub, params, cfg["tol"]).value
            except InstabilityError:
                row["status"] = "unstable"
                rows.append(row)
                continue
            keep = sub.n / g.n
            row.update(S_calculated=(1 - keep) * cfg["cv"] + keep * lin, status="ok")
            if cfg["runs"] > 0:
                mc = monte_carlo_cost(sub, params, cfg["runs"], child_seed(cfg["seed"], i, 1),
                                      cfg["max_steps"])
                row["S_simulated"] = (1 - keep) * cfg["cv"] + keep * mc.mean
                row["stderr"] = keep * mc.stderr if mc.stderr is not None else None
            rows.append(row)
        meta = _meta(cfg, nodes=g.n)
    else:
        _require(cfg, "n", "p")
        n, p = cfg["n"], cfg["p"]
        pi_opt, regime = er_optimal_pi(n, p, params, cfg["cv"])
        for i, pi in enumerate(grid):
            row = {"pi": pi, "regime": regime}
            try:
                row["S_calculated"] = er_social_cost(pi, n, p, params, cfg["cv"])
                row["status"] = "ok"
            except InstabilityError:
                row["status"] = "unstable"
                rows.append(row)
                continue
            survivors = n - math.floor(pi * n)
            if cfg["runs"] > 0 and survivors > 0:
                w = np.full(survivors, survivors * p)
                g = generate(w, child_seed(cfg["seed"], i, 0))
                mc = monte_carlo_cost(g, params, cfg["runs"], child_seed(cfg["seed"], i, 1),
                                      cfg["max_steps"])
                keep = survivors / n
                row["S_simulated"] = (1 - keep) * cfg["cv"] + keep * mc.mean
                row["stderr"] = keep * mc.stderr if mc.stderr is not None else None
            elif survivors == 0:
                row["S_simulated"] = cfg["cv"]
            rows.append(row)
        meta = _meta(cfg, pi_opt=pi_opt, optimum_regime=regime)
    write_csv(cfg["out"], IMMUNIZE_COLUMNS, rows, meta)
    return EXIT_OK


# sweep axes and how each one alters a cell's configuration
SWEEP_AXES = {"beta", "delta", "alpha", "p", "n", "theta", "rate", "w0"}

SWEEP_COLUMNS = ["status", "lambda_max", "linear_cost", "spectral_bound", "asymptotic",
                 "er_closed_form", "mc_mean", "mc_stderr", "mc_truncated", "rel_error"]


def _cell_dist(cell: dict, base_dist_text):
    if "p" in cell:
        return PointMass(cell["n"] * cell["p"])
    if "w0" in cell:
        return PointMass(cell["w0"])
    if "theta" in cell:
        return Pareto(cell["theta"])
    if "rate" in cell:
        return Exponential(cell["rate"])
    if base_dist_text is None:
        raise UsageError("sweep needs --dist or a p/w0/theta/rate axis")
    return parse_dist(base_dist_text)


def run_cell(task) -> dict:
    """Evaluate one sweep cell; instability is reported, never raised."""
    index, cell, base = task
    out = {"status": "ok"}
    try:
        params = EpidemicParams(cell["delta"], cell["beta"], cell["alpha"], cell["cd"])
    except ValueError as exc:
        out["status"] = f"invalid: {exc}"
        return out
    n = int(cell["n"])
    dist = _cell_dist(cell, base["dist"])
    seed = child_seed(base["seed"], index)
    g = generate(sample_weights(dist, n, child_seed(seed, 0)), child_seed(seed, 1))
    lam = system_lambda_max(g, params)
    out["lambda_max"] = lam
    try:
        lin = linear_cost(g, params, base["tol"], lambda_max=lam)
    except InstabilityError:
        out["status"] = "unstable"
        return out
    out["linear_cost"] = lin.value
    out["spectral_bound"] = spectral_bound(g, params, lambda_max=lam).value
    if params.beta > 0:
        try:
            sd = ScaledDistribution(dist, params.beta, base["tail_mass"])
            kappa = kappa_for(params.beta, params.delta, sd.moments().mean)
            out["asymptotic"] = asymptotic_cost(sd, params.delta, params.alpha, params.cost,
                                                kappa).value
        except (InapplicableError, EpicostError):
            pass
    if isinstance(dist, PointMass):
        try:
            out["er_closed_form"] = er_cost_report(params.beta * dist.w0, params).value
        except InstabilityError:
            pass
    if base["runs"] > 0:
        mc = monte_carlo_cost(g, params, base["runs"], child_seed(seed, 2), base["max_steps"])
        out.update(mc_mean=mc.mean, mc_stderr=mc.stderr, mc_truncated=mc.truncated_runs,
                   rel_error=abs(mc.mean - lin.value) / lin.value)
    return out


def sweep_cells(cfg) -> tuple[list[str], list[dict]]:
    axes = [parse_axis(a) for a in cfg["axis"]]
    if not axes:
        raise UsageError("sweep needs at least one --axis")
    names = [a[0] for a in axes]
    cells = []
    for values in itertools.product(*(a[1] for a in axes)):
        cell = {"beta": cfg["beta"], "delta": cfg["delta"], "alpha": cfg["alpha"],
                "cd": cfg["cd"], "n": cfg["n"]}
        cell.update(zip(names, values))
        missing = [k for k in ("beta", "delta", "n") if cell.get(k) is None]
        if missing:
            raise UsageError("sweep: missing " + ", ".join("--" + m for m in missing))
        cells.append(cell)
    return names, cells


def run_sweep(cfg, workers: int = 1) -> tuple[list[str], list[dict]]:
    names, cells = sweep_cells(cfg)
    base = {k: cfg[k] for k in ("dist", "seed", "tol", "tail_mass", "runs", "max_steps")}
    tasks = [(i, c, base) for i, c in enumerate(cells)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_cell, tasks))
    else:
        results = []
        for task in tasks:
            results.append(run_cell(task))
            log.info("cell %d/%d %s -> %s", task[0] + 1, len(tasks),
                     {k: task[1][k] for k in names}, results[-1]["status"])
    rows = []
    for cell, res in zip(cells, results):
        row = {k: cell[k] for k in names}
        row.update(res)
        rows.append(row)
    return names + SWEEP_COLUMNS, rows


def cmd_sweep(cfg):
    workers = cfg["workers"] or int(os.environ.get(WORKERS_ENV, "1"))
    columns, rows = run_sweep(cfg, max(1, workers))
    meta = _meta(cfg)
    meta.pop("workers", None)
    write_csv(cfg["out"], columns, rows, meta)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "simulate": cmd_simulate,
    "cost": cmd_cost,
    "bound": cmd_bound,
    "asymptotic": cmd_asymptotic,
    "verify": cmd_verify,
    "immunize": cmd_immunize,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="epicost", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"epicost {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key=value file; command-line flags override it")
        p.add_argument("-v", "--verbose", action="store_true")
        for key, (typ, _) in OPTIONS.items():
            flag = "--" + key.replace("_", "-")
            p.add_argument(flag, dest=key, type=str if key == "kappa" else typ, default=None)
        p.add_argument("--cd-cost", dest="cd", type=float, default=None, help=argparse.SUPPRESS)
        if name == "sweep":
            p.add_argument("--axis", action="append", default=None,
                           help="name=start:stop:step, repeatable (cross product)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"epicost: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InstabilityError as exc:
        print(f"epicost: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except OSError as exc:
        print(f"epicost: {exc}", file=sys.stderr)
        return EXIT_IO
    except (EpicostError, ValueError) as exc:
        print(f"epicost: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
