"""Command-line front end: fit panels, run simulation benchmarks, estimate rank.

Subcommands: fit, bench, rank, simulate. Config precedence: command-line
flags > config file (flat key=value lines) > defaults. Exit codes: 0
success, 2 usage error, 3 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import constants
from .alm import (DegenerateInputError, FitConfig, IllPosedDesignError,
                  alm_fit, default_lambda, default_mu)
from .metrics import ESTIMATORS, MetricsRow, run_experiment
from .panel_io import (DataError, fmt17, load_panel, save_matrix, save_panel,
                       save_vector)
from .rank import default_rank_threshold, estimate_rank
from .simulation import SimulationSpec, simulate

RESULTS_HEADER = [
    "estimator", "u", "N", "T", "phi", "error_law", "reps",
    "bias2_beta_x100", "var_beta_x1e4", "mse_L", "mse_q", "mean_seconds",
]

_ERROR_LAW_TOKENS = {"normal": "standard_normal", "t2": "student_t2"}


class UsageError(ValueError):
    pass


def _read_config(path):
    cfg = {}
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file not found: {path}")
    for lineno, line in enumerate(p.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        cfg[key.strip()] = value.strip()
    return cfg


def _effective(args, key, default=None, cast=str):
    """flags > config file > defaults."""
    val = getattr(args, key.replace("-", "_"), None)
    if val is not None:
        return val
    cfg = getattr(args, "_config", {})
    if key in cfg:
        return cast(cfg[key])
    return default


def _parse_sizes(tok):
    sizes = []
    for part in tok.split(","):
        part = part.strip().lower()
        if "x" not in part:
            raise UsageError(f"bad size token {part!r}, expected like 200x200")
        a, _, b = part.partition("x")
        try:
            sizes.append((int(a), int(b)))
        except ValueError:
            raise UsageError(f"bad size token {part!r}") from None
    return sizes


def _parse_floats(tok):
    try:
        return [float(x) for x in tok.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad numeric list {tok!r}") from None


def _parse_errors(tok):
    laws = []
    for part in tok.split(","):
        part = part.strip()
        if part not in _ERROR_LAW_TOKENS:
            raise UsageError(f"unknown error law {part!r}, expected normal or t2")
        laws.append(_ERROR_LAW_TOKENS[part])
    return laws


def _parse_estimators(tok):
    ests = []
    for part in tok.split(","):
        part = part.strip().lower()
        if part not in ESTIMATORS:
            raise UsageError(f"unknown estimator {part!r}, expected nu, it or po")
        ests.append(part)
    return ests


def _write_manifest(outdir: Path, payload: dict) -> None:
    with (outdir / "manifest.json").open("w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _fit_from_args(args):
    data = load_panel(args.input)
    u = _effective(args, "u", cast=float)
    if u is None:
        raise UsageError("--u is required")
    lam = _effective(args, "lambda", cast=float)
    tol = _effective(args, "tol", constants.ALM_TOL, float)
    max_iters = _effective(args, "max-iters", constants.ALM_MAX_ITERS, int)
    cfg = FitConfig(u=float(u), lam=lam, tol=float(tol), max_iters=int(max_iters))
    result = alm_fit(data, cfg)
    effective = {
        "input": str(args.input),
        "u": float(u),
        "lambda": result.lam,
        "mu": result.mu,
        "tol": float(tol),
        "max_iters": int(max_iters),
        "N": data.N,
        "T": data.T,
        "p": data.p,
    }
    return data, result, effective


def cmd_fit(args) -> int:
    data, result, effective = _fit_from_args(args)
    outdir = Path(_effective(args, "out", ".", str))
    outdir.mkdir(parents=True, exist_ok=True)
    save_vector(outdir / "beta.csv", ("j", "value"),
                [(str(j + 1), result.beta[j]) for j in range(data.p)])
    save_matrix(outdir / "L.csv", result.L)
    save_vector(outdir / "singulars.csv", ("k", "sigma"),
                [(str(k + 1), s) for k, s in enumerate(result.singulars)])
    manifest = dict(effective)
    manifest.update(
        iterations=result.iterations,
        converged=result.converged,
        final_constraint_residual=result.final_constraint_residual,
        objective=result.objective,
        max_abs_L=result.max_abs_L,
    )
    if not result.converged:
        manifest["warning"] = (
            f"solver did not converge within {effective['max_iters']} iterations"
        )
    _write_manifest(outdir, manifest)
    print(f"wrote {outdir}/beta.csv, L.csv, singulars.csv, manifest.json "
          f"(converged={result.converged}, iterations={result.iterations})")
    return 0


def cmd_rank(args) -> int:
    data, result, effective = _fit_from_args(args)
    threshold = _effective(args, "threshold", cast=float)
    if threshold is None:
        threshold = default_rank_threshold(data.N, data.T)
    est = estimate_rank(result.singulars, float(threshold))
    print(f"r_hat: {est.r_hat}")
    print(f"threshold: {fmt17(est.threshold)}")
    print("singulars: " + ",".join(fmt17(s) for s in est.singulars))
    if not result.converged:
        print("warning: solver did not converge; singular values may be unreliable")
    return 0


def _cell_seed(master: int, N: int, T: int, phi: float, law: str) -> int:
    key = (int(master), int(N), int(T), int(round(phi * 1_000_000)),
           1 if law == "student_t2" else 0)
    return int(np.random.SeedSequence(key).generate_state(1, dtype=np.uint64)[0])


def results_rows(rows) -> list:
    """Render MetricsRow records into the results CSV schema (scaled fields)."""
    out = []
    for r in rows:
        out.append([
            r.estimator, fmt17(r.u), str(r.N), str(r.T), fmt17(r.phi),
            r.error_law, str(r.replications),
            fmt17(100.0 * r.bias2_beta), fmt17(1e4 * r.var_beta),
            "" if r.mse_L is None else fmt17(r.mse_L),
            "" if r.mse_q is None else fmt17(r.mse_q),
            fmt17(r.mean_seconds),
        ])
    return out


def cmd_bench(args) -> int:
    phis = _parse_floats(_effective(args, "phi", "0.2"))
    us = _parse_floats(_effective(args, "u", "0.5"))
    sizes = _parse_sizes(_effective(args, "sizes", "50x50"))
    errors = _parse_errors(_effective(args, "errors", "normal"))
    reps = int(_effective(args, "reps", 1, int))
    estimators = _parse_estimators(_effective(args, "estimators", "nu"))
    seed = int(_effective(args, "seed", 0, int))
    out_path = Path(_effective(args, "out", "results.csv", str))
    if not phis or not us or not sizes or not errors or not estimators:
        raise UsageError("empty grid")

    rank_for_it = None
    if "it" in estimators:
        if args.rank is not None:
            rank_for_it = int(args.rank)
        elif not args.true_rank_from_truth:
            raise UsageError(
                "--estimators it requires --true-rank-from-truth or --rank INT"
            )

    grid = []
    for (N, T) in sizes:
        for phi in phis:
            for law in errors:
                spec = SimulationSpec(
                    N=N, T=T, phi=phi, error_law=law,
                    seed=_cell_seed(seed, N, T, phi, law),
                    quantile_levels=tuple(us),
                )
                for u in us:
                    grid.append((spec, u, tuple(estimators)))

    workers = int(os.environ.get("NNQR_WORKERS", "1"))
    rows = run_experiment(grid, reps, rank_for_it=rank_for_it, workers=workers)

    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULTS_HEADER)
        w.writerows(results_rows(rows))
    print(f"wrote {out_path} ({len(rows)} rows)")
    return 0


def cmd_simulate(args) -> int:
    N = int(_effective(args, "n", 50, int))
    T = int(_effective(args, "t", 50, int))
    phi = float(_effective(args, "phi", 0.2, float))
    law = _parse_errors(_effective(args, "error", "normal"))[0]
    seed = int(_effective(args, "seed", 0, int))
    us = tuple(_parse_floats(_effective(args, "u", "0.2,0.5,0.8")))
    outdir = Path(_effective(args, "out", ".", str))
    outdir.mkdir(parents=True, exist_ok=True)

    truth = simulate(SimulationSpec(N=N, T=T, phi=phi, error_law=law, seed=seed,
                                    quantile_levels=us))
    save_panel(outdir / "panel.csv", truth.data)
    save_vector(outdir / "beta_true.csv", ("u", "beta1", "beta2", "beta3"),
                [(fmt17(u),) + tuple(truth.beta_true[u]) for u in us])
    for u in us:
        save_matrix(outdir / f"L0_u{u:g}.csv", truth.L0[u])
    _write_manifest(outdir, {
        "N": N, "T": T, "phi": phi, "error_law": law, "seed": seed,
        "quantile_levels": list(us),
        "r_true": {f"{u:g}": truth.r_true[u] for u in us},
    })
    print(f"wrote {outdir}/panel.csv and truth files for u in {list(us)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="nnqr",
        description="Nuclear-norm penalized quantile regression for panels "
                    "with interactive fixed effects",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def add_common_fit_flags(sp):
        sp.add_argument("--input", required=True, help="panel CSV (i,t,y,x1..xp)")
        sp.add_argument("--u", type=float, default=None, help="quantile level in (0,1)")
        sp.add_argument("--lambda", dest="lambda", type=float, default=None,
                        help="penalty (default: log(NT)sqrt(max(N,T))/(3.6NT))")
        sp.add_argument("--tol", type=float, default=None)
        sp.add_argument("--max-iters", dest="max_iters", type=int, default=None)
        sp.add_argument("--config", default=None, help="flat key=value config file")

    sp = sub.add_parser("fit", help="fit one panel at one quantile level")
    add_common_fit_flags(sp)
    sp.add_argument("--out", default=None, help="output directory")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("rank", help="fit, then estimate the number of fixed effects")
    add_common_fit_flags(sp)
    sp.add_argument("--threshold", type=float, default=None,
                    help="singular-value cutoff (default: (NT max(N,T))^(1/4))")
    sp.set_defaults(func=cmd_rank)

    sp = sub.add_parser("bench", help="Monte Carlo benchmark grid")
    sp.add_argument("--phi", default=None, help="comma list, e.g. 0.1,0.2,0.3")
    sp.add_argument("--u", default=None, help="comma list, e.g. 0.2,0.5,0.8")
    sp.add_argument("--sizes", default=None, help="comma list like 200x200,200x500")
    sp.add_argument("--errors", default=None, help="comma list of normal,t2")
    sp.add_argument("--reps", type=int, default=None)
    sp.add_argument("--estimators", default=None, help="comma list of nu,it,po")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", default=None, help="results CSV path")
    sp.add_argument("--rank", type=int, default=None,
                    help="factor count for the iterative estimator")
    sp.add_argument("--true-rank-from-truth", action="store_true",
                    help="give the iterative estimator the true rank per cell")
    sp.add_argument("--config", default=None)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("simulate", help="write a simulated panel plus ground truth")
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--t", type=int, default=None)
    sp.add_argument("--phi", type=float, default=None)
    sp.add_argument("--error", default=None, help="normal or t2")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--u", default=None, help="comma list of truth levels")
    sp.add_argument("--out", default=None, help="output directory")
    sp.add_argument("--config", default=None)
    sp.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        args._config = _read_config(args.config) if getattr(args, "config", None) else {}
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (DataError, DegenerateInputError, IllPosedDesignError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
