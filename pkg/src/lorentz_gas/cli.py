"""Command-line driver: simulate, fit, hist, oracle, validate.

Exit codes: 0 success, 2 validation failure or bad input, 3 partial
simulation failure (some particles exceeded their event budget).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .ensemble import run_ensemble
from .experiment import FORMAT_VERSION, ExperimentPlan, dataset_name, find_datasets, load_dataset, write_dataset
from .oracles import GAUSSIAN, ORACLES, SquareBilliardOracle, sample_oracle
from .stats import (NoScalingRegime, compare_to_oracle, estimate_distribution,
                    jackknife_diffusion_exponent, kurtosis_ratio)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_PARTIAL = 3

log = logging.getLogger("lorentz_gas")


def _window(text: str | None):
    if text is None:
        return None
    lo, _, hi = text.partition(":")
    return float(lo), (float(hi) if hi else None)


def _grid(text: str) -> np.ndarray:
    lo, hi, n = text.split(":")
    return np.linspace(float(lo), float(hi), int(n))


def _params(items) -> dict:
    out = {}
    for item in items or ():
        k, _, v = item.partition("=")
        out[k.strip()] = float(v)
    return out


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# -- simulate -------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    if args.config:
        plan = ExperimentPlan.load(args.config)
    else:
        plan = ExperimentPlan(radii=args.radii or [0.25])
    if args.radii and args.config:
        plan = ExperimentPlan(args.radii, plan.settings, {}, plan.out)
    if args.seed is not None:
        plan.settings.seed = args.seed
    if args.n is not None:
        plan.settings.n_particles = args.n
    if args.out:
        plan.out = args.out
    specs = plan.specs()  # validates every radius before any simulation
    root = Path(plan.out)
    root.mkdir(parents=True, exist_ok=True)
    plan.save(root / "plan.cfg")
    status = EXIT_OK
    for spec in specs:
        res = run_ensemble(spec, workers=args.workers, allow_partial=True)
        man = write_dataset(res, root / dataset_name(spec.config.R))
        n_ab = len(man["aborted"])
        print(f"R/L={spec.config.R:.4f}  N={spec.n_particles}  acceptance={res.acceptance_rate:.4f}  "
              f"aborted={n_ab}  -> {root / dataset_name(spec.config.R)}")
        if n_ab:
            status = EXIT_PARTIAL
    return status


# -- fit ------------------------------------------------------------------------------


def fit_dataset(path, window=None, kind: str = "wall") -> dict:
    ds = load_dataset(path)
    man = ds.manifest
    window = window or (50.0, man["t_obs"])
    entry = {"R": man["R"], "L": man["L"], "N": int(ds.n_wall.shape[0]), "seed": man["seed"],
             "config_hash": man["config_hash"], "normalization": man["normalization"],
             "window_requested": list(window), "kind": kind}
    try:
        fit = jackknife_diffusion_exponent(ds.block_moments(), ds.tau, window, kind, man["normalization"])
    except (NoScalingRegime, ValueError) as exc:
        entry["error"] = f"{type(exc).__name__}: {exc}"
        return entry
    entry.update(fit.to_dict())
    m = ds.moments()
    last = len(ds.probe_times) - 1
    entry["zeta4_probe"] = man["probes"][last]
    entry["zeta4_normalization"] = "fourth central moment / variance^2"
    for k in ("wall", "disk"):
        try:
            entry[f"zeta4_{k}"] = kurtosis_ratio(m, last, k)
            entry[f"zeta4_{k}_unstandardized"] = kurtosis_ratio(m, last, k, standardized=False)
        except ValueError:
            entry[f"zeta4_{k}"] = None
    return entry


def cmd_fit(args) -> int:
    paths = find_datasets(args.dataset)
    if not paths:
        print(f"no datasets under {args.dataset}", file=sys.stderr)
        return EXIT_INVALID
    entries = [fit_dataset(p, _window(args.window), args.kind) for p in paths]
    report = {"format_version": FORMAT_VERSION, "datasets": entries}
    out = Path(args.out) if args.out else Path(args.dataset) / "fit_report.json"
    out.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    for e in entries:
        if "error" in e:
            print(f"R/L={e['R']:.4f}  {e['error']}")
        else:
            print(f"R/L={e['R']:.4f}  z={e['z']:.4f} +- {e['stderr']:.4f}  "
                  f"zeta4 wall={e['zeta4_wall']:.3f} disk={e['zeta4_disk'] or math.nan:.3f}")
    print(f"report -> {out}")
    return EXIT_OK


# -- hist -----------------------------------------------------------------------------


def cmd_hist(args) -> int:
    ds = load_dataset(args.dataset)
    try:
        p = ds.probe_index(args.probe)
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return EXIT_INVALID
    counts = ds.n_wall[:, p] if args.kind == "wall" else ds.n_disk[:, p]
    dist = estimate_distribution(counts, float(ds.probe_times[p]), args.kind)
    out = Path(args.out) if args.out else ds.path
    out.mkdir(parents=True, exist_ok=True)
    stem = f"hist_{args.kind}_{p:03d}"
    if dist.point_mass:
        print(f"all counts equal {dist.mean:g}: point mass, reduced histogram undefined")
        _write_rows(out / f"{stem}.csv", ["bin_center", "density", "reduced_bin_center", "reduced_density"],
                    [[repr(dist.mean), "1.0", "", ""]])
        return EXIT_OK
    _write_rows(out / f"{stem}.csv", ["bin_center", "density", "reduced_bin_center", "reduced_density"],
                zip(map(repr, dist.bin_centers.tolist()), map(repr, dist.density.tolist()),
                    map(repr, dist.reduced_centers.tolist()), map(repr, dist.reduced_density.tolist())))
    name = args.oracle
    if name == "auto":
        name = "square" if ds.manifest["R"] == 0 and args.kind == "wall" else "gaussian"
    oracle = SquareBilliardOracle(ds.manifest["L"]).reduced() if name == "square" else GAUSSIAN
    lo, hi = float(dist.reduced_edges[0]), float(dist.reduced_edges[-1])
    grid = np.linspace(lo, hi, 401)
    with np.errstate(all="ignore"):
        curve = oracle.pdf(grid)
    _write_rows(out / f"{stem}_oracle_{name}.csv", ["reduced_n", "density"],
                zip(map(repr, grid.tolist()), map(repr, curve.tolist())))
    gof = compare_to_oracle(dist, oracle)
    summary = {"oracle": name, "probe": ds.manifest["probes"][p], "t": float(ds.probe_times[p]),
               "kind": args.kind, "N": dist.n, "mean": dist.mean, "variance": dist.variance,
               "kurtosis": dist.kurtosis, **vars(gof), "ks_passes_5pct": gof.passes_ks(0.05),
               "ks_passes_1pct": gof.passes_ks(0.01)}
    (out / f"{stem}_gof.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(f"KS={gof.ks:.4f} (5% crit {gof.ks_critical_5:.4f}, p={gof.ks_pvalue:.3g})  "
          f"chi2={gof.chi2:.1f}/{gof.chi2_dof} (p={gof.chi2_pvalue:.3g})  -> {out / stem}*")
    return EXIT_OK


# -- oracle ---------------------------------------------------------------------------


def cmd_oracle(args) -> int:
    if args.name not in ORACLES:
        print(f"unknown oracle {args.name!r}; available:", file=sys.stderr)
        for k, v in sorted(ORACLES.items()):
            print(f"  {k:28s} {v}", file=sys.stderr)
        return EXIT_INVALID
    grid = _grid(args.grid)
    with np.errstate(all="ignore"):
        y = sample_oracle(args.name, grid, **_params(args.param))
    rows = zip(map(repr, grid.tolist()), map(repr, np.asarray(y, dtype=float).tolist()))
    if args.out:
        _write_rows(Path(args.out), ["x", "density"], rows)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["x", "density"])
        w.writerows(rows)
    return EXIT_OK


# -- validate -------------------------------------------------------------------------


def cmd_validate(args) -> int:
    from .validation import run_all

    checks = run_all(quick=args.quick)
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_INVALID if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lorentz-gas", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run ensembles for every radius of a plan")
    p.add_argument("--config", help="flat key-value plan file")
    p.add_argument("--radii", type=lambda s: [float(x) for x in s.split(",")],
                   help="comma-separated R/L values (replaces the plan's list)")
    p.add_argument("--n", type=int, help="particles per radius")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="output root directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="diffusion exponent and kurtosis per dataset")
    p.add_argument("dataset", help="dataset directory or a simulate output root")
    p.add_argument("--window", help="fit window lo:hi in units of tau (default 50:t_obs)")
    p.add_argument("--kind", choices=("wall", "disk"), default="wall")
    p.add_argument("--out", help="report path (default <dataset>/fit_report.json)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("hist", help="reduced distribution with oracle overlay")
    p.add_argument("dataset")
    p.add_argument("--kind", choices=("wall", "disk"), default="wall")
    p.add_argument("--probe", type=float, required=True, help="probe time in units of tau")
    p.add_argument("--oracle", choices=("auto", "square", "gaussian"), default="auto")
    p.add_argument("--out", help="output directory (default: the dataset)")
    p.set_defaults(func=cmd_hist)

    p = sub.add_parser("oracle", help="sample a closed-form curve on a grid")
    p.add_argument("name", help=f"one of: {', '.join(sorted(ORACLES))}")
    p.add_argument("--grid", default="0:1:101", help="lo:hi:count")
    p.add_argument("--param", action="append", help="key=value, repeatable")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("validate", help="oracle, engine and determinism self-checks")
    p.add_argument("--quick", action="store_true")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
