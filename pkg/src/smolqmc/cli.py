"""Command-line interface: net generation and checking, scrambling dumps,
combination-quadrature nodes, integration and the convergence experiments.

Outputs are deterministic byte-for-byte for a fixed (command line, seed):
numbers are written with shortest round-trip precision, the replication
index space is partitioned independently of --threads, and every file
starts with a versioned header carrying the full configuration.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__, analysis, kernels, nets, smolyak, wavelets
from .basis import digits_of
from .scrambling import scramble_net_batch

MAX_TOTAL_DIM = 20  # desk-scale guard on D = d * s


def _default_seed() -> int:
    env = os.environ.get("SMOLQMC_SEED")
    return int(env) if env else 0


def _fmt(x) -> str:
    return repr(float(x))


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w"), True


def _write_csv(path, command: str, config: dict, header: list[str], rows):
    fh, close = _open_out(path)
    try:
        fh.write(f"# smolqmc {__version__}\n")
        fh.write(f"# command: {command}\n")
        cfg = " ".join(f"{k}={v}" for k, v in sorted(config.items()))
        fh.write(f"# config: {cfg}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
    finally:
        if close:
            fh.close()


def _print_json(payload: dict, path=None):
    fh, close = _open_out(path)
    try:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    finally:
        if close:
            fh.close()


def _read_csv_rows(path) -> list[list[str]]:
    fh = sys.stdin if path in (None, "-") else open(path)
    try:
        rows = []
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append(line.split(","))
        return rows
    finally:
        if fh is not sys.stdin:
            fh.close()


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def _net_generator(name: str):
    if name == "faure":
        return lambda b, m, s: nets.faure_net(b, m, s)
    if name == "stratified":
        return lambda b, m, s: nets.stratified_grid(b, m)
    return nets.default_net


def _guard_dims(d: int, s: int) -> None:
    if d * s > MAX_TOTAL_DIM:
        raise ValueError(f"total dimension d*s = {d * s} exceeds the desk-scale guard {MAX_TOTAL_DIM}")


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------

def cmd_generate_net(args) -> int:
    net = _net_generator(args.generator)(args.base, args.level, args.dim)
    vals = net.values()
    config = dict(base=args.base, level=args.level, dim=args.dim, generator=args.generator)
    header = [f"x{t + 1}" for t in range(args.dim)]
    rows = ([_fmt(v) for v in row] for row in vals)
    _write_csv(args.out, "generate-net", config, header, rows)
    return 0


def cmd_check_net(args) -> int:
    rows = _read_csv_rows(args.infile)
    if not rows:
        print("FAIL empty point file", file=sys.stderr)
        return 1
    first = rows[0]
    data_rows = rows
    try:
        [float(v) for v in first]
    except ValueError:
        data_rows = rows[1:]  # header row
    values = np.array([[float(v) for v in row] for row in data_rows])
    s = args.dim if args.dim else values.shape[1]
    ok, witness = nets.is_net_values(values, args.base, args.level, s)
    if ok:
        print(f"PASS ({values.shape[0]} points, base {args.base}, level {args.level}, dim {s})")
        return 0
    print(
        "FAIL witness: resolutions="
        f"{witness.resolutions} shifts={witness.shifts} count={witness.count}")
    return 1


def cmd_scramble(args) -> int:
    net = _net_generator(args.generator)(args.base, args.level, args.dim)
    keys = kernels.derive_key_array(args.seed, 0, args.reps, 0, args.level)
    ints, xi = scramble_net_batch(net, keys)
    scale = float(args.base**args.level)
    vals = np.minimum((ints + xi) / scale, np.nextafter(1.0, 0.0))
    config = dict(base=args.base, level=args.level, dim=args.dim, seed=args.seed,
                  reps=args.reps, generator=args.generator)
    header = ["rep"] + [f"x{t + 1}" for t in range(args.dim)]

    def rows():
        for r in range(args.reps):
            for p in range(vals.shape[1]):
                yield [str(r)] + [_fmt(v) for v in vals[r, p]]

    _write_csv(args.out, "scramble", config, header, rows())
    return 0


def cmd_smolyak_nodes(args) -> int:
    _guard_dims(args.d, args.s)
    plan = smolyak.make_plan(args.b, args.s, args.d, args.level)
    q = smolyak.realize(plan, args.seed, args.rep)
    config = dict(b=args.b, s=args.s, d=args.d, level=args.level, seed=args.seed, rep=args.rep)
    header = ["weight"] + [f"x{t + 1}" for t in range(plan.D)]
    rows = ([_fmt(q.weights[nu])] + [_fmt(v) for v in q.nodes[nu]] for nu in range(q.n_nodes))
    _write_csv(args.out, "smolyak-nodes", config, header, rows)
    return 0


INTEGRANDS = {
    "product": dict(exact=lambda D: 2.0**-D),
    "constant": dict(exact=lambda D: 1.0),
}


def cmd_integrate(args) -> int:
    if args.f not in INTEGRANDS:
        raise ValueError(f"unknown integrand {args.f!r}; built-ins: {sorted(INTEGRANDS)}")
    _guard_dims(args.d, args.s)
    plan = smolyak.make_plan(args.b, args.s, args.d, args.level)
    if args.f == "product":
        def worker(rep_start, n):
            ens = analysis.BlockEnsemble(plan, args.seed, rep_start, n)
            return ens.product_samples()

        samples = np.concatenate(analysis._run_chunks(worker, args.reps, threads=args.threads))
    else:
        vals = []
        for r in range(args.reps):
            q = smolyak.realize(plan, args.seed, r)
            vals.append(smolyak.apply_quadrature(q, lambda x: np.ones(x.shape[0])))
        samples = np.array(vals)
    mean = float(samples.mean())
    se = float(samples.std(ddof=1) / math.sqrt(args.reps)) if args.reps > 1 else float("nan")
    payload = {
        "version": __version__,
        "config": dict(f=args.f, b=args.b, s=args.s, d=args.d, level=args.level,
                       reps=args.reps, seed=args.seed),
        "mean": mean,
        "se": se,
        "exact": INTEGRANDS[args.f]["exact"](plan.D),
        "n_nodes_per_replication": smolyak.node_count(args.level, args.d, args.s, args.b),
    }
    _print_json(payload, args.out)
    return 0


def cmd_wavelet_eval(args) -> int:
    idx = wavelets.WaveletIndex(b=args.base, j=_parse_ints(args.j),
                                i=_parse_ints(args.i), k=_parse_ints(args.k))
    rows = _read_csv_rows(args.points)
    data = rows[1:] if rows and not _is_float_row(rows[0]) else rows
    pts = np.array([[float(v) for v in row] for row in data])
    vals = wavelets.psi_eval_multi(idx, pts)
    config = dict(base=args.base, j=args.j, i=args.i, k=args.k)
    header = [f"x{t + 1}" for t in range(idx.dim)] + ["value"]
    out_rows = ([_fmt(v) for v in pt] + [_fmt(val)] for pt, val in zip(pts, vals))
    _write_csv(args.out, "wavelet-eval", config, header, out_rows)
    return 0


def _is_float_row(row) -> bool:
    try:
        [float(v) for v in row]
        return True
    except ValueError:
        return False


def cmd_wavelet_coeffs(args) -> int:
    rows = _read_csv_rows(args.grid)
    data = rows[1:] if rows and not _is_float_row(rows[0]) else rows
    arr = np.array([[float(v) for v in row] for row in data])
    D = arr.shape[1] - 1
    n_cells = int(round(arr[:, :D].max())) + 1
    grid = np.zeros((n_cells,) * D)
    for row in arr:
        grid[tuple(int(c) for c in row[:D])] = row[D]
    coeffs = wavelets.canonical_coefficients(grid, args.base, args.jmax)
    config = dict(base=args.base, jmax=args.jmax)
    header = ([f"j{t + 1}" for t in range(D)] + [f"i{t + 1}" for t in range(D)]
              + [f"k{t + 1}" for t in range(D)] + ["coeff"])

    def out_rows():
        for idx, c in coeffs.items():
            yield [str(v) for v in idx.j + idx.i + idx.k] + [_fmt(c)]

    _write_csv(args.out, "wavelet-coeffs", config, header, out_rows())
    return 0


def cmd_moments(args) -> int:
    idx = wavelets.WaveletIndex(b=args.b, j=_parse_ints(args.j),
                                i=_parse_ints(args.i), k=_parse_ints(args.k))
    if args.kind == "second":
        est = analysis.second_moment_bb(args.level, idx, args.reps, args.seed,
                                        enforce_admissible=not args.no_admissibility_check)
        lo, hi = analysis.second_moment_bracket(args.level, idx.dim, args.b)
        extra = {"bracket_low": lo, "bracket_high": hi}
    else:
        idx2 = wavelets.WaveletIndex(b=args.b, j=_parse_ints(args.j2),
                                     i=_parse_ints(args.i2), k=_parse_ints(args.k2))
        if args.kind == "cross":
            est = analysis.cross_moment(args.level, idx, idx2, args.reps, args.seed,
                                        level2=args.level2)
        else:  # cross-smolyak
            _guard_dims(args.d, args.s)
            plan = smolyak.make_plan(args.b, args.s, args.d, args.level)
            est = analysis.cross_moment(plan, idx, idx2, args.reps, args.seed)
        extra = {}
    payload = {
        "version": __version__,
        "config": {k: v for k, v in vars(args).items() if k != "func"},
        "mean": est.mean, "se": est.se,
        "second_moment": est.second_moment, "second_moment_se": est.second_moment_se,
        "reps": est.count,
        **extra,
    }
    _print_json(payload, args.out)
    return 0


def cmd_experiment_convergence(args) -> int:
    _guard_dims(args.d, args.s)
    if args.alpha <= 0.5:
        raise ValueError(f"alpha must exceed 1/2, got {args.alpha}")
    lo, hi = args.levels.split("..")
    L_values = range(int(lo), int(hi) + 1)
    if int(lo) < args.d:
        raise ValueError(f"levels must start at d={args.d}, got {lo}")
    records, fits = analysis.convergence_study(
        args.d, args.s, args.b, args.alpha, L_values, args.reps, args.seed,
        j_budget=args.j_budget, threads=args.threads)
    config = dict(d=args.d, s=args.s, b=args.b, alpha=args.alpha, levels=args.levels,
                  reps=args.reps, seed=args.seed)
    header = ["L", "N", "error", "se", "argmax_j"]
    rows = ([str(r.L), str(r.n_nodes), _fmt(r.error), _fmt(r.se),
             ";".join(map(str, r.argmax_j))] for r in records)
    _write_csv(args.out, "experiment convergence", config, header, rows)
    if args.emit_plotdata:
        rate = args.alpha + 0.5
        logexp = (args.d - 1) * (1.0 + args.alpha)
        pheader = ["log_N", "log_error", "compensated_error"]
        prows = ([_fmt(math.log(r.n_nodes)), _fmt(math.log(r.error)),
                  _fmt(r.error * r.n_nodes**rate / math.log(r.n_nodes) ** logexp)]
                 for r in records)
        _write_csv(args.emit_plotdata, "experiment convergence (plot data)",
                   config, pheader, prows)
    if not args.quiet:
        _print_json({"version": __version__, "config": config, "fits": fits})
    return 0


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="smolqmc",
        description="Randomized sparse-grid quadrature with scrambled net building blocks.")
    p.add_argument("--version", action="version", version=f"smolqmc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add_seed(sp):
        sp.add_argument("--seed", type=int, default=_default_seed(),
                        help="master seed (default: $SMOLQMC_SEED or 0)")

    def add_threads(sp):
        sp.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker threads over replications (output independent of this)")

    sp = sub.add_parser("generate-net", help="emit a deterministic (0,m,s)-net as CSV")
    sp.add_argument("--base", type=int, required=True)
    sp.add_argument("--level", type=int, required=True)
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--generator", choices=["default", "faure", "stratified"], default="default")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_generate_net)

    sp = sub.add_parser("check-net", help="verify the net property of a CSV point set")
    sp.add_argument("--base", type=int, required=True)
    sp.add_argument("--level", type=int, required=True)
    sp.add_argument("--dim", type=int, default=None)
    sp.add_argument("--in", dest="infile", default=None, help="points CSV (default stdin)")
    sp.set_defaults(func=cmd_check_net)

    sp = sub.add_parser("scramble", help="emit scrambled nets, one block per replication")
    sp.add_argument("--base", type=int, required=True)
    sp.add_argument("--level", type=int, required=True)
    sp.add_argument("--dim", type=int, required=True)
    add_seed(sp)
    sp.add_argument("--reps", type=int, default=1)
    sp.add_argument("--generator", choices=["default", "faure", "stratified"], default="default")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_scramble)

    sp = sub.add_parser("smolyak-nodes", help="dump one realization's nodes and weights")
    sp.add_argument("--b", type=int, required=True)
    sp.add_argument("--s", type=int, required=True)
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--level", type=int, required=True)
    add_seed(sp)
    sp.add_argument("--rep", type=int, default=0)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_smolyak_nodes)

    sp = sub.add_parser("integrate", help="apply the quadrature to a built-in integrand")
    sp.add_argument("--f", required=True, help=f"one of {sorted(INTEGRANDS)}")
    sp.add_argument("--b", type=int, default=2)
    sp.add_argument("--s", type=int, default=1)
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--level", type=int, required=True)
    sp.add_argument("--reps", type=int, default=1024)
    add_seed(sp)
    add_threads(sp)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_integrate)

    sp = sub.add_parser("wavelet-eval", help="evaluate one product wavelet on CSV points")
    sp.add_argument("--base", type=int, required=True)
    sp.add_argument("--j", required=True, help="comma-separated resolutions")
    sp.add_argument("--i", required=True)
    sp.add_argument("--k", required=True)
    sp.add_argument("--points", default=None, help="points CSV (default stdin)")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_wavelet_eval)

    sp = sub.add_parser("wavelet-coeffs", help="canonical coefficients of a grid function")
    sp.add_argument("--base", type=int, required=True)
    sp.add_argument("--jmax", type=int, required=True)
    sp.add_argument("--grid", default=None,
                    help="CSV: one row per cell, D index columns then the cell value")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_wavelet_coeffs)

    sp = sub.add_parser("moments", help="replication moment estimates (JSON)")
    sp.add_argument("--kind", choices=["second", "cross", "cross-smolyak"], required=True)
    sp.add_argument("--b", type=int, required=True)
    sp.add_argument("--s", type=int, default=1)
    sp.add_argument("--d", type=int, default=1)
    sp.add_argument("--level", type=int, required=True)
    sp.add_argument("--level2", type=int, default=None)
    sp.add_argument("--j", required=True)
    sp.add_argument("--i", required=True)
    sp.add_argument("--k", required=True)
    sp.add_argument("--j2", default=None)
    sp.add_argument("--i2", default=None)
    sp.add_argument("--k2", default=None)
    sp.add_argument("--reps", type=int, default=1024)
    sp.add_argument("--no-admissibility-check", action="store_true")
    add_seed(sp)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_moments)

    sp = sub.add_parser("experiment", help="longer empirical studies")
    esub = sp.add_subparsers(dest="experiment", required=True)
    sp = esub.add_parser("convergence", help="randomized-error estimates across levels")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--s", type=int, default=1)
    sp.add_argument("--b", type=int, default=2)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--levels", required=True, help="range Lmin..Lmax")
    sp.add_argument("--reps", type=int, default=4096)
    add_seed(sp)
    add_threads(sp)
    sp.add_argument("--j-budget", type=int, default=None)
    sp.add_argument("--out", default=None)
    sp.add_argument("--emit-plotdata", default=None, metavar="FILE")
    sp.add_argument("--quiet", action="store_true", help="suppress the fit summary")
    sp.set_defaults(func=cmd_experiment_convergence)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
