"""Command-line interface.

Usage: ``weierdim <command> KERNEL_CONFIG [options]``.  Human-readable text
goes to standard output; ``--json`` switches standard output to the machine
form and ``--out`` writes the machine artifact (JSON or CSV) to a file.

Exit codes: 0 ok, 2 config error, 3 invalid kernel, 4 resource guard.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from .boxdim import (
    DEFAULT_OVERSAMPLE,
    ReportOptions,
    ResourceGuardError,
    box_counts,
    fit_counts,
    full_report,
)
from .core import (
    ConfigError,
    InvalidKernelError,
    SymbolStream,
    format_kernel_config,
    kernel_config,
    parse_kernel_config,
)
from .criterion import (
    DEFAULT_RANK_TOL,
    compute_q,
    predicted_dimension,
    reconstruct_psi,
    scan_degenerate,
)
from .entropy import entropy_dimension, sample_flow_projection, sample_mu, save_measure_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_KERNEL = 3
EXIT_RESOURCE = 4


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(args, human: str, machine: str | None = None, artifact: str | None = None):
    """Print the human or machine form and write the artifact file."""
    if args.json and machine is not None:
        sys.stdout.write(machine)
    else:
        sys.stdout.write(human.rstrip("\n") + "\n")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(artifact if artifact is not None else (machine or human))


def _load(args):
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    cfg = parse_kernel_config(text)
    return cfg, cfg.kernel()


def _params(args, cfg):
    lam = args.lam if getattr(args, "lam", None) is not None else cfg.lam
    if lam is None:
        raise ConfigError("this command needs lambda (config 'lambda=' or --lambda)")
    try:
        return cfg.params(lam)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _levels(pair, name="levels"):
    n0, n1 = pair
    if not 1 <= n0 <= n1:
        raise ConfigError(f"--{name} must be ascending integers >= 1")
    return n0, n1


# ---------------------------------------------------------------------------
# commands


def cmd_q(args) -> int:
    cfg, k = _load(args)
    p = _params(args, cfg)
    rep = compute_q(p, k, rank_tol=args.rank_tol)
    _emit(args, rep.summary(), _dumps(rep.to_dict()))
    return EXIT_OK


def cmd_scan(args) -> int:
    cfg, k = _load(args)
    if args.grid_n < 100:
        raise ConfigError("--grid-n must be >= 100")
    lam_range = tuple(args.lambda_range) if args.lambda_range else None
    if lam_range is not None and not 1 / cfg.b < lam_range[0] < lam_range[1] < 1:
        raise ConfigError(f"--lambda-range must lie inside (1/b, 1) = ({1 / cfg.b:g}, 1)")
    res = scan_degenerate(
        k, cfg.b, grid_n=args.grid_n, refine_tol=args.refine_tol, rank_tol=args.rank_tol, lam_range=lam_range
    )
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda", "q", "sigma_min"])
    for lam, q, s in zip(res.grid, res.q_grid, res.sigma_grid):
        w.writerow([f"{lam:.17g}", int(q), f"{s:.17g}"])
    lines = [f"p'={res.p_prime} grid_n={res.grid.size} degenerate={len(res.degenerate)}"]
    lines += [f"  lambda={e.lam:.12f} q={e.q_prime} width={e.width:.3g}" for e in res.degenerate]
    _emit(args, "\n".join(lines), _dumps(res.to_dict()), buf.getvalue())
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg, k = _load(args)
    p = _params(args, cfg)
    q = args.q if args.q is not None else compute_q(p, k, rank_tol=args.rank_tol).q_prime
    pred = predicted_dimension(p, k.d, q)
    out = {"b": p.b, "lambda": p.lam, "d": k.d, "q": q, "predicted": pred.value, "branch": pred.branch}
    _emit(args, f"predicted={pred.value:.6f} branch={pred.branch} q={q}", _dumps(out))
    return EXIT_OK


def cmd_boxdim(args) -> int:
    cfg, k = _load(args)
    p = _params(args, cfg)
    n0, n1 = _levels(args.levels)
    counts = box_counts(p, k, range(n0, n1 + 1), args.oversample, method=args.method, seed=args.seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "N_n", "stable"])
    for c in counts:
        w.writerow([c.level, c.count, int(c.stable)])
    out = {"levels": [c.level for c in counts], "counts": [c.count for c in counts], "stable": [bool(c.stable) for c in counts]}
    lines = [f"n={c.level} N={c.count}{'' if c.stable else ' (unstable)'}" for c in counts]
    fit_range = (n0 + args.fit_drop, n1)
    if fit_range[1] - fit_range[0] >= 2:
        slope, stderr, used, warn = fit_counts(counts, fit_range, p.b)
        out.update(slope=slope, stderr=stderr, fit_levels=used, warnings=warn)
        lines.append(f"box_slope={slope:.4f} stderr={stderr:.4f} levels={used}")
        lines += [f"warning: {m}" for m in warn]
    _emit(args, "\n".join(lines), _dumps(out), buf.getvalue())
    return EXIT_OK


def cmd_entropy_dim(args) -> int:
    cfg, k = _load(args)
    p = _params(args, cfg)
    if args.samples < 1:
        raise ConfigError("--samples must be >= 1")
    if args.measure == "graph":
        w = sample_mu(p, k, args.samples, seed=args.seed)
    else:
        j = SymbolStream.random(p.b, args.stream_length, np.random.default_rng(args.seed))
        w = sample_flow_projection(p, k, j, args.samples, seed=args.seed)
    fit = entropy_dimension(w, _levels(args.levels))
    out = {
        "measure": args.measure,
        "samples": args.samples,
        "slope": fit.slope,
        "stderr": fit.stderr,
        "fit_levels": list(fit.levels),
        "entropies": list(fit.entropies),
        "undersampled": list(fit.undersampled),
        "warning": fit.warning,
    }
    lines = [f"entropy_slope={fit.slope:.4f} stderr={fit.stderr:.4f} levels={list(fit.levels)}"]
    if args.measure == "projection":
        ly = 1 + (1 + math.log(p.lam) / math.log(p.b)) * fit.slope
        out["ly_dim"] = ly
        lines.append(f"ly_dim={ly:.4f} (consistency check)")
    if fit.warning:
        lines.append(f"warning: {fit.warning}")
    if args.dump:
        save_measure_csv(w, args.dump)
    _emit(args, "\n".join(lines), _dumps(out))
    return EXIT_OK


def cmd_psi(args) -> int:
    cfg, k = _load(args)
    p = _params(args, cfg)
    res = reconstruct_psi(p, k, residual_tol=args.residual_tol)
    out = {"success": res.success, "residual": res.residual, "constant": [float(c) for c in res.constant]}
    lines = [f"success={str(res.success).lower()} residual={res.residual:.3g}"]
    artifact = None
    if res.success:
        artifact = format_kernel_config(kernel_config(res.psi, p.b, p.lam))
        out["psi"] = [
            [[m, a.real, a.imag] for m, a in sorted(c.items())] for c in res.psi.coefficient_maps()
        ]
        lines.append("psi:")
        lines += ["  " + ln for ln in artifact.splitlines()]
    _emit(args, "\n".join(lines), _dumps(out), artifact if artifact is not None else _dumps(out))
    return EXIT_OK


def cmd_report(args) -> int:
    cfg, k = _load(args)
    p = _params(args, cfg)
    opt = ReportOptions(
        levels=_levels(args.levels),
        fit_drop=args.fit_drop,
        oversample=args.oversample,
        method=args.method,
        box=not args.no_box,
        entropy=args.entropy,
        samples=args.samples,
        entropy_levels=_levels(args.entropy_levels, "entropy-levels"),
        seed=args.seed,
        rank_tol=args.rank_tol,
    )
    rep = full_report(p, k, opt)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(rep.counts_csv())
    _emit(args, rep.summary(), rep.to_json() + "\n")
    return EXIT_OK


def cmd_kernel_check(args) -> int:
    cfg, k = _load(args)
    if cfg.lam is not None:
        _params(args, cfg)
    canon = format_kernel_config(cfg)
    if parse_kernel_config(canon) != cfg:
        raise ConfigError("config does not survive a parse/serialize round trip")
    s0, s1 = k.sup_bounds()
    out = {
        "d": cfg.d,
        "b": cfg.b,
        "lambda": cfg.lam,
        "constant": k.is_constant(),
        "max_freq": k.max_freq,
        "sup_bound": [float(v) for v in s0],
        "deriv_sup_bound": [float(v) for v in s1],
    }
    lines = [f"ok d={cfg.d} b={cfg.b} max_freq={k.max_freq} constant={str(k.is_constant()).lower()}", canon]
    _emit(args, "\n".join(lines), _dumps(out), canon)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="weierdim", description="Graph dimension of Weierstrass-type functions.")
    sub = ap.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="kernel config file")
    common.add_argument("--json", action="store_true", help="machine-readable standard output")
    common.add_argument("--out", help="write the machine artifact to this file")
    common.add_argument("--seed", type=int, default=1)
    common.add_argument(
        "--threads", type=int, default=1, help="worker cap; computations are single-threaded, so 1 is always honoured"
    )
    common.add_argument("--rank-tol", type=float, default=DEFAULT_RANK_TOL)

    lam = argparse.ArgumentParser(add_help=False)
    lam.add_argument("--lambda", dest="lam", type=float, help="overrides the config's lambda")

    box = argparse.ArgumentParser(add_help=False)
    box.add_argument("--oversample", type=int, default=DEFAULT_OVERSAMPLE)
    box.add_argument("--method", choices=["auto", "range", "points"], default="auto")
    box.add_argument("--fit-drop", type=int, default=2, help="coarse levels left out of the fit")

    p = sub.add_parser("q", parents=[common, lam], help="degeneracy index q at one lambda")
    p.set_defaults(func=cmd_q)

    p = sub.add_parser("scan", parents=[common], help="scan lambda for degenerate values")
    p.add_argument("--grid-n", type=int, default=10_000)
    p.add_argument("--refine-tol", type=float, default=1e-6)
    p.add_argument("--lambda-range", type=float, nargs=2, metavar=("LO", "HI"))
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("predict", parents=[common, lam], help="predicted graph dimension")
    p.add_argument("--q", type=int, help="use this q instead of computing it")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("boxdim", parents=[common, lam, box], help="box counts and slope")
    p.add_argument("--levels", type=int, nargs=2, default=[2, 8], metavar=("N0", "N1"))
    p.set_defaults(func=cmd_boxdim)

    p = sub.add_parser("entropy-dim", parents=[common, lam], help="entropy dimension of a sampled measure")
    p.add_argument("--measure", choices=["projection", "graph"], default="projection")
    p.add_argument("--samples", type=int, default=10**5)
    p.add_argument("--levels", type=int, nargs=2, default=[2, 12], metavar=("N0", "N1"))
    p.add_argument("--stream-length", type=int, default=64)
    p.add_argument("--dump", help="write the sampled measure as CSV")
    p.set_defaults(func=cmd_entropy_dim)

    p = sub.add_parser("psi", parents=[common, lam], help="reconstruct psi in the degenerate case")
    p.add_argument("--residual-tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_psi)

    p = sub.add_parser("report", parents=[common, lam, box], help="full dimension report")
    p.add_argument("--levels", type=int, nargs=2, default=[2, 8], metavar=("N0", "N1"))
    p.add_argument("--no-box", action="store_true")
    p.add_argument("--entropy", action="store_true", help="add the entropy cross-check")
    p.add_argument("--samples", type=int, default=10**5)
    p.add_argument("--entropy-levels", type=int, nargs=2, default=[2, 12], metavar=("N0", "N1"))
    p.add_argument("--csv", help="write (n, N_n) as CSV")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("kernel-check", parents=[common], help="validate and echo a kernel config")
    p.set_defaults(func=cmd_kernel_check)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except InvalidKernelError as exc:
        print(f"invalid kernel: {exc}", file=sys.stderr)
        return EXIT_KERNEL
    except ResourceGuardError as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
