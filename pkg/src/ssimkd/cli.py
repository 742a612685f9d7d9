"""Command-line interface.

Exit codes: 0 success, 1 a check failed, 2 usage or input-format error.
"""

import argparse
import csv
import sys

import numpy as np

from . import __version__
from .autograd import backward, finite_diff_check
from .bench import format_bench, run_bench
from .errors import SsimKdError
from .export import export_map
from .fdmp import read_fdmp, write_fdmp
from .harness import GENERATORS, DistillConfig, generate_scenario, run_distillation
from .losses import KINDS, LossConfig, SsimExponents, compute_loss, prepare_pair
from .window import WindowSpec

GRADCHECK_TOL = 1e-4


def _dims(text):
    try:
        dims = tuple(int(p) for p in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"dims must look like 1x4x32x32, got {text!r}")
    if len(dims) != 4 or min(dims) < 1:
        raise argparse.ArgumentTypeError(f"dims must be four positive integers, got {text!r}")
    return dims


def _loss_options():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--kind", choices=list(KINDS), default="ssim")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--window", type=int, default=11)
    p.add_argument("--sigma", type=float, default=1.5)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--huber-beta", type=float, default=1.0)
    p.add_argument("--estimator", choices=["gaussian", "uniform"], default="gaussian")
    p.add_argument("--normalize", choices=["per-sample", "per-channel", "off"], default="per-sample")
    return p


def _pair_options():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--student", required=True)
    p.add_argument("--teacher", required=True)
    return p


def _config(args, kind=None):
    return LossConfig(
        kind=kind or args.kind,
        p=args.p,
        huber_beta=args.huber_beta,
        exponents=SsimExponents(args.alpha, args.beta, args.gamma),
        window=WindowSpec(args.window, args.sigma, args.estimator),
        normalize=None if args.normalize == "off" else args.normalize,
    )


def build_parser():
    parser = argparse.ArgumentParser(prog="ssimkd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    loss_opts, pair_opts = _loss_options(), _pair_options()

    g = sub.add_parser("gen", help="write synthetic teacher (and student) feature dumps")
    g.add_argument("--generator", choices=GENERATORS, default="random")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--dims", type=_dims, default=(1, 4, 32, 32))
    g.add_argument("--out", required=True)
    g.add_argument("--student-out")
    g.add_argument("--dtype", choices=["float64", "float32"], default="float64")

    sub.add_parser("loss", parents=[pair_opts, loss_opts], help="print the loss between two dumps")

    m = sub.add_parser("lossmap", parents=[pair_opts, loss_opts], help="export a channel-mean loss map")
    m.add_argument("--out", required=True)
    m.add_argument("--component", choices=["l", "c", "s", "total"], default="total")
    m.add_argument("--batch", type=int, default=0)

    gm = sub.add_parser("gradmap", parents=[pair_opts, loss_opts], help="export channel-mean |dL/dS|")
    gm.add_argument("--out", required=True)
    gm.add_argument("--batch", type=int, default=0)

    gc = sub.add_parser("gradcheck", parents=[loss_opts], help="finite-difference gradient check")
    gc.add_argument("--dims", type=_dims, default=(1, 2, 12, 12))
    gc.add_argument("--seed", type=int, default=0)
    gc.add_argument("--eps", type=float, default=1e-5)
    gc.add_argument("--max-coords", type=int)

    d = sub.add_parser("distill", parents=[loss_opts], help="train a student toward a teacher")
    d.add_argument("--scenario", choices=GENERATORS, default="random")
    d.add_argument("--dims", type=_dims, default=(1, 4, 32, 32))
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--lr", type=float, default=0.01)
    d.add_argument("--momentum", type=float, default=0.9)
    d.add_argument("--steps", type=int, default=2000)
    d.add_argument("--lambda", dest="lam", type=float, default=4.0)
    d.add_argument("--student-kind", choices=["direct", "adapter"], default="direct")
    d.add_argument("--log")
    d.add_argument("--out")

    b = sub.add_parser("bench", help="separable vs direct window correlation timing")
    b.add_argument("--window", type=int, default=11)
    b.add_argument("--sigma", type=float, default=1.5)
    b.add_argument("--dims", type=_dims, default=(1, 8, 256, 256))
    b.add_argument("--repeat", type=int, default=3)
    return parser


def _load_pair(args):
    return read_fdmp(args.student), read_fdmp(args.teacher)


def _fmt(x):
    return f"{x:.12g}"


def cmd_gen(args):
    sc = generate_scenario(args.generator, args.dims, args.seed)
    write_fdmp(args.out, sc.teacher[0], args.dtype)
    if args.student_out:
        student = sc.student[0] if sc.student is not None else \
            np.random.default_rng((args.seed, 0x5EED)).random(args.dims)
        write_fdmp(args.student_out, student, args.dtype)
    return 0


def cmd_loss(args):
    s, t = _load_pair(args)
    cfg = _config(args)
    sn, tn = prepare_pair(s, t, None, cfg)
    res = compute_loss(sn, tn, cfg)
    print(_fmt(res.scalar))
    for name, comp in res.component_maps.items():
        if comp is not None:
            print(f"mean_{name} {_fmt(float(np.mean(comp)))}")
    return 0


def cmd_lossmap(args):
    s, t = _load_pair(args)
    cfg = _config(args)
    sn, tn = prepare_pair(s, t, None, cfg)
    res = compute_loss(sn, tn, cfg)
    if args.component == "total":
        values = res.map
    else:
        values = res.component_maps.get(args.component)
        if values is None:
            print(f"component {args.component!r} is not available for kind {cfg.kind}", file=sys.stderr)
            return 2
    export_map(values[args.batch].mean(axis=0), args.out)
    return 0


def cmd_gradmap(args):
    s, t = _load_pair(args)
    cfg = _config(args)
    _, g = backward(cfg.kind, s, t, None, cfg)
    export_map(np.abs(g.d_student[args.batch]).mean(axis=0), args.out)
    return 0


def cmd_gradcheck(args):
    cfg = _config(args)
    rng = np.random.default_rng(args.seed)
    s = rng.random(args.dims)
    t = rng.random(args.dims)
    rep = finite_diff_check(cfg.kind, s, t, cfg, args.eps, max_coords=args.max_coords, seed=args.seed)
    print(f"kind {cfg.kind}")
    print(f"checked {rep.checked}")
    print(f"skipped {len(rep.skipped)}")
    print(f"epsilon {rep.epsilon:g}")
    print(f"max_abs_err {rep.max_abs_err:.3e}")
    print(f"max_rel_err {rep.max_rel_err:.3e}")
    print(f"worst_index {rep.worst_index}")
    ok = rep.worst_rel_err < GRADCHECK_TOL
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def cmd_distill(args):
    sc = generate_scenario(args.scenario, args.dims, args.seed)
    cfg = DistillConfig(
        loss=_config(args), lr=args.lr, momentum=args.momentum, steps=args.steps,
        lam=args.lam, student_kind=args.student_kind, seed=args.seed,
    )
    log = run_distillation(sc, cfg)
    if args.log:
        with open(args.log, "w", newline="") as fh:
            w = csv.writer(fh)
            # timings stay out of the file so it is reproducible
            w.writerow(["step", "loss", "ssim"])
            for i, row in enumerate(zip(log.losses, log.ssims)):
                w.writerow([i] + [repr(float(v)) for v in row])
    if args.out:
        write_fdmp(args.out, log.student[0])
    print(f"steps {args.steps}")
    print(f"loss_first {_fmt(log.losses[0])}")
    print(f"loss_last {_fmt(log.losses[-1])}")
    print(f"ssim_last {_fmt(log.ssims[-1])}")
    print(f"mean step time {np.mean(log.seconds) * 1e3:.3f} ms", file=sys.stderr)
    return 0


def cmd_bench(args):
    print(format_bench(run_bench(args.dims, args.window, args.sigma, args.repeat)))
    return 0


COMMANDS = {
    "gen": cmd_gen, "loss": cmd_loss, "lossmap": cmd_lossmap, "gradmap": cmd_gradmap,
    "gradcheck": cmd_gradcheck, "distill": cmd_distill, "bench": cmd_bench,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (SsimKdError, OSError) as exc:
        print(f"ssimkd {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
