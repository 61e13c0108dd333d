"""Command-line interface: ``acca {generate,fit,sweep,eval}``.

Exit codes: 0 success, 2 parameter error, 3 input/output error,
4 numerical abort.
"""

import argparse
import logging
import sys
import time
from pathlib import Path


from . import io
from .align import initialize_alignment
from .cca import DatasetPair
from .driver import HyperParams, fit_acca
from .errors import ContractViolation, NumericalAbort, ParameterError
from .metrics import (
    DEFAULT_K,
    baseline_accuracy,
    check_permutation,
    monte_carlo,
    topk_accuracy,
)
from .synth import GenConfig, generate

log = logging.getLogger("acca")

EXIT_OK, EXIT_PARAM, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4


class InputError(Exception):
    pass


def _out_dir(path):
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _read(path):
    try:
        return io.read_matrix_csv(path)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read matrix {path}: {exc}") from exc


def _lam_label(lam):
    return f"{lam:g}"


def _initializer_settings(args):
    return {"stages": args.init_stages, "frame": args.frame, "refine": not args.no_refine}


def _initialize(data, hp, settings):
    return initialize_alignment(
        data, hp.gamma1, hp.gamma2, hp.lam, hp.rank_rtol,
        max_iter=hp.inner_max_iters, stages=settings["stages"],
        frame=settings["frame"], refine=settings["refine"],
    )


def cmd_generate(config, out_dir):
    """Write X.csv, Y.csv, P_true.csv and manifest.json for one seeded instance."""
    out = _out_dir(out_dir)
    inst = generate(config)
    io.write_matrix_csv(out / "X.csv", inst.data.X)
    io.write_matrix_csv(out / "Y.csv", inst.data.Y)
    io.write_matrix_csv(out / "P_true.csv", inst.P_true)
    manifest = {
        "config": config.to_dict(),
        "shapes": {
            "X": list(inst.data.X.shape),
            "Y": list(inst.data.Y.shape),
            "P_true": list(inst.P_true.shape),
        },
        "files": ["X.csv", "Y.csv", "P_true.csv"],
        "centered": True,
    }
    io.write_json(out / "manifest.json", manifest)
    return manifest


def cmd_fit(data, hp, out_dir, P_true=None, k_values=DEFAULT_K, init=None, config=None):
    """Initialize, fit, and write report.json, loss_trace.csv, P_est.csv, P_est.pgm.

    Wall-clock timings go to timing.json so that report.json depends only
    on the inputs.
    """
    init = init or {"stages": 8, "frame": "canonical", "refine": True}
    out = _out_dir(out_dir)
    hp.check_against(data.n_samples)
    t0 = time.perf_counter()
    P0 = _initialize(data, hp, init)
    t1 = time.perf_counter()
    fit = fit_acca(data, hp, P0)
    t2 = time.perf_counter()

    P = fit.alignment.P
    io.write_matrix_csv(out / "P_est.csv", P)
    io.write_pgm(out / "P_est.pgm", P)
    io.write_rows_csv(
        out / "loss_trace.csv", ["iteration", "loss"],
        [(i + 1, float(v)) for i, v in enumerate(fit.loss_trace)],
    )
    report = {
        "command": "fit",
        "config": config.to_dict() if config is not None else None,
        "data": {"X": list(data.X.shape), "Y": list(data.Y.shape)},
        "hyperparams": hp.to_dict(),
        "initializer": dict(init),
        "loss_trace": [float(v) for v in fit.loss_trace],
        "iterations_run": fit.iterations_run,
        "stop_reason": fit.stop_reason,
        "feasibility": fit.alignment.feasibility_report,
        "artifacts": ["P_est.csv", "P_est.pgm", "loss_trace.csv", "report.json", "timing.json"],
    }
    if P_true is not None:
        P_true = check_permutation(P_true)
        n = P_true.shape[0]
        report["topk"] = {
            "k_values": list(k_values),
            "accuracy": [topk_accuracy(P, P_true, k) for k in k_values],
            "baseline": [baseline_accuracy(n, k) for k in k_values],
        }
    io.write_json(out / "report.json", report)
    io.write_json(out / "timing.json", {"initialize": t1 - t0, "fit": t2 - t1})
    return report


def cmd_sweep(lambdas, replicates, config, hp, out_dir, k_values=DEFAULT_K,
              init=None, max_workers=1):
    """Monte Carlo over each entropy bound; writes sweep.csv plus per-bound artifacts."""
    init = init or {"stages": 8, "frame": "canonical", "refine": True}
    out = _out_dir(out_dir)
    for lam in lambdas:
        HyperParams(**{**hp.to_dict(), "lam": lam}).check_against(config.n)
    sweep_rows = []
    per_lambda = {}
    timing = {}
    for lam in lambdas:
        hp_l = HyperParams(**{**hp.to_dict(), "lam": lam})
        mc = monte_carlo(hp_l, config, replicates, k_values, max_workers=max_workers,
                         init=init)
        label = _lam_label(lam)
        for k, mean, std, base in mc.topk.rows():
            sweep_rows.append((float(lam), k, float(mean), float(std), float(base)))
        io.write_rows_csv(
            out / f"topk_lambda_{label}.csv", ["k", "mean", "std", "baseline"],
            [(k, float(m), float(s), float(b)) for k, m, s, b in mc.topk.rows()],
        )
        io.write_rows_csv(
            out / f"loss_lambda_{label}.csv", ["iteration", "mean", "std"],
            [(i + 1, float(m), float(s)) for i, (m, s) in enumerate(zip(mc.loss.mean, mc.loss.std))],
        )
        io.write_pgm(out / f"P_lambda_{label}.pgm", mc.replicates[0].P_est)
        io.write_matrix_csv(out / f"P_lambda_{label}.csv", mc.replicates[0].P_est)
        per_lambda[label] = {
            "topk": mc.topk.to_dict(),
            "loss": mc.loss.to_dict(),
            "mean_row_entropy": mc.mean_row_entropy,
            "failures": [list(f) for f in mc.failures],
            "image_seed": mc.replicates[0].seed,
        }
        timing[label] = mc.timings
    io.write_pgm(out / "P_true.pgm", generate(config).P_true)
    io.write_rows_csv(out / "sweep.csv", ["lambda", "k", "mean", "std", "baseline"], sweep_rows)
    report = {
        "command": "sweep",
        "config": config.to_dict(),
        "hyperparams": hp.to_dict(),
        "lambdas": [float(x) for x in lambdas],
        "replicates": replicates,
        "initializer": dict(init),
        "results": per_lambda,
    }
    io.write_json(out / "report.json", report)
    io.write_json(out / "timing.json", timing)
    return report


def cmd_eval(P_est, P_true, k_values, out_dir=None):
    """Per-k accuracy against the random-guess baseline; returns the rows."""
    P_true = check_permutation(P_true)
    n = P_true.shape[0]
    if P_est.shape != P_true.shape:
        raise ParameterError(f"P_est is {P_est.shape} but P_true is {P_true.shape}")
    rows = [(k, topk_accuracy(P_est, P_true, k), baseline_accuracy(n, k)) for k in k_values]
    if out_dir is not None:
        out = _out_dir(out_dir)
        io.write_rows_csv(out / "eval.csv", ["k", "accuracy", "baseline"],
                          [(k, float(a), float(b)) for k, a, b in rows])
    return rows


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _add_gen_flags(p):
    g = p.add_argument_group("synthetic data")
    g.add_argument("--n", type=int, default=20, help="number of samples N")
    g.add_argument("--dbar", type=int, default=2, help="latent dimension")
    g.add_argument("--dx", type=int, default=15, help="rows of the first view")
    g.add_argument("--dy", type=int, default=10, help="rows of the second view")
    g.add_argument("--noise", type=float, default=0.0,
                   help="additive Gaussian noise std (extension; default 0)")
    g.add_argument("--seed", type=int, default=0)


def _add_fit_flags(p, sweep=False):
    g = p.add_argument_group("model")
    g.add_argument("--d", type=int, default=7, help="embedding dimension")
    g.add_argument("--gamma1", type=float, default=1e-4)
    g.add_argument("--gamma2", type=float, default=1e-4)
    if sweep:
        g.add_argument("--lambdas", type=_float_list, default=[0.1, 0.5, 1.0, 2.0])
    else:
        g.add_argument("--lambda", dest="lam", type=float, default=0.1,
                       help="per-row entropy bound, in (0, ln N]")
    g.add_argument("--max-iters", type=int, default=100, help="outer iteration cap")
    g.add_argument("--loss-threshold", type=float, default=1e-8)
    g.add_argument("--loss-rel-tol", type=float, default=1e-6)
    g.add_argument("--inner-max-iters", type=int, default=500)
    g.add_argument("--rank-rtol", type=float, default=1e-10)
    g.add_argument("--init-stages", type=int, default=8,
                   help="entropy-continuation stages in the initializer")
    g.add_argument("--frame", choices=["canonical", "svd"], default="canonical",
                   help="how the initializer reconciles view dimensions")
    g.add_argument("--no-refine", action="store_true",
                   help="skip the discrete refinement of the initializer")
    g.add_argument("--k", type=_int_list, default=list(DEFAULT_K))


def _hyperparams(args, lam):
    return HyperParams(
        d=args.d, gamma1=args.gamma1, gamma2=args.gamma2, lam=lam,
        outer_max_iters=args.max_iters, loss_threshold=args.loss_threshold,
        loss_rel_tol=args.loss_rel_tol, rank_rtol=args.rank_rtol,
        inner_max_iters=args.inner_max_iters, seed=args.seed,
    )


def _gen_config(args):
    return GenConfig(n=args.n, dbar=args.dbar, dx=args.dx, dy=args.dy,
                     seed=args.seed, noise=args.noise)


def build_parser():
    parser = argparse.ArgumentParser(prog="acca", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic instance")
    _add_gen_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit", help="initialize and fit on one dataset")
    _add_gen_flags(p)
    _add_fit_flags(p)
    src = p.add_argument_group("input")
    src.add_argument("--synthetic", action="store_true", help="generate the data from --seed")
    src.add_argument("--x", help="CSV of the first view (D_x x N)")
    src.add_argument("--y", help="CSV of the second view (D_y x N)")
    src.add_argument("--p-true", help="optional ground-truth permutation CSV for scoring")
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="Monte Carlo over several entropy bounds")
    _add_gen_flags(p)
    _add_fit_flags(p, sweep=True)
    p.add_argument("--replicates", type=int, default=10)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="top-k accuracy of an estimate")
    p.add_argument("--p-est", required=True)
    p.add_argument("--p-true", required=True)
    p.add_argument("--k", type=_int_list, default=list(DEFAULT_K))
    p.add_argument("--out")
    return parser


def _run(args):
    if args.command == "generate":
        manifest = cmd_generate(_gen_config(args), args.out)
        print(f"wrote {', '.join(manifest['files'])} and manifest.json to {args.out}")
        return

    if args.command == "fit":
        hp = _hyperparams(args, args.lam)
        config = None
        P_true = _read(args.p_true) if args.p_true else None
        if args.synthetic:
            if args.x or args.y:
                raise ParameterError("--synthetic cannot be combined with --x/--y")
            config = _gen_config(args)
            inst = generate(config)
            data = inst.data
            if P_true is None:
                P_true = inst.P_true
        else:
            if not (args.x and args.y):
                raise ParameterError("fit needs --x and --y, or --synthetic")
            X, Y = _read(args.x), _read(args.y)
            if X.shape[1] != Y.shape[1]:
                raise ParameterError(
                    f"views disagree on N: X is {X.shape[0]}x{X.shape[1]}, "
                    f"Y is {Y.shape[0]}x{Y.shape[1]}"
                )
            data = DatasetPair.from_raw(X, Y)
        report = cmd_fit(data, hp, args.out, P_true=P_true, k_values=args.k,
                         init=_initializer_settings(args), config=config)
        print(f"{report['iterations_run']} iterations, stop: {report['stop_reason']}, "
              f"final loss {report['loss_trace'][-1]:.6g}")
        if "topk" in report:
            for k, a, b in zip(report["topk"]["k_values"], report["topk"]["accuracy"],
                               report["topk"]["baseline"]):
                print(f"top-{k}: {a:.3f} (random {b:.3f})")
        return

    if args.command == "sweep":
        if args.replicates < 1:
            raise ParameterError("--replicates must be >= 1")
        report = cmd_sweep(args.lambdas, args.replicates, _gen_config(args),
                           _hyperparams(args, args.lambdas[0]), args.out, args.k,
                           init=_initializer_settings(args), max_workers=args.workers)
        for label, res in report["results"].items():
            accs = " ".join(f"{m:.3f}" for m in res["topk"]["accuracy_mean"])
            print(f"lambda={label}: top-k mean {accs}  row entropy {res['mean_row_entropy']:.3f}")
        return

    if args.command == "eval":
        rows = cmd_eval(_read(args.p_est), _read(args.p_true), args.k, args.out)
        print("k,accuracy,baseline")
        for k, a, b in rows:
            print(f"{k},{a:.6g},{b:.6g}")
        return


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _run(args)
    except (ParameterError, ContractViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
