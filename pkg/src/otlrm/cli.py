"""Command-line driver: ``otlrm {complete,cassi,denoise,simulate,tsvt,metrics,gradcheck}``.

Exit status is 0 on success, 1 on usage or input errors and 2 on numeric
failures.  Errors are printed to stderr as one JSON line.
"""
import argparse
import json
import math
import sys

import numpy as np

from . import autodiff as ad
from . import io, metrics, model, operators, ortho, tsvt
from .config import LOSS_KINDS, PRECISIONS, SCHEDULES, ExperimentConfig
from .errors import NumericError


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# flag name -> config field
_FIT_FLAGS = {
    "rank": int, "lam": float, "beta": float, "k": int, "slope": float, "lr": float,
    "lr_schedule": str, "t_max": int, "seed": int, "precision": str, "loss_kind": str,
    "init": str, "eval_every": int, "truth": str,
}


def _add_fit_flags(p):
    p.add_argument("input", nargs="?", help="input file (.ot3 or .npy)")
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--out", dest="output", help="output tensor path")
    for name, typ in _FIT_FLAGS.items():
        kw = {"type": typ, "default": None}
        if name == "precision":
            kw["choices"] = PRECISIONS
        if name == "loss_kind":
            kw["choices"] = LOSS_KINDS
        if name == "lr_schedule":
            kw["choices"] = SCHEDULES
        p.add_argument("--" + name.replace("_", "-"), dest=name, **kw)
    p.add_argument("--tie-transforms", dest="tie_transforms", action="store_true", default=None)


def build_parser():
    parser = _Parser(prog="otlrm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("complete", help="tensor completion")
    _add_fit_flags(p)
    p.add_argument("--sr", type=float, default=None, help="sampling rate of a seeded Bernoulli mask")
    p.add_argument("--mask", default=None, help="0/1 mask tensor file")

    p = sub.add_parser("cassi", help="CASSI reconstruction from a 2-D measurement")
    _add_fit_flags(p)
    p.add_argument("--mask", default=None, help="coded aperture file (n3 = 1)")
    p.add_argument("--shift", type=int, default=None)
    p.add_argument("--bands", type=int, default=None)

    p = sub.add_parser("denoise", help="denoising with an l1 fidelity")
    _add_fit_flags(p)
    p.add_argument("--sigma", type=float, default=None,
                   help="treat input as clean and add Gaussian noise first")

    p = sub.add_parser("simulate", help="apply a forward operator to a ground-truth cube")
    p.add_argument("input")
    p.add_argument("--op", required=True, choices=("completion", "cassi", "noise"))
    p.add_argument("--out", required=True)
    p.add_argument("--sr", type=float, default=None)
    p.add_argument("--mask", default=None)
    p.add_argument("--shift", type=int, default=2)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("tsvt", help="one-shot t-SVT shrinkage")
    p.add_argument("input")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--transform", choices=("identity", "random"), default="identity")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("metrics", help="PSNR/SSIM between two cubes")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--peak", type=float, default=1.0)

    p = sub.add_parser("gradcheck", help="validate analytic gradients against finite differences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--probes", type=int, default=100)
    return parser


def _jsonable(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _load(path, what):
    if path is None:
        raise UsageError(f"missing {what} path")
    try:
        return io.load_any(path)
    except OSError as exc:
        raise UsageError(f"cannot read {what} {path!r}: {exc.strerror}") from None


def _resolve_config(args, task):
    base = ExperimentConfig.from_json(args.config).to_dict() if args.config else {}
    base["task"] = task
    overrides = {f: getattr(args, f) for f in list(_FIT_FLAGS) + ["tie_transforms"]}
    for f in ("input", "output", "sr", "mask", "shift", "bands", "sigma"):
        if hasattr(args, f):
            overrides[f] = getattr(args, f)
    base.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(base)


def _write_outputs(cfg, X, trace, truth):
    if cfg.output is None:
        raise UsageError("missing --out")
    io.save_tensor(cfg.output, X)
    with open(cfg.output + ".config.json", "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
    report = {
        "task": cfg.task,
        "config": cfg.to_dict(),
        "iterations": trace.iterations,
        "final_loss": trace.loss[-1],
        "psnr": None,
        "ssim": None,
        "wall_seconds": trace.wall_seconds,
    }
    if truth is not None:
        report["psnr"] = metrics.psnr(X, truth)[1]
        try:
            report["ssim"] = metrics.ssim(X, truth)[1]
        except ValueError:
            report["ssim"] = None
    with open(cfg.output + ".report.json", "w") as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
    print(json.dumps(_jsonable({k: report[k] for k in
                                ("task", "iterations", "final_loss", "psnr", "ssim", "wall_seconds")})))


def cmd_complete(args):
    cfg = _resolve_config(args, "complete")
    data = _load(cfg.input, "input")
    if cfg.mask is not None:
        mask = _load(cfg.mask, "mask") != 0
    elif cfg.sr is not None:
        mask = operators.bernoulli_mask(data.shape, cfg.sr, cfg.seed)
    else:
        raise UsageError("complete needs --sr or --mask")
    op = operators.Completion(mask)
    truth = _load(cfg.truth, "truth") if cfg.truth else None
    X, trace = model.fit(cfg, op, op.forward(data), truth)
    _write_outputs(cfg, X, trace, truth)


def cmd_cassi(args):
    cfg = _resolve_config(args, "cassi")
    meas = _load(cfg.input, "measurement")
    if meas.shape[2] != 1:
        raise UsageError(f"measurement must have n3 = 1, got shape {meas.shape}")
    mask = _load(cfg.mask, "mask")
    if mask.shape[2] != 1:
        raise UsageError(f"mask must have n3 = 1, got shape {mask.shape}")
    if cfg.bands is None:
        raise UsageError("cassi needs --bands")
    op = operators.Cassi(mask[:, :, 0], cfg.shift)
    shape = (mask.shape[0], mask.shape[1], cfg.bands)
    truth = _load(cfg.truth, "truth") if cfg.truth else None
    X, trace = model.fit(cfg, op, meas[:, :, 0], truth, shape=shape)
    _write_outputs(cfg, X, trace, truth)


def cmd_denoise(args):
    cfg = _resolve_config(args, "denoise")
    data = _load(cfg.input, "input")
    if cfg.sigma is not None:
        data = operators.add_gaussian_noise(data, cfg.sigma, cfg.seed)
    if cfg.loss_kind is None:
        cfg = cfg.replace(loss_kind="l1")
    truth = _load(cfg.truth, "truth") if cfg.truth else None
    X, trace = model.fit(cfg, operators.Noise(cfg.sigma or 0.0), data, truth)
    _write_outputs(cfg, X, trace, truth)


def cmd_simulate(args):
    data = _load(args.input, "input")
    if args.op == "completion":
        if args.mask is not None:
            mask = _load(args.mask, "mask") != 0
        elif args.sr is not None:
            mask = operators.bernoulli_mask(data.shape, args.sr, args.seed)
        else:
            raise UsageError("simulate --op completion needs --sr or --mask")
        out = operators.apply_completion(data, mask)
        io.save_tensor(args.out + ".mask.ot3", mask.astype(np.float64))
    elif args.op == "cassi":
        if args.mask is not None:
            M = _load(args.mask, "mask")[:, :, 0]
        else:
            M = operators.binary_mask(data.shape[:2], args.seed)
            io.save_tensor(args.out + ".mask.ot3", M[:, :, None])
        meas = operators.cassi_forward(data, M, args.shift)
        if args.sigma:
            meas = meas + args.sigma * np.random.default_rng(args.seed).standard_normal(meas.shape)
        out = meas[:, :, None]
    else:
        if args.sigma is None:
            raise UsageError("simulate --op noise needs --sigma")
        out = operators.add_gaussian_noise(data, args.sigma, args.seed)
    io.save_tensor(args.out, out)
    print(json.dumps({"op": args.op, "shape": list(out.shape), "out": args.out}))


def cmd_tsvt(args):
    data = _load(args.input, "input")
    n3 = data.shape[2]
    L = np.eye(n3) if args.transform == "identity" else ortho.OrthoTransform.random(n3, args.seed).L
    out = tsvt.tsvt(data, L, args.gamma)
    io.save_tensor(args.out, out)
    print(json.dumps({"gamma": args.gamma, "tnn_before": tsvt.tnn(data, L),
                      "tnn_after": tsvt.tnn(out, L), "tubal_rank": tsvt.tubal_rank(out, L)}))


def cmd_metrics(args):
    a = _load(args.a, "first input")
    b = _load(args.b, "second input")
    if a.shape != b.shape:
        raise UsageError(f"shapes differ: {a.shape} vs {b.shape}")
    rep = {"psnr": metrics.psnr(a, b, args.peak)[1]}
    try:
        rep["ssim"] = metrics.ssim(a, b, args.peak)[1]
    except ValueError:
        rep["ssim"] = None
    print(json.dumps(_jsonable(rep)))


def gradcheck_suite(seed=0, probes=100):
    """Run the gradient validation checks; returns a list of (name, error, tolerance)."""
    rng = np.random.default_rng(seed)
    results = []

    # central differences are exact for piecewise quadratics, so a wide step only removes rounding
    x = rng.standard_normal((4, 3, 2))
    results.append(("quadratic", ad.grad_check(lambda p: ad.sq_norm(p["x"]), {"x": x}, h=1e-3,
                                               probes=probes, rng=rng), 1e-8))

    W = rng.standard_normal((6, 6))
    C = rng.standard_normal((3, 4, 6))
    U = rng.standard_normal((3, 4, 6))
    fn = lambda p: ad.sq_norm(ad.sub(ad.mode3(U, ad.householder_chain(p["W"])), C))  # noqa: E731
    results.append(("householder_chain", ad.grad_check(fn, {"W": W}, probes=probes, rng=rng), 1e-4))

    fn = lambda p: ad.sq_norm(ad.matmul(ad.leaky_relu(ad.matmul(p["S"], p["G1"])), p["G2"]))  # noqa: E731
    while True:
        params = {"S": rng.standard_normal((4, 3)), "G1": rng.standard_normal((3, 3)),
                  "G2": rng.standard_normal((3, 3))}
        if ad.kink_margin(ad.evaluate(fn, params)) >= 0.1:
            break
    results.append(("rank_estimate", ad.grad_check(fn, params, h=1e-4, probes=probes, rng=rng), 1e-5))

    shape = (6, 6, 3)
    truth = rng.standard_normal(shape)
    ops = {
        "completion": (operators.Completion(operators.bernoulli_mask(shape, 0.5, seed)), None),
        "cassi": (operators.Cassi(operators.binary_mask(shape[:2], seed), 2), None),
        "denoise": (operators.Noise(0.1), "l1"),
    }
    for name, (op, loss_kind) in ops.items():
        obs = op.forward(truth)
        for s in range(seed, seed + 50):
            m = model.init_model(shape, 2, k=2, seed=s, lam=1e-8, beta=1e-3)
            fn = model.objective_graph(m, op, obs, loss_kind)
            if ad.kink_margin(ad.evaluate(fn, m.params)) >= 1e-3:
                break
        # h = 1e-5 stays far inside the 1e-3 kink margin and keeps l1 sums above rounding noise
        results.append((f"objective[{name}]", ad.grad_check(fn, m.params, h=1e-5, probes=probes, rng=rng),
                        1e-4))
    return results


def cmd_gradcheck(args):
    failed = False
    for name, err, tol in gradcheck_suite(args.seed, args.probes):
        ok = err < tol
        failed |= not ok
        print(json.dumps({"check": name, "max_rel_error": err, "tolerance": tol, "pass": ok}))
    if failed:
        raise NumericError("gradient check failed")


COMMANDS = {
    "complete": cmd_complete, "cassi": cmd_cassi, "denoise": cmd_denoise,
    "simulate": cmd_simulate, "tsvt": cmd_tsvt, "metrics": cmd_metrics,
    "gradcheck": cmd_gradcheck,
}


def _fail(kind, message, code):
    print(json.dumps({"error": kind, "message": str(message).replace("\n", " ")}), file=sys.stderr)
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail("usage", exc, 1)
    except NumericError as exc:
        return _fail("numeric", exc, 2)
    except (ValueError, OSError, IndexError) as exc:
        return _fail(type(exc).__name__, exc, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
