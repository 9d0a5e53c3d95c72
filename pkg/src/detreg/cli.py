"""Command line entry point: ``detreg verify|sample|fit|experiment``."""

import argparse
import json
import sys

import numpy as np

from . import data, dpp, verify
from .errors import ConfigError, DetregError
from .experiments import EXPERIMENTS, dump_records, run_experiment
from .kernels import BasisSpec, KernelSpec, build_nnp, median_heuristic_bandwidth
from .regression import fit_full, fit_nystrom, fit_subset_interpolator

EXIT_FAILED_CHECK = 1
EXIT_ERROR = 2


def _basis(text, d):
    if text == "constant":
        return BasisSpec("constant")
    if text == "linear":
        return BasisSpec("constant_linear")
    if text == "none":
        return BasisSpec("none")
    if text.startswith("poly:"):
        try:
            order = int(text[5:])
        except ValueError:
            raise ConfigError({"basis": f"bad polynomial order in {text!r}"}) from None
        return BasisSpec("poly_total_order", order=order)
    raise ConfigError({"basis": f"expected constant|linear|poly:K, got {text!r}"})


def _bandwidth(text, X):
    if text == "median":
        return median_heuristic_bandwidth(X)
    try:
        return float(text)
    except ValueError:
        raise ConfigError({"bandwidth-sq": f"expected a number or 'median', got {text!r}"}) from None


def _kernel(args, X):
    if args.kernel == "gaussian":
        return KernelSpec("gaussian", bandwidth_sq=_bandwidth(args.bandwidth_sq, X))
    d = X.shape[1]
    reg = args.regularity if args.regularity is not None else max(2, d // 2 + 1)
    return KernelSpec("thin_plate", regularity_p=reg)


def _sizes(text):
    if text is None:
        return None
    try:
        sizes = [int(s) for s in str(text).split(",") if s.strip()]
    except ValueError:
        raise ConfigError({"subset-size": f"expected K or K1,K2,..., got {text!r}"}) from None
    if not sizes:
        raise ConfigError({"subset-size": "empty list"})
    return sizes


def _load(args):
    if args.csv:
        if not args.target:
            raise ConfigError({"target": "required with --csv"})
        return data.load_csv(args.csv, args.target)
    n = args.n or 50
    if args.dataset == "franke":
        return data.gen_franke(n, args.seed)
    if args.dataset == "toy":
        return data.gen_toy(n, seed=args.seed)
    if args.dataset.startswith("system"):
        return data.gen_system(int(args.dataset[-1]), n, args.seed)
    raise ConfigError({"dataset": f"unknown dataset {args.dataset!r}"})


def _problem(args):
    ds = _load(args)
    kernel = _kernel(args, ds.X)
    basis = _basis(args.basis, ds.d)
    return ds, build_nnp(ds.X, kernel, basis)


def _emit(records, args):
    text = dump_records(records, args.format)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def cmd_verify(args):
    reports = verify.identity_suite(n=args.n or 6, seed=args.seed, lam=args.lam, gamma=args.gamma,
                                    sampler_draws=args.draws)
    for r in reports:
        print(r.line(), file=sys.stderr)
    records = [{"kind": "identity", "identity_id": r.identity_id, "label": r.label, "method": r.method,
                "max_abs_deviation": r.max_abs_deviation, "tolerance": r.tolerance, "passed": r.passed,
                "conclusive": r.conclusive, "samples_or_subsets": r.samples_or_subsets,
                "extras": json.dumps(r.extras, sort_keys=True, default=float)} for r in reports]
    _emit(records, args)
    failed = [r for r in reports if not r.passed and r.conclusive]
    return EXIT_FAILED_CHECK if failed else 0


def cmd_sample(args):
    ds, nnp = _problem(args)
    rng = np.random.default_rng(args.seed)
    sizes = _sizes(args.subset_size)
    k = sizes[0] if sizes else None
    if args.fixed_size and k is None:
        raise ConfigError({"subset-size": "required with --fixed-size"})
    records = []
    model = None
    if args.sampler == "dpp":
        model = dpp.build_ensemble(nnp, args.lam)
    for rep in range(args.repeats):
        if args.sampler == "dpp":
            C = dpp.sample_fixed_size(model, k, rng) if args.fixed_size else dpp.sample(model, rng)
        elif args.sampler == "uniform":
            if k is None:
                raise ConfigError({"subset-size": "required for the uniform sampler"})
            C = dpp.uniform_subset(nnp.n, k, rng)
        else:
            C = dpp.volume_sample(nnp.V, k, rng) if args.fixed_size else \
                dpp.sample_volume_bernoulli(nnp.V, args.t, rng)
        records.append({"kind": "sample", "seed": args.seed, "repeat": rep, "sampler": args.sampler,
                        "subset_size": len(C), "subset": " ".join(str(i) for i in C)})
    if model is not None:
        records.append({"kind": "summary", "sampler": "dpp", "expected_size": model.expected_size,
                        "d_eff": model.d_eff, "lambda": args.lam})
    return _emit(records, args) or 0


def cmd_fit(args):
    ds, nnp = _problem(args)
    sizes = _sizes(args.subset_size)
    if sizes is None:
        fit = fit_full(nnp, ds.y, args.gamma)
        C = None
    else:
        rng = np.random.default_rng(args.seed)
        k = sizes[0]
        if args.sampler == "uniform":
            C = dpp.uniform_subset(nnp.n, k, rng)
        else:
            C = dpp.sample_fixed_size(dpp.build_ensemble(nnp, args.lam), k, rng)
        fit = fit_subset_interpolator(nnp, ds.y, C) if args.gamma == 0 else fit_nystrom(nnp, ds.y, args.gamma, C)
    resid = fit.fitted - ds.y
    records = [{"kind": "fit", "mode": fit.mode, "gamma": args.gamma, "n": nnp.n,
                "subset_size": nnp.n if C is None else len(C),
                "landmarks": "" if C is None else " ".join(str(i) for i in C),
                "train_mse": float(np.mean(resid * resid)),
                "beta": " ".join(repr(float(b)) for b in fit.beta),
                "kernel": json.dumps(fit.kernel.to_dict(), sort_keys=True),
                "basis": json.dumps(fit.basis.to_dict(), sort_keys=True)}]
    records += [{"kind": "alpha", "index": int(i), "value": float(a)}
                for i, a in zip(range(nnp.n) if fit.landmarks is None else fit.landmarks, fit.alpha)]
    return _emit(records, args) or 0


def cmd_experiment(args):
    config = {}
    if args.config:
        try:
            config = json.loads(args.config)
        except json.JSONDecodeError as exc:
            raise ConfigError({"config": f"invalid JSON: {exc}"}) from None
        if not isinstance(config, dict):
            raise ConfigError({"config": "must be a JSON object"})
    if args.repeats is not None:
        config["repeats"] = args.repeats
    sizes = _sizes(args.subset_size)
    if sizes is not None:
        config["subset_size" if args.name == "precond" else "subset_sizes"] = (
            sizes[0] if args.name == "precond" else sizes)
    if args.csv:
        config["csv"], config["target"] = args.csv, args.target
    if args.n is not None:
        config["n_train" if args.name in ("toy", "franke") else "n"] = args.n
    if args.lam_given:
        config["lambda"] = args.lam
    if args.gamma_given:
        config["gamma"] = args.gamma
    result = run_experiment(args.name, config, args.seed)
    text = result.to_json() if args.format == "json" else result.to_csv()
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text + ("" if text.endswith("\n") else "\n"))
    return 0


class _Given(argparse.Action):
    """Store the value and remember that the flag was passed explicitly."""

    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, values)
        setattr(namespace, self.dest + "_given", True)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--csv", help="input CSV (header required)")
    common.add_argument("--target", help="target column of --csv")
    common.add_argument("--dataset", default="franke", help="franke|toy|system1|system2|system3 (no --csv)")
    common.add_argument("--n", type=int, help="number of generated points or identity-suite size")
    common.add_argument("--kernel", choices=("gaussian", "thin-plate"), default="gaussian")
    common.add_argument("--bandwidth-sq", default="median", help="Gaussian bandwidth sigma^2 or 'median'")
    common.add_argument("--regularity", type=int, help="thin-plate regularity p")
    common.add_argument("--basis", default="linear", help="constant|linear|poly:K")
    common.add_argument("--lambda", dest="lam", type=float, default=1.0, action=_Given)
    common.add_argument("--gamma", type=float, default=1e-3, action=_Given)
    common.add_argument("--subset-size", help="K or comma list K1,K2,...")
    common.add_argument("--fixed-size", action="store_true", help="condition the sampler on |C| = K")
    common.add_argument("--sampler", choices=("dpp", "uniform", "volume-bernoulli"), default="dpp")
    common.add_argument("--t", type=float, default=1.0, help="volume-Bernoulli parameter t")
    common.add_argument("--repeats", type=int)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--config", help="experiment config as a JSON object")
    common.add_argument("--draws", type=int, default=20_000, help="sampler draws for verify")

    parser = argparse.ArgumentParser(prog="detreg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="run the identity checks").set_defaults(func=cmd_verify)
    sub.add_parser("sample", parents=[common], help="draw landmark subsets").set_defaults(func=cmd_sample)
    sub.add_parser("fit", parents=[common], help="fit a regressor").set_defaults(func=cmd_fit)
    exp = sub.add_parser("experiment", parents=[common], help="run a named experiment")
    exp.add_argument("name", choices=EXPERIMENTS)
    exp.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    args.lam_given = getattr(args, "lam_given", False)
    args.gamma_given = getattr(args, "gamma_given", False)
    if args.repeats is None and args.command != "experiment":
        args.repeats = 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"detreg: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (DetregError, OSError) as exc:
        print(f"detreg: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
