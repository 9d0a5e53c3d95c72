"""Desk-scale experiment runners with flat, deterministic record output."""

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import data, dpp, verify
from .errors import (
    CholeskyFailure,
    ConfigError,
    DetregError,
    SingularSubsetSystem,
)
from .kernels import BasisSpec, KernelSpec, build_nnp, median_heuristic_bandwidth
from .nystrom import nystrom_relative_error, projected_nystrom
from .regression import (
    build_preconditioner,
    condition_numbers,
    fit_full_path,
    fit_nystrom,
    fit_subset_interpolator,
    predict,
)

GAMMA_GRID = tuple(10.0 ** -j for j in range(1, 9))
SIGMA_GRID = tuple([round(0.1 * j, 1) for j in range(1, 10)] + [float(j) for j in range(1, 11)])
CI_LEVEL = 0.975

EXPERIMENTS = ("toy", "franke", "interp", "nystrom_error", "timeseries", "precond", "identities")

DEFAULTS = {
    "toy": {"repeats": 25, "n_train": 40, "n_test": 1000, "noise_var": 0.2, "sigma": 1.0,
            "gammas": GAMMA_GRID, "cv": True, "sigmas": SIGMA_GRID, "folds": 10},
    "franke": {"repeats": 10, "n_train": 500, "n_test": 2000, "subset_sizes": (30, 60, 120),
               "samplers": ("dpp", "uniform"), "regularity_p": 2, "basis_order": 1},
    "interp": {"repeats": 25, "csv": None, "target": None, "dataset": "franke", "n": 1000,
               "subset_sizes": (20, 40, 80), "samplers": ("dpp", "uniform"), "bandwidth_sq": "median"},
    "nystrom_error": {"repeats": 10, "csv": None, "target": None, "dataset": "franke", "n": 500,
                      "subset_sizes": (10, 20, 40), "samplers": ("dpp", "uniform"),
                      "bandwidth_sq": "median"},
    "timeseries": {"repeats": 10, "systems": (1, 2, 3), "n": 1000, "subset_sizes": (20, 40, 80),
                   "samplers": ("dpp", "uniform"), "gammas": GAMMA_GRID, "sigmas": SIGMA_GRID,
                   "noise_var": 0.05},
    "precond": {"repeats": 10, "csv": None, "target": None, "dataset": "franke", "n": 500,
                "sigma": 5.0, "lambda": 1e-6, "gamma": 1e-6, "subset_size": None,
                "samplers": ("dpp", "uniform")},
    "identities": {"repeats": 1, "n": 6, "lambda": 0.5, "gamma": 0.05, "sampler_draws": 20_000},
}

DATASETS = ("franke", "toy", "system1", "system2", "system3")


@dataclass
class ExperimentResult:
    experiment: str
    config: dict
    seed: int
    runs: list
    aggregates: list = field(default_factory=list)

    def records(self):
        meta = {"kind": "meta", "experiment": self.experiment, "seed": self.seed,
                "config": json.dumps(_jsonable(self.config), sort_keys=True)}
        return [meta] + [{"kind": "run", **r} for r in self.runs] + [{"kind": "aggregate", **a}
                                                                     for a in self.aggregates]

    def to_json(self):
        return dump_records(self.records(), "json")

    def to_csv(self):
        return dump_records(self.records(), "csv")


def dump_records(records, fmt="json"):
    """Serialize flat records as a JSON array or an RFC-4180 CSV (union of keys, sorted)."""
    recs = _jsonable(list(records))
    if fmt == "json":
        return json.dumps(recs, sort_keys=True, indent=1)
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    cols = sorted({k for r in recs for k in r})
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\r\n")
    w.writeheader()
    for r in recs:
        w.writerow({k: "" if r.get(k) is None else r[k] for k in cols})
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def confidence_interval(values, level=CI_LEVEL):
    """Mean and two-sided Student-t interval at ``level``."""
    v = np.asarray([x for x in values if x is not None and math.isfinite(x)], dtype=float)
    if v.size == 0:
        return math.nan, math.nan, math.nan, 0
    mean = float(v.mean())
    if v.size < 2:
        return mean, mean, mean, 1
    half = float(stats.t.ppf(0.5 + level / 2, v.size - 1) * v.std(ddof=1) / math.sqrt(v.size))
    return mean, mean - half, mean + half, int(v.size)


def aggregate(runs, keys):
    groups = {}
    for r in runs:
        k = tuple(r.get(key) for key in keys)
        groups.setdefault(k, []).append(r.get("metric_value"))
    out = []
    for k in sorted(groups, key=lambda t: tuple((x is None, str(type(x)), x if x is not None else 0)
                                               for x in t)):
        mean, lo, hi, count = confidence_interval(groups[k])
        finite = [x for x in groups[k] if x is not None and math.isfinite(x)]
        out.append({**dict(zip(keys, k)), "mean": mean, "ci_low": lo, "ci_high": hi, "count": count,
                    "failures": len(groups[k]) - count,
                    "median": float(np.median(finite)) if finite else math.nan})
    return out


def worker_count():
    raw = os.environ.get("DETREG_THREADS")
    if raw is None or raw == "":
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError({"DETREG_THREADS": f"not an integer: {raw!r}"}) from None
    if n < 1:
        raise ConfigError({"DETREG_THREADS": "must be >= 1"})
    return n


def repeat_seeds(seed, repeats):
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(repeats)]


def _fan_out(fn, seeds):
    workers = min(worker_count(), max(len(seeds), 1))
    if workers == 1:
        results = [fn(i, s) for i, s in enumerate(seeds)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fn, range(len(seeds)), seeds))
    return [r for chunk in results for r in chunk]


def resolve_config(name, config=None):
    if name not in DEFAULTS:
        raise ConfigError({"experiment": f"unknown experiment {name!r}; choose from {list(EXPERIMENTS)}"})
    cfg = dict(DEFAULTS[name])
    config = dict(config or {})
    problems = {}
    for k, v in config.items():
        if k not in cfg:
            problems[k] = "unknown field"
        else:
            cfg[k] = v
    if problems:
        raise ConfigError(problems)
    _validate(name, cfg)
    return cfg


def _positive_int(cfg, key, problems, minimum=1):
    v = cfg.get(key)
    if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < minimum:
        problems[key] = f"must be an integer >= {minimum}, got {v!r}"


def _validate(name, cfg):
    problems = {}
    _positive_int(cfg, "repeats", problems)
    for key in ("n", "n_train", "n_test", "folds"):
        if key in cfg:
            _positive_int(cfg, key, problems, 2)
    for key in ("gammas", "sigmas"):
        if key in cfg:
            vals = cfg[key]
            if not vals or any(not isinstance(x, (int, float)) or not x > 0 for x in vals):
                problems[key] = "must be a non-empty list of positive numbers"
    for key in ("sigma", "lambda", "gamma", "noise_var"):
        if key in cfg and cfg[key] is not None:
            if not isinstance(cfg[key], (int, float)) or cfg[key] < 0 or (key != "noise_var" and cfg[key] == 0):
                problems[key] = f"must be a positive number, got {cfg[key]!r}"
    if "subset_sizes" in cfg:
        sizes = cfg["subset_sizes"]
        if not sizes or any(not isinstance(k, (int, np.integer)) or k < 1 for k in sizes):
            problems["subset_sizes"] = "must be a non-empty list of positive integers"
    if "samplers" in cfg:
        bad = [s for s in cfg["samplers"] if s not in ("dpp", "uniform")]
        if bad or not cfg["samplers"]:
            problems["samplers"] = f"choose from dpp, uniform; got {list(cfg['samplers'])}"
    if "systems" in cfg and any(s not in (1, 2, 3) for s in cfg["systems"]):
        problems["systems"] = "systems must be drawn from 1, 2, 3"
    if "dataset" in cfg and cfg.get("csv") is None and cfg["dataset"] not in DATASETS:
        problems["dataset"] = f"choose from {list(DATASETS)} or give csv"
    if cfg.get("csv") is not None and not cfg.get("target"):
        problems["target"] = "required when csv is given"
    if "bandwidth_sq" in cfg:
        b = cfg["bandwidth_sq"]
        if b != "median" and (not isinstance(b, (int, float)) or not b > 0):
            problems["bandwidth_sq"] = "must be 'median' or a positive number"
    if "subset_size" in cfg and cfg["subset_size"] is not None:
        _positive_int(cfg, "subset_size", problems)
    if "cv" in cfg and not isinstance(cfg["cv"], bool):
        problems["cv"] = "must be a boolean"
    if problems:
        raise ConfigError(problems)


def _dataset(cfg, seed):
    if cfg.get("csv"):
        return data.load_csv(cfg["csv"], cfg["target"])
    name, n = cfg["dataset"], cfg["n"]
    if name == "franke":
        return data.gen_franke(n, seed)
    if name == "toy":
        return data.gen_toy(n, seed=seed)
    return data.gen_system(int(name[-1]), n, seed)


def _bandwidth(cfg, X):
    b = cfg["bandwidth_sq"]
    return median_heuristic_bandwidth(X) if b == "median" else float(b)


def draw_landmarks(sampler, model, k, rng):
    if sampler == "dpp":
        return dpp.sample_fixed_size(model, k, rng)
    return dpp.uniform_subset(model.n, k, rng)


def _mse(a, b):
    d = np.asarray(a) - np.asarray(b)
    return float(np.mean(d * d))


# ---------------------------------------------------------------- toy

TOY_MODELS = {1: BasisSpec("constant_linear"), 2: BasisSpec("constant"), 3: BasisSpec("none")}


def _cv_select(X, y, basis, sigmas, gammas, folds, rng):
    """10-fold style CV over (sigma, gamma); returns the pair with the smallest mean fold MSE."""
    n = X.shape[0]
    fold_of = rng.permutation(n) % folds
    err = np.zeros((len(sigmas), len(gammas)))
    for f in range(folds):
        tr, va = fold_of != f, fold_of == f
        for i, s in enumerate(sigmas):
            kern = KernelSpec("gaussian", bandwidth_sq=s * s)
            nnp = build_nnp(X[tr], kern, basis)
            Kva, Vva = kern(X[va], X[tr]), basis(X[va])
            for j, (alpha, beta) in enumerate(fit_full_path(nnp, y[tr], gammas)):
                err[i, j] += _mse(Kva @ alpha + Vva @ beta, y[va])
    i, j = np.unravel_index(np.argmin(err), err.shape)
    return sigmas[i], gammas[j]


def _run_toy(cfg, seed):
    def one(rep, s):
        rng = np.random.default_rng(s)
        train = data.gen_toy(cfg["n_train"], cfg["noise_var"], seed=int(rng.integers(2**32)))
        x_test = rng.uniform(-11.0, 11.0, size=cfg["n_test"])[:, None]
        f_test = data.toy_function(x_test[:, 0])
        out = []
        kern = KernelSpec("gaussian", bandwidth_sq=cfg["sigma"] ** 2)
        for m, basis in TOY_MODELS.items():
            nnp = build_nnp(train.X, kern, basis)
            Kt, Vt = kern(x_test, train.X), basis(x_test)
            for g, (alpha, beta) in zip(cfg["gammas"], fit_full_path(nnp, train.y, cfg["gammas"])):
                out.append({"experiment": "toy", "seed": s, "repeat": rep, "model": m, "gamma": g,
                            "sigma": cfg["sigma"], "tuning": "fixed", "sampler": "none",
                            "subset_size": cfg["n_train"], "metric_name": "test_mse",
                            "metric_value": _mse(Kt @ alpha + Vt @ beta, f_test)})
            if cfg["cv"]:
                sig, g = _cv_select(train.X, train.y, basis, cfg["sigmas"], cfg["gammas"], cfg["folds"], rng)
                k2 = KernelSpec("gaussian", bandwidth_sq=sig * sig)
                nnp2 = build_nnp(train.X, k2, basis)
                (alpha, beta), = fit_full_path(nnp2, train.y, [g])
                pred = k2(x_test, train.X) @ alpha + basis(x_test) @ beta
                out.append({"experiment": "toy", "seed": s, "repeat": rep, "model": m, "gamma": g,
                            "sigma": sig, "tuning": "cv", "sampler": "none",
                            "subset_size": cfg["n_train"], "metric_name": "test_mse",
                            "metric_value": _mse(pred, f_test)})
        return out

    runs = _fan_out(one, repeat_seeds(seed, cfg["repeats"]))
    fixed = [r for r in runs if r["tuning"] == "fixed"]
    tuned = [r for r in runs if r["tuning"] == "cv"]
    aggs = aggregate(fixed, ["tuning", "model", "gamma", "metric_name"])
    aggs += aggregate(tuned, ["tuning", "model", "metric_name"])
    return runs, aggs


def toy_best_gamma(result):
    """Per model, the fixed-bandwidth aggregate with the smallest mean test MSE."""
    best = {}
    for a in result.aggregates:
        if a.get("tuning") != "fixed":
            continue
        m = a["model"]
        if m not in best or a["mean"] < best[m]["mean"]:
            best[m] = a
    return best


# ---------------------------------------------------------------- landmark experiments

def _landmark_records(name, s, rep, k, sampler, metric_name, value, **extra):
    return {"experiment": name, "seed": s, "repeat": rep, "subset_size": int(k), "sampler": sampler,
            "metric_name": metric_name, "metric_value": value, **extra}


def _run_franke(cfg, seed):
    kern = KernelSpec("thin_plate", regularity_p=cfg["regularity_p"])
    basis = BasisSpec("poly_total_order", order=cfg["basis_order"])

    def one(rep, s):
        rng = np.random.default_rng(s)
        train = data.gen_franke(cfg["n_train"], int(rng.integers(2**32)))
        test = data.gen_franke(cfg["n_test"], int(rng.integers(2**32)))
        nnp = build_nnp(train.X, kern, basis)
        model = dpp.build_ensemble(nnp, 1.0)
        out = []
        for k in cfg["subset_sizes"]:
            for sampler in cfg["samplers"]:
                C = draw_landmarks(sampler, model, k, rng)
                try:
                    fit = fit_subset_interpolator(nnp, train.y, C)
                    val, err = _mse(predict(fit, test.X), test.y), None
                except SingularSubsetSystem as exc:
                    val, err = math.nan, str(exc)
                out.append(_landmark_records("franke", s, rep, k, sampler, "test_mse", val, error=err))
        return out

    runs = _fan_out(one, repeat_seeds(seed, cfg["repeats"]))
    return runs, aggregate(runs, ["sampler", "subset_size", "metric_name"])


def _run_interp(cfg, seed):
    def one(rep, s):
        rng = np.random.default_rng(s)
        ds = _dataset(cfg, int(rng.integers(2**32)))
        train, test = data.standardize_split(ds, (0.5, 0.5), int(rng.integers(2**32)))
        kern = KernelSpec("gaussian", bandwidth_sq=_bandwidth(cfg, train.X))
        nnp = build_nnp(train.X, kern, BasisSpec("constant_linear"))
        model = dpp.build_ensemble(nnp, 1.0)
        out = []
        for k in cfg["subset_sizes"]:
            for sampler in cfg["samplers"]:
                C = draw_landmarks(sampler, model, k, rng)
                try:
                    fit = fit_subset_interpolator(nnp, train.y, C)
                    resid = predict(fit, test.X) - test.y
                    val, err = float(resid @ resid), None
                except SingularSubsetSystem as exc:
                    val, err = math.nan, str(exc)
                out.append(_landmark_records("interp", s, rep, k, sampler, "total_squared_error", val,
                                             error=err))
        return out

    runs = _fan_out(one, repeat_seeds(seed, cfg["repeats"]))
    return runs, aggregate(runs, ["sampler", "subset_size", "metric_name"])


def _run_nystrom_error(cfg, seed):
    def one(rep, s):
        rng = np.random.default_rng(s)
        ds = _dataset(cfg, int(rng.integers(2**32)))
        (full,) = data.standardize_split(ds, (1.0,), int(rng.integers(2**32)))
        kern = KernelSpec("gaussian", bandwidth_sq=_bandwidth(cfg, full.X))
        nnp = build_nnp(full.X, kern, BasisSpec("constant_linear"))
        model = dpp.build_ensemble(nnp, 1.0)
        out = []
        for k in cfg["subset_sizes"]:
            for sampler in cfg["samplers"]:
                C = draw_landmarks(sampler, model, k, rng)
                try:
                    val, err = nystrom_relative_error(nnp, projected_nystrom(nnp, C)), None
                except DetregError as exc:
                    val, err = math.nan, str(exc)
                out.append(_landmark_records("nystrom_error", s, rep, k, sampler,
                                             "relative_nystrom_error", val, error=err))
        return out

    runs = _fan_out(one, repeat_seeds(seed, cfg["repeats"]))
    return runs, aggregate(runs, ["sampler", "subset_size", "metric_name"])


def _system_specs(ds):
    kern_coords = tuple(ds.meta["kernel_coords"])
    basis = BasisSpec("constant_linear", active_coords=tuple(ds.meta["basis_coords"]))
    return kern_coords, basis


def _select_sigma_gamma(train, val, kern_coords, basis, sigmas, gammas):
    best = (math.inf, None, None)
    for sig in sigmas:
        kern = KernelSpec("projected_gaussian", bandwidth_sq=sig * sig, active_coords=kern_coords)
        nnp = build_nnp(train.X, kern, basis)
        Kv, Vv = kern(val.X, train.X), basis(val.X)
        for g, (alpha, beta) in zip(gammas, fit_full_path(nnp, train.y, gammas)):
            e = _mse(Kv @ alpha + Vv @ beta, val.y)
            if e < best[0]:
                best = (e, sig, g)
    return best[1], best[2]


def _run_timeseries(cfg, seed):
    def one(rep, s):
        rng = np.random.default_rng(s)
        out = []
        for sid in cfg["systems"]:
            ds = data.gen_system(sid, cfg["n"], int(rng.integers(2**32)), cfg["noise_var"])
            train, val, test = data.standardize_split(ds, (0.5, 0.25, 0.25), int(rng.integers(2**32)),
                                                      standardize=False)
            kern_coords, basis = _system_specs(ds)
            sig, g = _select_sigma_gamma(train, val, kern_coords, basis, cfg["sigmas"], cfg["gammas"])
            kern = KernelSpec("projected_gaussian", bandwidth_sq=sig * sig, active_coords=kern_coords)
            nnp = build_nnp(train.X, kern, basis)
            model = dpp.build_ensemble(nnp, nnp.n * g)
            true = np.asarray(ds.meta["true_coefficients"])
            for k in cfg["subset_sizes"]:
                for sampler in cfg["samplers"]:
                    C = draw_landmarks(sampler, model, k, rng)
                    common = {"system": sid, "sigma": sig, "gamma": g}
                    try:
                        fit = fit_nystrom(nnp, train.y, g, C)
                        par, pred, err = _mse(fit.beta, true), _mse(predict(fit, test.X), test.y), None
                    except DetregError as exc:
                        par = pred = math.nan
                        err = str(exc)
                    out.append(_landmark_records("timeseries", s, rep, k, sampler,
                                                 "parameter_identification_error", par, error=err, **common))
                    out.append(_landmark_records("timeseries", s, rep, k, sampler, "prediction_error",
                                                 pred, error=err, **common))
        return out

    runs = _fan_out(one, repeat_seeds(seed, cfg["repeats"]))
    return runs, aggregate(runs, ["system", "sampler", "subset_size", "metric_name"])


def _run_precond(cfg, seed):
    def one(rep, s):
        rng = np.random.default_rng(s)
        ds = _dataset(cfg, int(rng.integers(2**32)))
        (full,) = data.standardize_split(ds, (1.0,), int(rng.integers(2**32)))
        kern = KernelSpec("gaussian", bandwidth_sq=cfg["sigma"] ** 2)
        nnp = build_nnp(full.X, kern, BasisSpec("constant_linear"))
        model = dpp.build_ensemble(nnp, cfg["lambda"])
        k = cfg["subset_size"] or int(round(model.marginal_probabilities.sum()))
        out = []
        for sampler in cfg["samplers"]:
            C = draw_landmarks(sampler, model, k, rng)
            weights = "dpp" if sampler == "dpp" else "uniform"
            try:
                pre = build_preconditioner(model, C, cfg["gamma"], weights=weights)
                raw, cond = condition_numbers(nnp, cfg["gamma"], C, pre)
                err = None
            except (CholeskyFailure, DetregError) as exc:
                raw = cond = math.nan
                err = str(exc)
            for name, val in (("condition_number_raw", raw), ("condition_number_preconditioned", cond)):
                out.append(_landmark_records("precond", s, rep, k, sampler, name, val, error=err))
        return out

    runs = _fan_out(one, repeat_seeds(seed, cfg["repeats"]))
    return runs, aggregate(runs, ["sampler", "metric_name"])


def _run_identities(cfg, seed):
    runs = []
    for rep, s in enumerate(repeat_seeds(seed, cfg["repeats"])):
        for r in verify.identity_suite(n=cfg["n"], seed=s % (2**31), lam=cfg["lambda"], gamma=cfg["gamma"],
                                          sampler_draws=cfg["sampler_draws"]):
            runs.append({"experiment": "identities", "seed": s, "repeat": rep, "sampler": "dpp",
                         "subset_size": None, "metric_name": r.label or r.identity_id,
                         "metric_value": r.max_abs_deviation, "identity_id": r.identity_id,
                         "method": r.method, "passed": r.passed, "tolerance": r.tolerance,
                         "subsets": r.samples_or_subsets})
    return runs, aggregate(runs, ["metric_name"])


RUNNERS = {
    "toy": _run_toy,
    "franke": _run_franke,
    "interp": _run_interp,
    "nystrom_error": _run_nystrom_error,
    "timeseries": _run_timeseries,
    "precond": _run_precond,
    "identities": _run_identities,
}


def run_experiment(name, config=None, seed=0):
    cfg = resolve_config(name, config)
    runs, aggs = RUNNERS[name](cfg, int(seed))
    return ExperimentResult(experiment=name, config=cfg, seed=int(seed), runs=runs, aggregates=aggs)
