"""Datasets: CSV ingestion, seeded splits with standardization, synthetic generators."""

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateFeature, MissingTarget, NonFiniteValue, ParseError


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: list
    standardized: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]


def load_csv(path, target_column):
    """Read a headered CSV of finite decimals; X is every non-target column in file order."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file: header required", line=1) from None
        header = [h.strip() for h in header]
        if target_column not in header:
            raise MissingTarget(f"target column {target_column!r} not in header {header}")
        rows = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=line)
            vals = []
            for col, cell in enumerate(row, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(f"cannot parse {cell!r} as a number", line=line, column=col) from None
                if not math.isfinite(v):
                    raise NonFiniteValue(f"non-finite value {cell!r}", line=line, column=col)
                vals.append(v)
            rows.append(vals)
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    t = header.index(target_column)
    keep = [j for j in range(len(header)) if j != t]
    return Dataset(X=data[:, keep], y=data[:, t], feature_names=[header[j] for j in keep],
                   meta={"source": str(path), "target": target_column})


def write_csv(ds, path, target_column="y"):
    """Write features then target with shortest round-trip float formatting."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(ds.feature_names) + [target_column])
        for xi, yi in zip(ds.X, ds.y):
            w.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])


def split_sizes(n, fractions):
    bounds = np.rint(np.cumsum(fractions) * n).astype(int)
    bounds[-1] = n
    return np.diff(np.concatenate([[0], bounds]))


def standardize_split(ds, fractions, seed, standardize=True, standardize_target=True):
    """Seeded permutation split; statistics come from the first (training) part only."""
    fractions = np.asarray(fractions, dtype=float)
    if np.any(fractions < 0) or abs(fractions.sum() - 1.0) > 1e-9:
        raise ValueError(f"fractions must be non-negative and sum to 1, got {fractions.tolist()}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(ds.n)
    sizes = split_sizes(ds.n, fractions)
    parts = np.split(perm, np.cumsum(sizes)[:-1])
    train = parts[0]
    x_mean = np.zeros(ds.d)
    x_std = np.ones(ds.d)
    y_mean, y_std = 0.0, 1.0
    if standardize:
        x_mean = ds.X[train].mean(axis=0)
        x_std = ds.X[train].std(axis=0)
        bad = [ds.feature_names[j] for j in np.flatnonzero(x_std == 0)]
        if bad:
            raise DegenerateFeature(f"zero-variance features in the training part: {bad}")
        if standardize_target:
            y_mean = float(ds.y[train].mean())
            y_std = float(ds.y[train].std())
            if y_std == 0:
                raise DegenerateFeature("target has zero variance in the training part")
    stats = {"x_mean": x_mean.tolist(), "x_std": x_std.tolist(), "y_mean": y_mean, "y_std": y_std}
    out = []
    for idx in parts:
        out.append(replace(
            ds,
            X=(ds.X[idx] - x_mean) / x_std,
            y=(ds.y[idx] - y_mean) / y_std,
            standardized=bool(standardize),
            meta={**ds.meta, "standardization": stats, "indices": idx.tolist()},
        ))
    return out


def toy_function(x):
    x = np.asarray(x, dtype=float)
    return x + 7.0 + 4.0 * np.exp(-(x - 4.0) ** 2) - 4.0 * np.exp(-(x + 4.0) ** 2)


def gen_toy(n, noise_var=0.2, seed=0, low=-10.0, high=10.0):
    """Linear trend with two Gaussian bumps; noise is N(0, noise_var) (a variance)."""
    if n < 2:
        raise ValueError("gen_toy needs n >= 2")
    rng = np.random.default_rng(seed)
    x = rng.uniform(low, high, size=n)
    y = toy_function(x) + rng.normal(0.0, math.sqrt(noise_var), size=n)
    return Dataset(X=x[:, None], y=y, feature_names=["x"],
                   meta={"generator": "toy", "noise_var": noise_var, "interval": [low, high]})


def franke(X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    a, b = 9.0 * X[:, 0], 9.0 * X[:, 1]
    return (0.75 * np.exp(-((a - 2) ** 2) / 4 - ((b - 2) ** 2) / 4)
            + 0.75 * np.exp(-((a + 1) ** 2) / 49 - (b + 1) / 10)
            + 0.5 * np.exp(-((a - 7) ** 2) / 4 - ((b - 3) ** 2) / 4)
            - 0.2 * np.exp(-((a - 4) ** 2) - (b - 7) ** 2))


def gen_franke(n, seed=0):
    """Uniform points on the unit square with noiseless Franke values."""
    if n < 1:
        raise ValueError("gen_franke needs n >= 1")
    rng = np.random.default_rng(seed)
    X = rng.random((n, 2))
    return Dataset(X=X, y=franke(X), feature_names=["x1", "x2"], meta={"generator": "franke"})


def sinc(x):
    """Unnormalized ``sin(x)/x`` with ``sinc(0) = 1``."""
    return np.sinc(np.asarray(x, dtype=float) / np.pi)


# coefficients and encodings of the three dynamical systems; true coefficients
# are listed in the order of the basis [linear coordinates..., 1]
SYSTEMS = {
    1: {"features": ["z", "x1", "x2"], "basis_coords": (0,), "kernel_coords": (1, 2),
        "a": (0.4, 0.2)},
    2: {"features": ["x1", "x2", "y_lag1", "y_lag2"], "basis_coords": (2, 3), "kernel_coords": (0, 1),
        "a": (0.3, 0.2, 0.1)},
    3: {"features": ["u_lag1", "u_lag2", "y_lag1", "y_lag2"], "basis_coords": (2, 3),
        "kernel_coords": (0, 1), "a": (0.6, 0.4, 0.2), "b": (0.7, 0.6)},
}


def gen_system(system_id, n, seed=0, noise_var=0.05):
    """Input/output pairs of System 1, 2 or 3 packed as regression features.

    Input variances: x1, x2 ~ N(0, 2); z ~ N(0, 2.5); u ~ N(0, 4). Lags before
    the first step are zero.
    """
    if system_id not in SYSTEMS:
        raise ValueError(f"unknown system {system_id}")
    if n < 3:
        raise ValueError("gen_system needs n >= 3")
    spec = SYSTEMS[system_id]
    rng = np.random.default_rng(seed)
    eps = rng.normal(0.0, math.sqrt(noise_var), size=n)
    a = spec["a"]
    if system_id == 1:
        z = rng.normal(0.0, math.sqrt(2.5), size=n)
        x1 = rng.normal(0.0, math.sqrt(2.0), size=n)
        x2 = rng.normal(0.0, math.sqrt(2.0), size=n)
        y = a[1] * z + a[0] + sinc(x1 + x2) + eps
        X = np.column_stack([z, x1, x2])
        true = [a[1], a[0]]
    elif system_id == 2:
        x1 = rng.normal(0.0, math.sqrt(2.0), size=n)
        x2 = rng.normal(0.0, math.sqrt(2.0), size=n)
        y = np.zeros(n)
        lag1 = np.zeros(n)
        lag2 = np.zeros(n)
        prev1 = prev2 = 0.0
        for t in range(n):
            lag1[t], lag2[t] = prev1, prev2
            y[t] = a[0] + a[1] * prev1 + a[2] * prev2 + 2.0 * sinc(x1[t] + x2[t]) + eps[t]
            prev1, prev2 = y[t], prev1
        X = np.column_stack([x1, x2, lag1, lag2])
        true = [a[1], a[2], a[0]]
    else:
        b = spec["b"]
        u = rng.normal(0.0, 2.0, size=n)
        u_lag1 = np.concatenate([[0.0], u[:-1]])
        u_lag2 = np.concatenate([[0.0, 0.0], u[:-2]])
        y = np.zeros(n)
        lag1 = np.zeros(n)
        lag2 = np.zeros(n)
        prev1 = prev2 = 0.0
        for t in range(n):
            lag1[t], lag2[t] = prev1, prev2
            y[t] = (a[0] + a[1] * prev1 + a[2] * prev2
                    + b[0] * sinc(u_lag1[t]) + b[1] * sinc(u_lag2[t]) + eps[t])
            prev1, prev2 = y[t], prev1
        X = np.column_stack([u_lag1, u_lag2, lag1, lag2])
        true = [a[1], a[2], a[0]]
    meta = {
        "generator": f"system{system_id}",
        "noise_var": noise_var,
        "sinc": "unnormalized sin(x)/x",
        "true_coefficients": true,
        "basis_coords": list(spec["basis_coords"]),
        "kernel_coords": list(spec["kernel_coords"]),
    }
    return Dataset(X=X, y=y, feature_names=list(spec["features"]), meta=meta)
