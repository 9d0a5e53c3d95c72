"""Partial-projection DPPs represented as extended L-ensembles.

Subsets are tuples of strictly increasing 0-based indices. ``DPP(K/lam, V)``
has marginal kernel ``P_V + Lt (Lt + I)^{-1}`` with ``Lt = P_perp K P_perp / lam``.
"""

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from math import comb

import numpy as np

from . import linalg
from .errors import InfeasibleSize, TooLarge
from .kernels import NNP, make_nnp

# relative threshold below which an eigenvalue of Lt is treated as zero
ZERO_EIG_RTOL = 1e-12


def as_subset(C):
    return tuple(sorted(int(i) for i in C))


@dataclass(frozen=True, eq=False)
class EnsembleModel:
    nnp: NNP
    lam: float
    eigvals_tilde: np.ndarray
    eigvecs_tilde: np.ndarray
    Q_V: np.ndarray
    marginal_kernel: np.ndarray
    d_eff: float
    log_normalization: float

    @property
    def n(self):
        return self.nnp.n

    @property
    def p(self):
        return self.nnp.p

    @property
    def expected_size(self):
        return self.p + self.d_eff

    @cached_property
    def marginal_probabilities(self):
        return np.clip(np.diag(self.marginal_kernel).copy(), 0.0, 1.0)

    @cached_property
    def log_det_I_plus_L(self):
        return float(np.sum(np.log1p(self.eigvals_tilde)))

    @cached_property
    def log_det_VtV(self):
        V = self.nnp.V
        return linalg.log_det_psd(V.T @ V)

    @cached_property
    def nonzero_mask(self):
        mu = self.eigvals_tilde
        if mu.size == 0:
            return np.zeros(0, dtype=bool)
        scale = max(mu.max(), np.abs(self.nnp.K).max(initial=0.0) / self.lam)
        return mu > ZERO_EIG_RTOL * scale


def build_ensemble(nnp, lam):
    """Spectral data of ``DPP(K/lam, V)`` computed on the complement of range(V)."""
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    Q_perp = nnp.Q_perp
    M = Q_perp.T @ nnp.K_tilde @ Q_perp / lam
    mu, U = np.linalg.eigh(0.5 * (M + M.T))
    mu = np.clip(mu, 0.0, None)
    E = Q_perp @ U
    shrink = mu / (mu + 1.0)
    Q_V = nnp.Q_V
    P = Q_V @ Q_V.T + (E * shrink) @ E.T
    V = nnp.V
    log_norm = float(np.sum(np.log1p(mu))) + linalg.log_det_psd(V.T @ V)
    return EnsembleModel(
        nnp=nnp,
        lam=float(lam),
        eigvals_tilde=mu,
        eigvecs_tilde=E,
        Q_V=Q_V,
        marginal_kernel=0.5 * (P + P.T),
        d_eff=float(shrink.sum()),
        log_normalization=log_norm,
    )


def log_pmf(model, C):
    """log Pr(C) from the complement-basis form; ``-inf`` off the support."""
    C = list(as_subset(C))
    p = model.p
    if len(C) < p:
        return -np.inf
    V_C = model.nnp.V[C]
    if not linalg.is_full_column_rank(V_C):
        return -np.inf
    B = linalg.orthonormal_complement_basis(V_C)
    Xi = B.T @ model.nnp.K_tilde[np.ix_(C, C)] @ B / model.lam
    log_xi = linalg.log_det_psd(0.5 * (Xi + Xi.T))
    if not np.isfinite(log_xi):
        return -np.inf
    return log_xi - model.log_det_I_plus_L + linalg.log_det_psd(V_C.T @ V_C) - model.log_det_VtV


def pmf(model, C):
    return float(np.exp(log_pmf(model, C)))


def pmf_block(model, C):
    """Pr(C) from the block determinant of ``[[L_CC, V_C], [V_C^T, 0]]``.

    Normalized by ``(-1)^p det(I + Lt) det(V^T V)``; used as a cross-check of
    :func:`pmf`.
    """
    C = list(as_subset(C))
    L_CC = model.nnp.K[np.ix_(C, C)] / model.lam
    num = np.linalg.det(linalg.saddle_matrix(L_CC, model.nnp.V[C]))
    sign = (-1.0) ** model.p
    return float(sign * num / np.exp(model.log_normalization))


def normalization_block(model):
    """``det([[L + I, V], [V^T, 0]])`` for ``L = K / lam``."""
    n = model.n
    L = model.nnp.K / model.lam
    return float(np.linalg.det(linalg.saddle_matrix(L + np.eye(n), model.nnp.V)))


@dataclass
class PmfTable:
    """Exact distribution over all subsets of ``range(n)``."""

    n: int
    entries: dict

    def total(self):
        return float(sum(self.entries.values()))

    def support(self):
        return {C: w for C, w in self.entries.items() if w > 0}

    def expected_size(self):
        return float(sum(len(C) * w for C, w in self.entries.items()))

    def inclusion_probabilities(self):
        out = np.zeros(self.n)
        for C, w in self.entries.items():
            out[list(C)] += w
        return out

    def size_slice(self, k):
        """Distribution conditioned on ``|C| = k``."""
        part = {C: w for C, w in self.entries.items() if len(C) == k}
        z = sum(part.values())
        if z <= 0:
            raise InfeasibleSize(f"size {k} has zero probability")
        return PmfTable(self.n, {C: w / z for C, w in part.items()})

    def expectation(self, fn):
        """Sum of ``pmf(C) * fn(C)`` over the support (``fn`` may return None to skip)."""
        acc = None
        for C, w in self.entries.items():
            if w <= 0:
                continue
            val = fn(C)
            if val is None:
                continue
            acc = w * np.asarray(val, dtype=float) if acc is None else acc + w * np.asarray(val, dtype=float)
        return acc


def all_subsets(n):
    for k in range(n + 1):
        yield from combinations(range(n), k)


def enumerate_distribution(model, max_n=14):
    if model.n > max_n:
        raise TooLarge(f"n={model.n} exceeds enumeration limit {max_n}")
    return PmfTable(model.n, {C: pmf(model, C) for C in all_subsets(model.n)})


def _draw_index(weights, rng):
    cdf = np.cumsum(weights)
    i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(i, len(weights) - 1)


def sample_projection(Y, rng):
    """Sample the projection DPP whose kernel is ``Y Y^T`` (orthonormal columns).

    Chain-rule sampler: each pick is drawn from the residual diagonal of the
    kernel after conditioning on previous picks.
    """
    n, r = Y.shape
    if r == 0:
        return ()
    resid = np.einsum("ij,ij->i", Y, Y)
    basis = np.zeros((r, r))
    picked = []
    for t in range(r):
        w = np.clip(resid, 0.0, None)
        w[picked] = 0.0
        i = _draw_index(w, rng)
        picked.append(i)
        v = Y[i] - basis[:t].T @ (basis[:t] @ Y[i])
        v /= np.linalg.norm(v)
        basis[t] = v
        resid = resid - (Y @ v) ** 2
    return as_subset(picked)


def sample(model, rng):
    """Exact draw from ``DPP(K/lam, V)`` (random size, always at least p)."""
    mu = model.eigvals_tilde
    keep = model.nonzero_mask & (rng.random(mu.size) < mu / (mu + 1.0))
    Y = np.column_stack([model.Q_V, model.eigvecs_tilde[:, keep]])
    return sample_projection(Y, rng)


def _log_esp_table(mu, k):
    """``table[j, i] = log e_j(mu[:i])`` for j <= k."""
    m = mu.size
    table = np.full((k + 1, m + 1), -np.inf)
    table[0, :] = 0.0
    log_mu = np.log(mu)
    for i in range(1, m + 1):
        table[1:, i] = np.logaddexp(table[1:, i - 1], log_mu[i - 1] + table[:-1, i - 1])
    return table


def log_elementary_symmetric(mu, k):
    """``log e_k(mu)``."""
    mu = np.asarray(mu, dtype=float)
    return float(_log_esp_table(mu, k)[k, mu.size])


def _select_eigen_directions(mu, k, rng):
    table = _log_esp_table(mu, k)
    log_mu = np.log(mu)
    chosen = []
    j = k
    for i in range(mu.size, 0, -1):
        if j == 0:
            break
        logp = log_mu[i - 1] + table[j - 1, i - 1] - table[j, i]
        if rng.random() < np.exp(logp):
            chosen.append(i - 1)
            j -= 1
    return chosen


def sample_fixed_size(model, k, rng):
    """Draw from ``DPP(K/lam, V)`` conditioned on ``|C| = k``."""
    p, n = model.p, model.n
    if k < p or k > n:
        raise InfeasibleSize(f"k={k} outside [{p}, {n}]")
    idx = np.flatnonzero(model.nonzero_mask)
    if k - p > idx.size:
        raise InfeasibleSize(f"k - p = {k - p} exceeds the {idx.size} nonzero kernel eigenvalues")
    chosen = idx[_select_eigen_directions(model.eigvals_tilde[idx], k - p, rng)] if k > p else idx[:0]
    Y = np.column_stack([model.Q_V, model.eigvecs_tilde[:, chosen]])
    return sample_projection(Y, rng)


def volume_sample(V, k, rng):
    """Volume sampling of a size-``k`` subset: ``Pr(C) ∝ det(V_C^T V_C)``.

    A size-p projection-DPP draw on range(V) completed by ``k - p`` items
    chosen uniformly from the rest (exact by Cauchy-Binet).
    """
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    n, p = V.shape
    if k < p or k > n:
        raise InfeasibleSize(f"k={k} outside [{p}, {n}]")
    C0 = sample_projection(linalg.orthonormal_basis(V), rng)
    free = np.ones(n, dtype=bool)
    free[list(C0)] = False
    extra = rng.choice(np.flatnonzero(free), size=k - p, replace=False) if k > p else []
    return as_subset(list(C0) + list(extra))


def sample_volume_bernoulli(V, t, rng):
    """Two-stage draw from ``DPP(t I, V)``: size-p volume sample, then Bernoulli(t/(1+t))."""
    if not t > 0:
        raise ValueError(f"t must be > 0, got {t}")
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    n, p = V.shape
    C0 = volume_sample(V, p, rng)
    free = np.ones(n, dtype=bool)
    free[list(C0)] = False
    q = t / (1.0 + t)
    extra = np.flatnonzero(free & (rng.random(n) < q))
    return as_subset(list(C0) + list(extra))


def volume_pmf(V, C):
    """Closed-form volume-sampling probability of ``C`` among subsets of size ``|C|``."""
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    n, p = V.shape
    C = list(as_subset(C))
    k = len(C)
    if k < p:
        return 0.0
    V_C = V[C]
    return float(np.linalg.det(V_C.T @ V_C) / (comb(n - p, k - p) * np.linalg.det(V.T @ V)))


def volume_bernoulli_pmf(V, t, C):
    """Closed form ``q^(|C|-p) (1-q)^(n-|C|) det(V_C^T V_C) / det(V^T V)`` with ``q = t/(1+t)``."""
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    n, p = V.shape
    C = list(as_subset(C))
    k = len(C)
    if k < p:
        return 0.0
    q = t / (1.0 + t)
    V_C = V[C]
    vol = np.linalg.det(V_C.T @ V_C) / np.linalg.det(V.T @ V)
    return float(q ** (k - p) * (1.0 - q) ** (n - k) * vol)


def volume_bernoulli_model(V, t):
    """``DPP(t I, V)`` as an ensemble model (``K = I``, ``lam = 1/t``)."""
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    return build_ensemble(make_nnp(np.eye(V.shape[0]), V), 1.0 / t)


def uniform_subset(n, k, rng):
    if k < 0 or k > n:
        raise InfeasibleSize(f"k={k} outside [0, {n}]")
    return as_subset(rng.choice(n, size=k, replace=False))
