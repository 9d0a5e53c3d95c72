"""Exact-enumeration and Monte-Carlo checks of the expectation identities.

Expectations are taken over the support of the DPP only (subsets with
``pmf(C) = 0`` are skipped). Enumeration is exact up to rounding; Monte-Carlo
uses a 4-sigma band and reports failures as inconclusive.

Several identities are stated for arbitrary bilinear probes but, for the
bottom-right (parametric x parametric) block, the determinant-lemma argument
behind them also counts subsets of size ``p - 1``. Those subsets carry no
probability, so the stated right-hand sides are off by
``-(1/N) sum_{pmf(C)=0} adj([[L_CC, V_C], [V_C^T, 0]])``. The ``*_corrected``
checks include that term; the plain checks test the identities as stated.
"""

from dataclasses import asdict, dataclass, field
from itertools import combinations

import numpy as np
from scipy import stats

from . import dpp, linalg
from .errors import TooLargeForEnumeration, ZeroFullRisk
from .kernels import BasisSpec, KernelSpec, build_nnp, projected_gaussian_kernel_matrix
from .nystrom import projected_nystrom_matrix
from .regression import (
    fit_full,
    fit_subset_interpolator,
    full_estimator_matrix,
    gaussian_risk,
    nystrom_estimator_matrix,
)

ENUM_TOL = 1e-8
NORMALIZATION_TOL = 1e-10
EIG_TOL = 1e-9
AUTO_ENUM_N = 8
ENUM_LIMIT = 10
MC_DRAWS = 100_000
MC_SIGMAS = 4.0
CHI2_ALPHA = 1e-3
CHI2_MIN_EXPECTED = 5.0
SAMPLER_DRAWS = 100_000
PSD_TOL = 1e-10

IDENTITY_IDS = (
    "thm31", "prop51_id0", "prop51_id1", "prop51_id2", "cor56", "cor57", "cor42",
    "eq12_lensemble", "eq57_proj", "eq58_unbiased", "eq58_second_moment",
    "eq510_variance", "thm59_bound", "eq53_pmf", "sampler_two_stage", "sampler_spectral",
    "sampler_fixed_size", "prop510_psd",
)


@dataclass
class IdentityReport:
    identity_id: str
    method: str
    max_abs_deviation: float
    samples_or_subsets: int
    passed: bool
    tolerance: float
    conclusive: bool = True
    label: str = ""
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def line(self):
        status = "PASS" if self.passed else ("FAIL" if self.conclusive else "INCONCLUSIVE")
        name = self.label or self.identity_id
        return (f"{status:12s} {name:32s} {self.method:11s} "
                f"dev={self.max_abs_deviation:.3e} tol={self.tolerance:.1e} n={self.samples_or_subsets}")


def resolve_method(mode, n, limit=AUTO_ENUM_N):
    if mode == "auto":
        return "enumeration" if n <= AUTO_ENUM_N else "monte_carlo"
    if mode == "enumeration":
        if n > limit:
            raise TooLargeForEnumeration(f"n={n} exceeds the enumeration limit {limit}")
        return mode
    if mode == "monte_carlo":
        return mode
    raise ValueError(f"unknown mode {mode!r}")


def expectation(model, fn, method="enumeration", n_draws=MC_DRAWS, seed=0):
    """Expectations of the arrays returned by ``fn(C)`` (a tuple) under ``model``.

    Returns ``(means, standard_errors, count)``; standard errors are None for
    enumeration.
    """
    if method == "enumeration":
        table = dpp.enumerate_distribution(model, max_n=max(ENUM_LIMIT, model.n))
        acc, count = None, 0
        for C, w in table.entries.items():
            if w <= 0:
                continue
            vals = [w * np.asarray(v, dtype=float) for v in fn(C)]
            acc = vals if acc is None else [a + v for a, v in zip(acc, vals)]
            count += 1
        return acc, None, count
    rng = np.random.default_rng(seed)
    s1 = s2 = None
    for _ in range(n_draws):
        vals = [np.asarray(v, dtype=float) for v in fn(dpp.sample(model, rng))]
        if s1 is None:
            s1 = [v.copy() for v in vals]
            s2 = [v * v for v in vals]
        else:
            for a, b, v in zip(s1, s2, vals):
                a += v
                b += v * v
    means = [a / n_draws for a in s1]
    ses = [np.sqrt(np.clip(b / n_draws - m * m, 0.0, None) / n_draws) for b, m in zip(s2, means)]
    return means, ses, n_draws


def compare(identity_id, method, lhs, rhs, count, tol=ENUM_TOL, se=None, label="", **extras):
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    dev = float(np.abs(lhs - rhs).max(initial=0.0))
    if method == "enumeration" or se is None:
        return IdentityReport(identity_id, method, dev, count, dev <= tol, tol, True, label, extras)
    band = float(MC_SIGMAS * np.asarray(se).max(initial=0.0) + tol)
    ok = dev <= band
    return IdentityReport(identity_id, method, dev, count, ok, band, ok, label, extras)


def _idx(C):
    return list(C)


def embed_saddle_inverse(K, V, C):
    """``(n+p) x (n+p)`` embedding of ``[[K_CC, V_C], [V_C^T, 0]]^{-1}``."""
    n, p = V.shape
    idx = _idx(C)
    M = linalg.saddle_matrix(K[np.ix_(idx, idx)], V[idx])
    out = np.zeros((n + p, n + p))
    full = idx + list(range(n, n + p))
    out[np.ix_(full, full)] = np.linalg.inv(M)
    return out


def bottom_block_correction(nnp, lam=1.0):
    """``-(1/N) sum_{pmf(C)=0, |C|>=p-1} adj(saddle(L_CC, V_C))`` embedded, with ``L = K/lam``.

    Adding this to ``saddle(L + I, V)^{-1}`` gives the exact expectation of the
    embedded subset inverses; only the parametric block is nonzero generically.
    """
    n, p = nnp.n, nnp.p
    L = nnp.K / lam
    V = nnp.V
    N = np.linalg.det(linalg.saddle_matrix(L + np.eye(n), V))
    out = np.zeros((n + p, n + p))
    for k in range(max(p - 1, 0), n + 1):
        for C in combinations(range(n), k):
            idx = list(C)
            if k >= p and linalg.is_full_column_rank(V[idx]):
                continue
            adj = linalg.adjugate(linalg.saddle_matrix(L[np.ix_(idx, idx)], V[idx]))
            full = idx + list(range(n, n + p))
            out[np.ix_(full, full)] -= adj / N
    return out


def _probe_matrix(a0, a1):
    a0 = np.asarray(a0, dtype=float)
    a1 = np.asarray(a1, dtype=float)
    if a0.ndim == 1:
        a0 = a0[:, None]
    if a1.ndim == 1:
        a1 = a1.reshape(-1, 1) if a1.size else np.zeros((0, a0.shape[1]))
    return np.vstack([a0, a1])


def check_thm31(nnp, u0, u1, v0, v1, mode="auto", n_draws=MC_DRAWS, seed=0, corrected=False):
    """``E[[u0_C; u1]^T [[K_CC, V_C], [V_C^T, 0]]^{-1} [v0_C; v1]]`` over ``DPP(K, V)``
    against ``[u0; u1]^T [[K + I, V], [V^T, 0]]^{-1} [v0; v1]``.

    Probes may be matrices (one probe per column); all cross pairs are compared.
    """
    method = resolve_method(mode, nnp.n, ENUM_LIMIT)
    model = dpp.build_ensemble(nnp, 1.0)
    U, W = _probe_matrix(u0, u1), _probe_matrix(v0, v1)
    K, V = nnp.K, nnp.V
    (lhs,), se, count = expectation(model, lambda C: (U.T @ embed_saddle_inverse(K, V, C) @ W,),
                                    method, n_draws, seed)
    full = np.linalg.inv(linalg.saddle_matrix(K + np.eye(nnp.n), V))
    if corrected:
        full = full + bottom_block_correction(nnp, 1.0)
    rhs = U.T @ full @ W
    return compare("thm31", method, lhs, rhs, count, se=None if se is None else se[0],
                   label="thm31_corrected" if corrected else "thm31")


def subset_pinv_terms(nnp, C):
    """``I(C) = C B (B^T K_CC B)^{-1} B^T C^T`` (zero when ``|C| = p``) and ``(C V_C)^+``."""
    n, p = nnp.n, nnp.p
    idx = _idx(C)
    V_C = nnp.V[idx]
    I_C = np.zeros((n, n))
    if len(idx) > p:
        B = linalg.orthonormal_complement_basis(V_C)
        Xi = B.T @ nnp.K[np.ix_(idx, idx)] @ B
        I_C[np.ix_(idx, idx)] = B @ np.linalg.solve(Xi, B.T)
    CVp = np.zeros((p, n))
    CVp[:, idx] = linalg.pinv(V_C)
    return I_C, CVp


def projected_resolvent(nnp, lam):
    """``(K_tilde + lam P_perp)^+ = P_perp (K_tilde + lam I)^{-1} P_perp``."""
    n = nnp.n
    P = nnp.P_perp
    return P @ np.linalg.solve(nnp.K_tilde + lam * np.eye(n), P)


def check_prop51(nnp, lam, mode="auto", n_draws=MC_DRAWS, seed=0):
    """Three reports: ``E[I(C)]``, ``E[(CV_C)^+ (I - K I(C))]`` and
    ``E[(CV_C)^+ (K - K I(C) K) (CV_C)^{+T}]`` over ``DPP(K/lam, V)``.
    """
    method = resolve_method(mode, nnp.n)
    model = dpp.build_ensemble(nnp, lam)
    K, n = nnp.K, nnp.n
    eye = np.eye(n)

    def terms(C):
        I_C, CVp = subset_pinv_terms(nnp, C)
        return I_C, CVp @ (eye - K @ I_C), CVp @ (K - K @ I_C @ K) @ CVp.T

    means, ses, count = expectation(model, terms, method, n_draws, seed)
    R = projected_resolvent(nnp, lam)
    Vp = nnp.V_pinv
    rhs = (R, Vp @ (eye - K @ R), Vp @ (K + lam * eye - K @ R @ K) @ Vp.T)
    ids = ("prop51_id0", "prop51_id1", "prop51_id2")
    return [compare(i, method, m, r, count, se=None if ses is None else s, label=i)
            for i, m, r, s in zip(ids, means, rhs, ses or [None] * 3)]


def check_prop51_id2_corrected(nnp, lam):
    """Third identity with the (p-1)-subset term: RHS minus ``lam`` times the parametric
    block of :func:`bottom_block_correction`.
    """
    method = resolve_method("enumeration", nnp.n)
    model = dpp.build_ensemble(nnp, lam)
    K, n, p = nnp.K, nnp.n, nnp.p

    def term(C):
        I_C, CVp = subset_pinv_terms(nnp, C)
        return (CVp @ (K - K @ I_C @ K) @ CVp.T,)

    (lhs,), _, count = expectation(model, term, method)
    Vp = nnp.V_pinv
    R = projected_resolvent(nnp, lam)
    corr = bottom_block_correction(nnp, lam)[n:, n:]
    rhs = Vp @ (K + lam * np.eye(n) - K @ R @ K) @ Vp.T - lam * corr
    return compare("prop51_id2", method, lhs, rhs, count, label="prop51_id2_corrected")


def check_eq12(K, lam, mode="auto", n_draws=MC_DRAWS, seed=0):
    """Plain L-ensemble ``DPP(K/lam)`` (no parametric part): ``E[C K_CC^{-1} C^T] = (K + lam I)^{-1}``."""
    from .kernels import make_nnp

    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    nnp = make_nnp(K, np.zeros((n, 0)))
    method = resolve_method(mode, n)
    model = dpp.build_ensemble(nnp, lam)
    (lhs,), se, count = expectation(model, lambda C: (subset_pinv_terms(nnp, C)[0],), method, n_draws, seed)
    rhs = np.linalg.inv(K + lam * np.eye(n))
    return compare("eq12_lensemble", method, lhs, rhs, count,
                   se=None if se is None else se[0], label="eq12_lensemble")


def check_cor56_cor57(nnp, lam, mode="auto", n_draws=MC_DRAWS, seed=0):
    """Four reports: expected projected-Nyström error and the three unprojected identities."""
    method = resolve_method(mode, nnp.n)
    model = dpp.build_ensemble(nnp, lam)
    K, Kt, n = nnp.K, nnp.K_tilde, nnp.n

    def terms(C):
        I_C, CVp = subset_pinv_terms(nnp, C)
        D = K - K @ I_C @ K
        return Kt - projected_nystrom_matrix(nnp, C), D, CVp @ D, CVp @ D @ CVp.T

    means, ses, count = expectation(model, terms, method, n_draws, seed)
    Vp = nnp.V_pinv
    R = projected_resolvent(nnp, lam)
    EKL = K - K @ R @ K
    rhs = (
        lam * Kt @ np.linalg.inv(Kt + lam * np.eye(n)),
        EKL,
        Vp @ EKL,
        lam * Vp @ Vp.T + Vp @ EKL @ Vp.T,
    )
    labels = ("cor56", "cor57_line1", "cor57_line2", "cor57_line3")
    ids = ("cor56", "cor57", "cor57", "cor57")
    return [compare(i, method, m, r, count, se=None if ses is None else s, label=lb)
            for i, lb, m, r, s in zip(ids, labels, means, rhs, ses or [None] * 4)]


def check_nystrom_ordering(nnp, lam, tol=EIG_TOL):
    """``0 <= Lt(C) <= K_tilde`` in the Loewner order for every support subset."""
    model = dpp.build_ensemble(nnp, lam)
    table = dpp.enumerate_distribution(model, max_n=max(ENUM_LIMIT, nnp.n))
    worst, count = 0.0, 0
    for C, w in table.entries.items():
        if w <= 0:
            continue
        L = projected_nystrom_matrix(nnp, C)
        lo = min(np.linalg.eigvalsh(L).min(), np.linalg.eigvalsh(nnp.K_tilde - L).min())
        worst = min(worst, float(lo))
        count += 1
    return IdentityReport("cor56", "enumeration", -worst, count, -worst <= tol, tol, True, "cor56_ordering")


def _random_design_terms(V):
    n, p = V.shape

    def terms(C):
        idx = _idx(C)
        V_C = V[idx]
        Vp_C = linalg.pinv(V_C)
        proj = np.zeros((n, n))
        proj[np.ix_(idx, idx)] = V_C @ Vp_C
        CVp = np.zeros((p, n))
        CVp[:, idx] = Vp_C
        return proj, CVp, np.linalg.inv(V_C.T @ V_C)

    return terms


def random_design_second_moment_factor(n, p, t):
    """Exact factor ``c`` with ``E[(V_C^T V_C)^{-1}] = c (V^T V)^{-1}`` under ``DPP(t I, V)``:
    ``c = (1 - (1 - q)^(n - p + 1)) / q`` with ``q = t / (1 + t)``.
    """
    q = t / (1.0 + t)
    return float(-np.expm1((n - p + 1) * np.log1p(-q)) / q)


def check_random_design(V, t, mode="auto", n_draws=MC_DRAWS, seed=0, corrected=False):
    """Four reports for ``DPP(t I, V)``: projector, unbiasedness, second moment, variance.

    ``corrected=True`` replaces the stated factor ``(n - p)/(E|C| - p)`` by the
    exact one from :func:`random_design_second_moment_factor`, and the stated
    projector expectation ``V V^+`` by ``Diag(P) - q P_perp`` (``P`` the marginal
    kernel): ``E[C C^T]`` is only the diagonal of ``P``.
    """
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    n, p = V.shape
    method = resolve_method(mode, n, ENUM_LIMIT)
    model = dpp.volume_bernoulli_model(V, t)
    means, ses, count = expectation(model, _random_design_terms(V), method, n_draws, seed)
    Vp = linalg.pinv(V)
    G = np.linalg.inv(V.T @ V)
    size = model.expected_size
    factor = random_design_second_moment_factor(n, p, t) if corrected else (n - p) / (size - p)
    var_lhs = means[2] - means[1] @ means[1].T
    if corrected:
        q = t / (1.0 + t)
        proj = np.diag(np.diag(model.marginal_kernel)) - q * linalg.complement_projector(V)
        rhs = (proj, Vp, factor * G, (factor - 1.0) * G)
    else:
        rhs = (V @ Vp, Vp, factor * G, (n - size) / (size - p) * G)
    ids = ("eq57_proj", "eq58_unbiased", "eq58_second_moment", "eq510_variance")
    lhs = (means[0], means[1], means[2], var_lhs)
    sesl = [None] * 4 if ses is None else [ses[0], ses[1], ses[2], ses[2]]
    suffix = "_corrected" if corrected else ""
    return [compare(i, method, m, r, count, se=s, label=i + (suffix if i != "eq58_unbiased" else ""))
            for i, m, r, s in zip(ids, lhs, rhs, sesl)]


def check_cor42(nnp, y, gamma, X_probe=None, *, probe_kernel=None, probe_basis=None, mode="auto",
                n_draws=MC_DRAWS, seed=0):
    """Average of subset interpolators over ``DPP(K/(n gamma), V)`` equals the ``gamma``-regressor.

    Probe rows come from ``X_probe`` (needs kernel/basis metadata) or explicit
    ``probe_kernel`` (m x n) and ``probe_basis`` (m x p) matrices.
    """
    if probe_kernel is None:
        probe_kernel = nnp.kernel(X_probe, nnp.X)
        probe_basis = nnp.basis(X_probe)
    method = resolve_method(mode, nnp.n)
    n = nnp.n
    model = dpp.build_ensemble(nnp, n * gamma)

    def interp(C):
        fit = fit_subset_interpolator(nnp, y, C)
        return (probe_kernel[:, list(C)] @ fit.alpha + probe_basis @ fit.beta,)

    (lhs,), se, count = expectation(model, interp, method, n_draws, seed)
    full = fit_full(nnp, y, gamma)
    rhs = probe_kernel @ full.alpha + probe_basis @ full.beta
    return compare("cor42", method, lhs, rhs, count, se=None if se is None else se[0], label="cor42")


def check_risk_bound(nnp, z_true, sigma_sq, gamma, lam, mode="auto", n_draws=MC_DRAWS, seed=0, slack=ENUM_TOL):
    """``E_C sqrt(R(z_N) / R(z)) <= 1 + (lam / (n gamma)) d_eff`` with exact Gaussian risks."""
    method = resolve_method(mode, nnp.n)
    model = dpp.build_ensemble(nnp, lam)
    z_true = np.asarray(z_true, dtype=float)
    R_full = gaussian_risk(full_estimator_matrix(nnp, gamma), z_true, sigma_sq)
    if R_full <= 0:
        raise ZeroFullRisk("full-estimator risk is zero")

    def ratio(C):
        return (np.sqrt(gaussian_risk(nystrom_estimator_matrix(nnp, gamma, C), z_true, sigma_sq) / R_full),)

    (lhs,), se, count = expectation(model, ratio, method, n_draws, seed)
    bound = 1.0 + lam / (nnp.n * gamma) * model.d_eff
    lhs = float(lhs)
    excess = max(0.0, lhs - bound)
    tol = slack if se is None else slack + MC_SIGMAS * float(se[0])
    ok = excess <= tol
    return IdentityReport("thm59_bound", method, excess, count, ok, tol, method == "enumeration" or ok,
                          "thm59_bound", {"expected_ratio": lhs, "bound": bound, "slack": bound - lhs})


def check_normalization(model, tol=NORMALIZATION_TOL):
    """Total mass of the enumerated pmf and agreement with the block-determinant normalization."""
    table = dpp.enumerate_distribution(model, max_n=max(ENUM_LIMIT, model.n))
    dev = abs(table.total() - 1.0)
    block = dpp.normalization_block(model)
    product = (-1.0) ** model.p * np.exp(model.log_normalization)
    rel = abs(block - product) / abs(product)
    return IdentityReport("normalization", "enumeration", dev, 2 ** model.n, dev <= tol, tol, True,
                          "normalization", {"block_vs_product_rel": float(rel)})


def check_marginals(model, tol=1e-9):
    table = dpp.enumerate_distribution(model, max_n=max(ENUM_LIMIT, model.n))
    incl = table.inclusion_probabilities()
    dev = float(np.abs(incl - np.diag(model.marginal_kernel)).max())
    size_dev = abs(table.expected_size() - model.expected_size)
    worst = max(dev, size_dev)
    return IdentityReport("marginals", "enumeration", worst, 2 ** model.n, worst <= tol, tol, True,
                          "marginals", {"inclusion_dev": dev, "expected_size_dev": size_dev})


def chi_square_sampler(identity_id, draw, probabilities, n_draws=SAMPLER_DRAWS, seed=0, alpha=CHI2_ALPHA):
    """Chi-square goodness of fit of ``draw(rng)`` against ``probabilities`` (subset -> mass).

    Cells with expected count below 5 are pooled. Any draw outside the
    support fails the check outright.
    """
    rng = np.random.default_rng(seed)
    support = {C: w for C, w in probabilities.items() if w > 0}
    counts = dict.fromkeys(support, 0)
    stray = 0
    for _ in range(n_draws):
        C = dpp.as_subset(draw(rng))
        if C in counts:
            counts[C] += 1
        else:
            stray += 1
    keys = sorted(support)
    probs = np.array([support[C] for C in keys])
    probs = probs / probs.sum()
    obs = np.array([counts[C] for C in keys], dtype=float)
    dev = float(np.abs(obs / n_draws - probs).max(initial=0.0))
    expected = probs * n_draws
    small = expected < CHI2_MIN_EXPECTED
    exp_cells = np.append(expected[~small], expected[small].sum())
    obs_cells = np.append(obs[~small], obs[small].sum())
    if exp_cells[-1] == 0:
        exp_cells, obs_cells = exp_cells[:-1], obs_cells[:-1]
    if exp_cells.size < 2:
        pvalue = 1.0
        chi2 = 0.0
    else:
        chi2, pvalue = stats.chisquare(obs_cells, exp_cells * obs_cells.sum() / exp_cells.sum())
    ok = stray == 0 and pvalue > alpha
    return IdentityReport(identity_id, "chi_square", dev, n_draws, ok, alpha, True, identity_id,
                          {"pvalue": float(pvalue), "chi2": float(chi2), "cells": int(exp_cells.size),
                           "draws_outside_support": stray})


def check_two_stage_sampler(V, t, n_draws=SAMPLER_DRAWS, seed=0):
    """Volume + Bernoulli sampler against its closed-form pmf."""
    V = np.asarray(V, dtype=float)
    n = V.shape[0]
    probs = {C: dpp.volume_bernoulli_pmf(V, t, C) for C in dpp.all_subsets(n)}
    return chi_square_sampler("sampler_two_stage", lambda rng: dpp.sample_volume_bernoulli(V, t, rng),
                              probs, n_draws, seed)


def check_two_stage_pmf(V, t, tol=1e-10):
    """The closed-form two-stage pmf equals the pmf of ``DPP(t I, V)`` on every subset."""
    V = np.asarray(V, dtype=float)
    model = dpp.volume_bernoulli_model(V, t)
    dev = max(abs(dpp.volume_bernoulli_pmf(V, t, C) - dpp.pmf(model, C)) for C in dpp.all_subsets(model.n))
    return IdentityReport("eq53_pmf", "enumeration", float(dev), 2 ** model.n, dev <= tol, tol, True,
                          "eq53_pmf")


def check_spectral_sampler(model, n_draws=SAMPLER_DRAWS, seed=0):
    table = dpp.enumerate_distribution(model, max_n=max(ENUM_LIMIT, model.n))
    return chi_square_sampler("sampler_spectral", lambda rng: dpp.sample(model, rng), table.entries,
                              n_draws, seed)


def check_fixed_size_sampler(model, k, n_draws=SAMPLER_DRAWS, seed=0):
    table = dpp.enumerate_distribution(model, max_n=max(ENUM_LIMIT, model.n)).size_slice(k)
    report = chi_square_sampler("sampler_fixed_size", lambda rng: dpp.sample_fixed_size(model, k, rng),
                                table.entries, n_draws, seed)
    report.extras["k"] = int(k)
    return report


def check_projected_gaussian_psd(count=20, seed=0, tol=PSD_TOL):
    """Smallest eigenvalue of projected-Gaussian Gram matrices on random instances."""
    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(count):
        n = int(rng.integers(5, 41))
        d = int(rng.integers(2, 6))
        k = int(rng.integers(1, d + 1))
        coords = tuple(sorted(rng.choice(d, size=k, replace=False).tolist()))
        X = rng.standard_normal((n, d)) * rng.uniform(0.1, 3.0)
        G = projected_gaussian_kernel_matrix(X, float(rng.uniform(0.05, 5.0)), coords)
        worst = min(worst, float(np.linalg.eigvalsh(G)[0]))
    excess = max(0.0, -worst)
    return IdentityReport("prop510_psd", "eigenvalues", excess, count, worst >= -tol, tol, True,
                          "prop510_psd", {"min_eigenvalue": worst})


# (kernel kind, dimension, regularity, basis spec) cycled through by the regression suite
SUITE_CONFIGS = (
    ("gaussian", 1, None, BasisSpec("constant")),
    ("gaussian", 1, None, BasisSpec("constant_linear")),
    ("gaussian", 2, None, BasisSpec("poly_total_order", order=1)),
    ("thin_plate", 1, 2, BasisSpec("poly_total_order", order=1)),
    ("thin_plate", 2, 2, BasisSpec("poly_total_order", order=1)),
)


def random_instance(seed, n=None, n_min=5, n_max=8, config=None):
    """A seeded random NNP built from points in the unit cube."""
    rng = np.random.default_rng(seed)
    kind, d, reg, basis = SUITE_CONFIGS[seed % len(SUITE_CONFIGS)] if config is None else config
    if n is None:
        n = int(rng.integers(n_min, n_max + 1))
    X = rng.random((n, d))
    if kind == "gaussian":
        kernel = KernelSpec("gaussian", bandwidth_sq=float(rng.uniform(0.02, 0.3)))
    else:
        kernel = KernelSpec("thin_plate", regularity_p=reg)
    return build_nnp(X, kernel, basis)


def regression_suite(count=20, n_min=5, n_max=8, seed=0):
    return [random_instance(seed + i, n_min=n_min, n_max=n_max) for i in range(count)]


def identity_suite(n=6, seed=0, lam=0.5, gamma=0.05, probes=5, include_corrected=True, sampler_draws=20_000):
    """Run every check on random instances of size ``n``; returns a list of reports."""
    rng = np.random.default_rng(seed)
    nnp = random_instance(seed, n=n, config=SUITE_CONFIGS[2])
    n, p = nnp.n, nnp.p
    reports = []
    model = dpp.build_ensemble(nnp, lam)
    reports.append(check_normalization(model))
    reports.append(check_marginals(model))
    u0, u1 = rng.standard_normal((n, probes)), rng.standard_normal((p, probes))
    v0, v1 = rng.standard_normal((n, probes)), rng.standard_normal((p, probes))
    reports.append(check_thm31(nnp, u0, u1, v0, v1, mode="enumeration"))
    if include_corrected:
        reports.append(check_thm31(nnp, u0, u1, v0, v1, mode="enumeration", corrected=True))
    reports.extend(check_prop51(nnp, lam, mode="enumeration"))
    if include_corrected:
        reports.append(check_prop51_id2_corrected(nnp, lam))
    reports.append(check_eq12(nnp.K_tilde + 0.1 * np.eye(n), lam, mode="enumeration"))
    reports.extend(check_cor56_cor57(nnp, lam, mode="enumeration"))
    reports.append(check_nystrom_ordering(nnp, lam))
    V = nnp.V
    reports.extend(check_random_design(V, 1.0, mode="enumeration"))
    if include_corrected:
        fixed = check_random_design(V, 1.0, mode="enumeration", corrected=True)
        reports.extend(r for r in fixed if r.identity_id != "eq58_unbiased")
    y = rng.standard_normal(n)
    X_probe = rng.random((5, nnp.X.shape[1]))
    reports.append(check_cor42(nnp, y, gamma, X_probe, mode="enumeration"))
    reports.append(check_risk_bound(nnp, rng.standard_normal(n), 0.5, gamma, lam, mode="enumeration"))
    reports.append(check_two_stage_pmf(V, 1.0))
    reports.append(check_two_stage_sampler(V, 1.0, sampler_draws, seed))
    reports.append(check_spectral_sampler(model, sampler_draws, seed))
    reports.append(check_fixed_size_sampler(model, p + 1, sampler_draws, seed))
    reports.append(check_projected_gaussian_psd(seed=seed))
    return reports
