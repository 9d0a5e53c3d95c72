"""Semi-parametric fits: full ridge, subset interpolation and projected-Nyström sketch.

The model is ``f(x) = sum_i alpha_i k(x, x_i) + sum_m beta_m p_m(x)`` with the
kernel part penalized by ``n * gamma`` and orthogonal to the basis at the
landmarks.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import cg

from . import linalg
from .dpp import as_subset
from .errors import (
    CholeskyFailure,
    DimensionMismatch,
    PcgNoConvergence,
    SingularReducedSystem,
    SingularSubsetSystem,
    SingularSystem,
    SubsetTooSmall,
)
from .nystrom import complement_of_subset_basis, projected_nystrom_matrix

PCG_RTOL = 1e-10
# relative singular-value floor below which a reduced system counts as singular
SOLVE_RTOL = 1e-14


@dataclass
class SemiParamFit:
    mode: str
    alpha: np.ndarray
    beta: np.ndarray
    landmarks: tuple | None
    kernel: object
    basis: object
    training_points: np.ndarray | None
    gamma: float
    fitted: np.ndarray | None = field(default=None, repr=False)
    info: dict = field(default_factory=dict)

    @property
    def landmark_points(self):
        if self.training_points is None:
            return None
        if self.landmarks is None:
            return self.training_points
        return self.training_points[list(self.landmarks)]


def _check_y(nnp, y):
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != nnp.n:
        raise DimensionMismatch(f"y has length {y.shape[0]}, expected {nnp.n}")
    return y


def _check_gamma(gamma):
    if not gamma > 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")


def _solve_checked(A, b, exc):
    if A.size == 0:
        return np.zeros(A.shape[0])
    s = np.linalg.svd(A, compute_uv=False)
    if not (s[0] > 0 and s[-1] > SOLVE_RTOL * s[0]):
        raise exc("reduced system is numerically singular")
    return np.linalg.solve(A, b)


def _make_fit(nnp, mode, alpha, beta, landmarks, gamma, fitted, **info):
    return SemiParamFit(mode=mode, alpha=alpha, beta=beta, landmarks=landmarks,
                        kernel=nnp.kernel, basis=nnp.basis, training_points=nnp.X,
                        gamma=float(gamma), fitted=fitted, info=info)


def fit_full(nnp, y, gamma, method="saddle"):
    """Solve ``[[K + n gamma I, V], [V^T, 0]] [alpha; beta] = [y; 0]``.

    ``method="closed_form"`` uses ``alpha = B (B^T K B + n gamma I)^{-1} B^T y``
    and ``beta = V^+ (y - K alpha)`` with ``B`` a basis of the complement of V.
    """
    _check_gamma(gamma)
    y = _check_y(nnp, y)
    n, p = nnp.n, nnp.p
    ng = n * gamma
    if method == "saddle":
        M = linalg.saddle_matrix(nnp.K + ng * np.eye(n), nnp.V)
        rhs = np.concatenate([y, np.zeros(p)])
        try:
            sol = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(str(exc)) from None
        alpha, beta = sol[:n], sol[n:]
    elif method == "closed_form":
        B = nnp.Q_perp
        a = _solve_checked(B.T @ nnp.K @ B + ng * np.eye(B.shape[1]), B.T @ y, SingularSystem)
        alpha = B @ a
        beta = nnp.V_pinv @ (y - nnp.K @ alpha)
    else:
        raise ValueError(f"unknown method {method!r}")
    fitted = nnp.K @ alpha + nnp.V @ beta
    return _make_fit(nnp, "full", alpha, beta, None, gamma, fitted, method=method)


def fit_full_path(nnp, y, gammas):
    """Coefficients ``(alpha, beta)`` of :func:`fit_full` for every gamma in ``gammas``.

    One eigendecomposition of ``B^T K B`` serves the whole grid.
    """
    y = _check_y(nnp, y)
    B = nnp.Q_perp
    w, U = np.linalg.eigh(B.T @ nnp.K @ B)
    BU = B @ U
    c = BU.T @ y
    out = []
    for gamma in gammas:
        _check_gamma(gamma)
        alpha = BU @ (c / (w + nnp.n * gamma))
        out.append((alpha, nnp.V_pinv @ (y - nnp.K @ alpha)))
    return out


def in_sample_estimate(nnp, y, gamma):
    """``P_V y + K_tilde (K_tilde + n gamma I)^{-1} P_perp y``."""
    _check_gamma(gamma)
    y = _check_y(nnp, y)
    n = nnp.n
    r = nnp.project_perp(y)
    return (y - r) + nnp.K_tilde @ np.linalg.solve(nnp.K_tilde + n * gamma * np.eye(n), r)


def fit_subset_interpolator(nnp, y, C):
    """Interpolate ``y_C`` using only the landmarks ``C`` (the ``gamma = 0`` path)."""
    y = _check_y(nnp, y)
    C = as_subset(C)
    idx = list(C)
    p = nnp.p
    if len(C) < p:
        raise SingularSubsetSystem(f"|C| = {len(C)} < p = {p}")
    M = linalg.saddle_matrix(nnp.K[np.ix_(idx, idx)], nnp.V[idx])
    rhs = np.concatenate([y[idx], np.zeros(p)])
    if not linalg.is_invertible(M, SOLVE_RTOL):
        raise SingularSubsetSystem("subset saddle matrix is singular")
    sol = np.linalg.solve(M, rhs)
    alpha, beta = sol[: len(C)], sol[len(C):]
    fitted = nnp.K[:, idx] @ alpha + nnp.V @ beta
    return _make_fit(nnp, "interpolation_subset", alpha, beta, C, 0.0, fitted)


@dataclass(frozen=True, eq=False)
class NystromSystem:
    """Reduced system ``A a = rhs`` with ``alpha' = B a``."""

    subset: tuple
    B: np.ndarray
    K_C: np.ndarray
    G: np.ndarray
    Xi: np.ndarray
    A: np.ndarray
    rhs: np.ndarray


def nystrom_system(nnp, y, gamma, C):
    """``A = G^T G + n gamma Xi`` and ``rhs = G^T y`` with ``G = P_perp K[:, C] B(C)``."""
    _check_gamma(gamma)
    y = _check_y(nnp, y)
    C = as_subset(C)
    idx = list(C)
    if len(C) <= nnp.p:
        raise SubsetTooSmall(f"|C| = {len(C)} must exceed p = {nnp.p}")
    B = complement_of_subset_basis(nnp.V, idx)
    K_C = nnp.K[:, idx]
    G = nnp.project_perp(K_C @ B)
    Xi = B.T @ K_C[idx] @ B
    Xi = 0.5 * (Xi + Xi.T)
    A = G.T @ G + nnp.n * gamma * Xi
    return NystromSystem(C, B, K_C, G, Xi, 0.5 * (A + A.T), G.T @ y)


@dataclass(frozen=True, eq=False)
class Preconditioner:
    """``H`` is the lower Cholesky factor of ``T^{-1}`` with
    ``T = B^T Kt_CC D Kt_CC B + n gamma B^T Kt_CC B``.
    """

    marginal_probs: np.ndarray
    D: np.ndarray
    H: np.ndarray
    subset: tuple
    gamma: float


def build_preconditioner(model, C, gamma, weights="dpp"):
    """Ridge-leverage preconditioner; ``weights="uniform"`` uses ``D = (n/|C|) I``."""
    _check_gamma(gamma)
    nnp = model.nnp
    C = as_subset(C)
    idx = list(C)
    n, k = nnp.n, len(C)
    if k <= nnp.p:
        raise SubsetTooSmall(f"|C| = {k} must exceed p = {nnp.p}")
    ell = model.marginal_probabilities
    if weights == "dpp":
        if np.any(ell[idx] <= 0):
            raise ValueError("marginal probabilities must be > 0 on C")
        d = 1.0 / ell[idx]
    elif weights == "uniform":
        d = np.full(k, n / k)
    else:
        raise ValueError(f"unknown weights {weights!r}")
    B = complement_of_subset_basis(nnp.V, idx)
    KtB = nnp.K_tilde[np.ix_(idx, idx)] @ B
    T = (KtB.T * d) @ KtB + n * gamma * (B.T @ KtB)
    T = 0.5 * (T + T.T)
    try:
        T_inv = np.linalg.inv(T)
        H = np.linalg.cholesky(0.5 * (T_inv + T_inv.T))
    except np.linalg.LinAlgError as exc:
        raise CholeskyFailure(f"preconditioner target is not positive definite: {exc}") from None
    return Preconditioner(marginal_probs=ell, D=np.diag(d), H=H, subset=C, gamma=float(gamma))


def _pcg(A, b, maxiter):
    steps = [0]

    def count(_):
        steps[0] += 1

    x, info = cg(A, b, rtol=PCG_RTOL, atol=0.0, maxiter=maxiter, callback=count)
    if info != 0:
        bnorm = np.linalg.norm(b)
        res = np.linalg.norm(b - A @ x) / (bnorm if bnorm > 0 else 1.0)
        raise PcgNoConvergence(steps[0], float(res))
    return x, steps[0]


def fit_nystrom(nnp, y, gamma, C, solver="direct", precondition=False, preconditioner=None, model=None):
    """Projected-Nyström sketched fit with landmarks ``C``.

    ``solver="pcg"`` runs conjugate gradient on the reduced system, optionally
    preconditioned (``preconditioner`` or one built from ``model``).
    """
    y = _check_y(nnp, y)
    sys = nystrom_system(nnp, y, gamma, C)
    m = sys.A.shape[0]
    info = {"solver": solver, "precondition": bool(precondition)}
    if solver == "direct":
        a = _solve_checked(sys.A, sys.rhs, SingularReducedSystem)
    elif solver == "pcg":
        maxiter = 10 * m
        if precondition:
            if preconditioner is None:
                if model is None:
                    raise ValueError("precondition=True needs a preconditioner or a model")
                preconditioner = build_preconditioner(model, sys.subset, gamma)
            if preconditioner.subset != sys.subset:
                raise ValueError("preconditioner was built for a different subset")
            H = preconditioner.H
            w, its = _pcg(H.T @ sys.A @ H, H.T @ sys.rhs, maxiter)
            a = H @ w
        else:
            a, its = _pcg(sys.A, sys.rhs, maxiter)
        info["iterations"] = its
    else:
        raise ValueError(f"unknown solver {solver!r}")
    alpha = sys.B @ a
    beta = nnp.V_pinv @ (y - sys.K_C @ alpha)
    fitted = sys.K_C @ alpha + nnp.V @ beta
    return _make_fit(nnp, "nystrom", alpha, beta, sys.subset, gamma, fitted, **info)


def condition_numbers(nnp, gamma, C, preconditioner):
    """2-norm condition numbers of the raw and preconditioned reduced operators."""
    sys = nystrom_system(nnp, np.zeros(nnp.n), gamma, C)
    H = preconditioner.H
    return float(np.linalg.cond(sys.A)), float(np.linalg.cond(H.T @ sys.A @ H))


def predict(fit, X_new):
    """Evaluate ``sum_landmarks alpha_i k(x, x_i) + sum_m beta_m p_m(x)``."""
    if fit.kernel is None or fit.basis is None or fit.training_points is None:
        raise ValueError("fit carries no kernel/basis/points metadata; build the pair with build_nnp")
    X_new = np.asarray(X_new, dtype=float)
    if X_new.ndim == 1:
        X_new = X_new[:, None]
    d = fit.training_points.shape[1]
    if X_new.shape[1] != d:
        raise DimensionMismatch(f"points have dimension {X_new.shape[1]}, expected {d}")
    out = fit.basis(X_new) @ fit.beta
    if fit.alpha.size:
        out = out + fit.kernel(X_new, fit.landmark_points) @ fit.alpha
    return out


def full_estimator_matrix(nnp, gamma):
    """``S = P_V + K_tilde (K_tilde + n gamma I)^{-1}``."""
    n = nnp.n
    Kt = nnp.K_tilde
    return nnp.P_V + np.linalg.solve(Kt + n * gamma * np.eye(n), Kt).T


def nystrom_estimator_matrix(nnp, gamma, C):
    """``S_N = P_V + Lt(C) (Lt(C) + n gamma I)^{-1}`` (``Lt = 0`` when ``|C| = p``)."""
    n = nnp.n
    L = projected_nystrom_matrix(nnp, as_subset(C))
    return nnp.P_V + np.linalg.solve(L + n * gamma * np.eye(n), L).T


def gaussian_risk(S, z, sigma_sq):
    """``E ||S (z + eps) - z||^2 = ||(S - I) z||^2 + sigma^2 ||S||_F^2`` for white noise."""
    bias = S @ z - z
    return float(bias @ bias + sigma_sq * np.sum(S * S))
