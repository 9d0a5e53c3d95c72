"""Kernel and polynomial-basis constructors, and the non-negative pair (K, V)."""

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations_with_replacement

import numpy as np
from scipy.spatial.distance import cdist, pdist

from . import linalg
from .errors import (
    EmptyMask,
    IndexOutOfRange,
    NonPositiveBandwidth,
    NotConditionallyPSD,
    RankDeficient,
    RankDeficientV,
    RegularityTooLow,
    TooFewPoints,
)

KERNEL_KINDS = ("gaussian", "thin_plate", "projected_gaussian")
BASIS_KINDS = ("none", "constant", "constant_linear", "poly_total_order")


def _points(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def _check_coords(active_coords, d):
    coords = tuple(int(c) for c in active_coords)
    if not coords:
        raise EmptyMask("active coordinate set is empty")
    bad = [c for c in coords if c < 0 or c >= d]
    if bad:
        raise IndexOutOfRange(f"coordinates {bad} outside 0..{d - 1}")
    return coords


def _sqdist(X, Y):
    return cdist(X, Y, "sqeuclidean")


def gaussian_kernel_matrix(X, bandwidth_sq, Y=None):
    """``exp(-||x - x'||^2 / bandwidth_sq)`` between rows of X (and Y)."""
    if not bandwidth_sq > 0:
        raise NonPositiveBandwidth(f"bandwidth_sq must be > 0, got {bandwidth_sq}")
    X = _points(X)
    Y = X if Y is None else _points(Y)
    return np.exp(-_sqdist(X, Y) / bandwidth_sq)


def thin_plate_kernel_matrix(X, regularity_p, Y=None):
    """Thin-plate radial kernel: ``r^(2p-d) log r`` for even d, ``r^(2p-d)`` for odd d.

    The diagonal (r = 0) is 0.
    """
    X = _points(X)
    Y = X if Y is None else _points(Y)
    d = X.shape[1]
    p = int(regularity_p)
    if 2 * p <= d:
        raise RegularityTooLow(f"need 2p > d, got p={p}, d={d}")
    r = np.sqrt(_sqdist(X, Y))
    expo = 2 * p - d
    if d % 2:
        return r**expo
    out = np.zeros_like(r)
    pos = r > 0
    out[pos] = r[pos] ** expo * np.log(r[pos])
    return out


def projected_gaussian_kernel_matrix(X, bandwidth_sq, active_coords, Y=None):
    """Gaussian kernel restricted to the coordinates in ``active_coords`` (0-based)."""
    X = _points(X)
    coords = list(_check_coords(active_coords, X.shape[1]))
    Y = X if Y is None else _points(Y)
    return gaussian_kernel_matrix(X[:, coords], bandwidth_sq, Y[:, coords])


@dataclass(frozen=True)
class KernelSpec:
    """Description of a kernel function; calling it evaluates the Gram/cross matrix."""

    kind: str
    bandwidth_sq: float | None = None
    regularity_p: int | None = None
    active_coords: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind in ("gaussian", "projected_gaussian"):
            if self.bandwidth_sq is None or not self.bandwidth_sq > 0:
                raise NonPositiveBandwidth(f"bandwidth_sq must be > 0, got {self.bandwidth_sq}")
        if self.kind == "projected_gaussian" and not self.active_coords:
            raise EmptyMask("projected_gaussian needs active_coords")
        if self.kind == "thin_plate" and self.regularity_p is None:
            raise ValueError("thin_plate needs regularity_p")

    def __call__(self, X, Y=None):
        if self.kind == "gaussian":
            return gaussian_kernel_matrix(X, self.bandwidth_sq, Y)
        if self.kind == "thin_plate":
            return thin_plate_kernel_matrix(X, self.regularity_p, Y)
        return projected_gaussian_kernel_matrix(X, self.bandwidth_sq, self.active_coords, Y)

    def to_dict(self):
        return {k: v for k, v in vars(self).items() if v is not None}


@dataclass(frozen=True)
class BasisSpec:
    """Polynomial basis for the parametric part.

    ``constant_linear`` yields ``[X_active, 1]``; ``poly_total_order`` yields
    every monomial of total degree ``<= order`` in graded lexicographic order
    (``1, x0, x1, x0^2, x0 x1, x1^2, ...``). ``active_coords=None`` means all.
    """

    kind: str
    order: int = 1
    active_coords: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in BASIS_KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.kind == "poly_total_order" and self.order < 0:
            raise ValueError("polynomial order must be >= 0")

    def __call__(self, X):
        return polynomial_basis_matrix(X, self)

    def to_dict(self):
        return {k: v for k, v in vars(self).items() if v is not None}


def _monomial_exponents(d, order):
    out = []
    for deg in range(order + 1):
        for combo in combinations_with_replacement(range(d), deg):
            out.append(combo)
    return out


def polynomial_basis_matrix(X, spec):
    X = _points(X)
    n, d = X.shape
    coords = list(range(d)) if spec.active_coords is None else list(_check_coords(spec.active_coords, d))
    Xa = X[:, coords]
    if spec.kind == "none":
        V = np.zeros((n, 0))
    elif spec.kind == "constant":
        V = np.ones((n, 1))
    elif spec.kind == "constant_linear":
        V = np.column_stack([Xa, np.ones(n)])
    else:
        cols = [np.prod(Xa[:, list(combo)], axis=1) if combo else np.ones(n)
                for combo in _monomial_exponents(len(coords), spec.order)]
        V = np.column_stack(cols)
    if n < V.shape[1]:
        raise TooFewPoints(f"{n} points cannot support {V.shape[1]} basis functions")
    return V


def median_heuristic_bandwidth(X):
    """Median of pairwise squared distances, halved."""
    X = _points(X)
    if X.shape[0] < 2:
        raise TooFewPoints("median heuristic needs at least two points")
    return float(np.median(pdist(X, "sqeuclidean")) / 2.0)


@dataclass(frozen=True, eq=False)
class NNP:
    """A validated non-negative pair: symmetric ``K`` and full-rank ``V``.

    ``K_tilde`` is ``P_perp K P_perp`` with ``P_perp`` the projector onto the
    orthogonal complement of range(V). ``X``, ``kernel`` and ``basis`` are
    optional metadata used for out-of-sample prediction.
    """

    K: np.ndarray
    V: np.ndarray
    P_perp: np.ndarray
    K_tilde: np.ndarray
    psd_slack: float
    X: np.ndarray | None = field(default=None, repr=False)
    kernel: KernelSpec | None = None
    basis: BasisSpec | None = None

    @property
    def n(self):
        return self.K.shape[0]

    @property
    def p(self):
        return self.V.shape[1]

    @cached_property
    def Q_V(self):
        return linalg.orthonormal_basis(self.V)

    @cached_property
    def Q_perp(self):
        return linalg.orthonormal_complement_basis(self.V)

    @cached_property
    def P_V(self):
        return self.Q_V @ self.Q_V.T

    @cached_property
    def V_pinv(self):
        return linalg.pinv(self.V)

    def project_perp(self, A):
        """Apply ``P_perp`` to the columns of ``A`` without forming it."""
        Q = self.Q_V
        return A - Q @ (Q.T @ A)


def make_nnp(K, V, psd_tol=None, *, X=None, kernel=None, basis=None):
    """Validate ``(K, V)`` and build the projected kernel.

    ``psd_tol`` defaults to ``1e-8 * ||K_tilde||_2`` plus a floor of
    ``1e-12 * ||K||_2`` so that kernels lying in span(V) are accepted.
    """
    K = np.asarray(K, dtype=float)
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    n = K.shape[0]
    if K.shape != (n, n) or V.shape[0] != n:
        raise ValueError(f"shape mismatch: K {K.shape}, V {V.shape}")
    scale = max(np.abs(K).max(initial=0.0), 1.0)
    if not np.allclose(K, K.T, rtol=0, atol=1e-12 * scale):
        raise ValueError("K must be symmetric")
    K = 0.5 * (K + K.T)
    try:
        P_perp = linalg.complement_projector(V)
    except RankDeficient as exc:
        raise RankDeficientV(str(exc)) from None
    K_tilde = P_perp @ K @ P_perp
    K_tilde = 0.5 * (K_tilde + K_tilde.T)
    eig = np.linalg.eigvalsh(K_tilde)
    if psd_tol is None:
        psd_tol = 1e-8 * np.abs(eig).max(initial=0.0) + 1e-12 * np.linalg.norm(K, 2)
    lo = float(eig.min(initial=0.0))
    if lo < -psd_tol:
        raise NotConditionallyPSD(lo, psd_tol)
    return NNP(K=K, V=V, P_perp=P_perp, K_tilde=K_tilde, psd_slack=min(lo, 0.0),
               X=None if X is None else _points(X), kernel=kernel, basis=basis)


def build_nnp(X, kernel, basis, psd_tol=None):
    """Evaluate ``kernel`` and ``basis`` on the points ``X`` and validate the pair."""
    X = _points(X)
    return make_nnp(kernel(X), basis(X), psd_tol, X=X, kernel=kernel, basis=basis)
