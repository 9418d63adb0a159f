"""K-user MAC: message rates through noise prediction and symmetric capacity.

The receiver decodes ``K`` integer sums, one per row of a full-rank
coefficient matrix ``A``. With ``B = diag(beta)`` the effective noise of the
sum sequence has covariance ``P A B (I + P h h^T)^{-1} B^T A^T = P L L^T``;
user ``k`` is limited by every sum it enters, through
``0.5 log2+(beta_k^2 / L_ll^2)``. The factor ``P`` cancels in that ratio, so
the Cholesky factor is always taken of the P-free matrix.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .channel import IDENTITY_TOL, UNCONSTRAINED, ChannelConfig, RateTuple, RegionCurve, sum_capacity
from .comp_rate import as_scaling


class CholeskyError(ValueError):
    """Matrix is not numerically positive definite."""

    def __init__(self, index: int, value: float | None = None):
        self.index = index
        msg = f"Cholesky pivot {index} is not positive"
        if value is not None:
            msg += f" ({value:.3e})"
        super().__init__(msg)


@dataclass(frozen=True)
class CoefficientMatrix:
    """Integer coefficient matrix; row ``l`` holds the ``l``-th decoded sum."""

    A: np.ndarray
    det: int = field(init=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A))
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("coefficient matrix must be square")
        Af = A.astype(float)
        if not np.all(np.isfinite(Af)) or np.any(Af != np.round(Af)):
            raise ValueError("coefficient matrix must have integer entries")
        A = np.round(Af).astype(np.int64)
        det = int(round(np.linalg.det(A.astype(float))))
        if det == 0:
            raise ValueError("coefficient matrix is singular")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "det", det)

    @property
    def K(self) -> int:
        return int(self.A.shape[0])

    @property
    def unimodular(self) -> bool:
        return abs(self.det) == 1


@dataclass
class CholeskyResult:
    L: np.ndarray
    source: np.ndarray

    @property
    def diag(self) -> np.ndarray:
        return np.diag(self.L).copy()


def _as_matrix(A) -> CoefficientMatrix:
    return A if isinstance(A, CoefficientMatrix) else CoefficientMatrix(A)


def _check(cfg: ChannelConfig, A: CoefficientMatrix):
    if A.K != cfg.K:
        raise ValueError(f"coefficient matrix is {A.K}x{A.K} but the channel has {cfg.K} users")


def noise_covariance(cfg: ChannelConfig, A, beta=None, scaled: bool = True) -> np.ndarray:
    """Covariance of the effective noise across the decoded sums.

    ``(I + P h h^T)^{-1}`` is applied through Sherman-Morrison. With
    ``scaled=False`` the leading factor ``P`` is dropped.
    """
    A = _as_matrix(A)
    _check(cfg, A)
    beta = as_scaling(beta, cfg.K)
    h, P = cfg.h, cfg.P
    G = A.A * beta[None, :]
    gh = G @ h
    M = G @ G.T - (P / (1.0 + P * (h @ h))) * np.outer(gh, gh)
    M = 0.5 * (M + M.T)
    return P * M if scaled else M


def cholesky_lower(M) -> CholeskyResult:
    M = np.ascontiguousarray(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if not np.allclose(M, M.T, rtol=0, atol=1e-12 * max(1.0, np.abs(M).max())):
        raise ValueError("matrix must be symmetric")
    L, bad = kernels.chol_lower(M)
    if bad >= 0:
        raise CholeskyError(int(bad))
    return CholeskyResult(L, M)


def _sqrt_factor(cfg: ChannelConfig, A: CoefficientMatrix, beta) -> np.ndarray:
    """``X`` with ``X X^T`` equal to the P-free noise covariance.

    Uses ``(I - t h h^T)^2 = (I + P h h^T)^{-1}``, which avoids the
    cancellation in forming the covariance when ``P |h|^2`` is large.
    """
    h, P = cfg.h, cfg.P
    n2 = float(h @ h)
    t = 0.0 if n2 == 0 else (1.0 - 1.0 / math.sqrt(1.0 + P * n2)) / n2
    G = A.A * beta[None, :]
    return G - t * np.outer(G @ h, h)


def prediction_factor(cfg: ChannelConfig, A, beta=None) -> CholeskyResult:
    """Cholesky factor of the P-free noise covariance, computed from a QR of its square root."""
    A = _as_matrix(A)
    _check(cfg, A)
    beta = as_scaling(beta, cfg.K)
    X = _sqrt_factor(cfg, A, beta)
    R = np.linalg.qr(X.T, mode="r")
    d = np.diag(R)
    scale = max(1.0, float(np.abs(X).max()))
    small = np.flatnonzero(np.abs(d) <= 1e-14 * scale)
    if small.size:
        raise CholeskyError(int(small[0]))
    L = R.T * np.sign(d)[None, :]
    return CholeskyResult(L, X @ X.T)


def message_rates_k(cfg: ChannelConfig, A, beta=None) -> RateTuple:
    """Per-user rates; ``binding[k]`` is ``"sum<l>"`` (1-based) for the limiting sum."""
    A = _as_matrix(A)
    beta = as_scaling(beta, cfg.K)
    d = prediction_factor(cfg, A, beta).diag
    rates = np.empty(cfg.K)
    binding = []
    for k in range(cfg.K):
        best, arg = math.inf, -1
        for ell in range(cfg.K):
            if A.A[ell, k] != 0:
                r = max(0.0, 0.5 * math.log2(beta[k] ** 2 / d[ell] ** 2))
                if r < best:
                    best, arg = r, ell
        rates[k] = best
        binding.append(f"sum{arg + 1}" if arg >= 0 else UNCONSTRAINED)
    return RateTuple(rates, binding)


def diagonal_rates(cfg: ChannelConfig, A, beta=None) -> np.ndarray:
    """Pre-clamp ``0.5 log2(beta_k^2 / L_kk^2)``."""
    beta = as_scaling(beta, cfg.K)
    d = prediction_factor(cfg, A, beta).diag
    return 0.5 * np.log2(beta**2 / d**2)


def sum_rate_identity_check(cfg: ChannelConfig, A, beta=None) -> float:
    """Residual of ``sum_k 0.5 log2(beta_k^2 / L_kk^2) = C_sum - log2|det A|``."""
    A = _as_matrix(A)
    return float(diagonal_rates(cfg, A, beta).sum() - (sum_capacity(cfg) - math.log2(abs(A.det))))


# ---------------------------------------------------------------------------
# three-user coefficient family


def three_user_family() -> list:
    """The six matrices with first row (1,1,1) followed by two distinct unit rows."""
    eye = np.eye(3, dtype=int)
    out = []
    for i, j in itertools.permutations(range(3), 2):
        out.append(CoefficientMatrix(np.vstack([np.ones(3, dtype=int), eye[i], eye[j]])))
    return out


def three_user_alt_family() -> list:
    """Matrices that recover users 2 and 3 first and then user 1."""
    return [
        CoefficientMatrix([[0, 1, 1], [0, 1, 0], [1, 0, 0]]),
        CoefficientMatrix([[0, 1, 1], [0, 0, 1], [1, 0, 0]]),
    ]


def _beta_pairs(beta_grid) -> np.ndarray:
    g = np.asarray(beta_grid, dtype=float)
    if g.ndim == 1:
        b2, b3 = np.meshgrid(g, g, indexing="ij")
        g = np.column_stack([b2.ravel(), b3.ravel()])
    if g.ndim != 2 or g.shape[1] != 2:
        raise ValueError("beta_grid must be 1-D values or an (m, 2) array of (beta2, beta3)")
    if np.any(g == 0):
        raise ValueError("scaling factors must be nonzero")
    return g


def batch_rates(cfg: ChannelConfig, A, betas) -> tuple[np.ndarray, np.ndarray]:
    """Rates for many full scaling vectors at once; failed rows are NaN."""
    A = _as_matrix(A)
    _check(cfg, A)
    betas = np.ascontiguousarray(np.atleast_2d(np.asarray(betas, dtype=float)))
    return kernels.k_user_rates_batch(
        np.ascontiguousarray(A.A.astype(float)), betas, np.ascontiguousarray(cfg.h), cfg.P
    )


def three_user_family_sweep(cfg: ChannelConfig, beta_grid, include_alt: bool = False) -> RegionCurve:
    """Rate triples from every family matrix over a grid of ``(beta2, beta3)``, ``beta1 = 1``."""
    if cfg.K != 3:
        raise ValueError(f"three-user sweep needs K = 3, got K = {cfg.K}")
    pairs = _beta_pairs(beta_grid)
    betas = np.column_stack([np.ones(len(pairs)), pairs])
    mats = three_user_family() + (three_user_alt_family() if include_alt else [])
    pts, src = [], []
    for idx, A in enumerate(mats):
        rates, _ = batch_rates(cfg, A, betas)
        ok = np.all(np.isfinite(rates), axis=1)
        pts.append(rates[ok])
        src.append(np.full(int(ok.sum()), idx))
    pts = np.vstack(pts)
    meta = {"K": 3, "matrices": [A.A.tolist() for A in mats], "source": np.concatenate(src), "C_sum": sum_capacity(cfg)}
    return RegionCurve(pts, label="three-user-family", meta=meta)


def max_min_rate(cfg: ChannelConfig, A, beta_grid, refine: bool = True, maxfev: int = 2000):
    """Best equal-rate guarantee ``max_beta min_k R_k`` with ``beta1 = 1``.

    A grid search over ``beta2..betaK`` seeds a Nelder-Mead polish.
    """
    from scipy.optimize import minimize

    A = _as_matrix(A)
    K = cfg.K
    g = np.asarray(beta_grid, dtype=float).ravel()
    mesh = np.meshgrid(*([g] * (K - 1)), indexing="ij")
    betas = np.column_stack([np.ones(mesh[0].size)] + [m.ravel() for m in mesh])
    rates, _ = batch_rates(cfg, A, betas)
    score = np.where(np.all(np.isfinite(rates), axis=1), rates.min(axis=1), -np.inf)
    i = int(np.argmax(score))
    best, x = float(score[i]), betas[i, 1:].copy()
    if refine and np.isfinite(best):

        def obj(z):
            if np.any(z == 0):
                return 0.0
            r, _ = batch_rates(cfg, A, np.concatenate([[1.0], z])[None, :])
            return -float(r.min()) if np.all(np.isfinite(r)) else 0.0

        res = minimize(obj, x, method="Nelder-Mead", options={"maxfev": maxfev, "xatol": 1e-10, "fatol": 1e-13})
        if -res.fun > best:
            best, x = float(-res.fun), res.x
    return best, np.concatenate([[1.0], x])


# ---------------------------------------------------------------------------
# symmetric capacity of the symmetric channel


def symmetric_capacity(K: int, P: float) -> float:
    return math.log2(1.0 + K * P) / (2.0 * K)


def symmetric_coefficients(K: int) -> CoefficientMatrix:
    """All-ones first row, then the unit rows of users 2..K."""
    A = np.eye(K, dtype=int)
    A[0, :] = 1
    return CoefficientMatrix(A)


def _tilde_diag(K: int, P: float, tail: np.ndarray) -> np.ndarray:
    """Cholesky diagonals of ``C (I - P/(1+KP) E) C^T`` for each row of tail = (beta2..betaK)."""
    tail = np.atleast_2d(tail)
    m = tail.shape[0]
    c = P / (1.0 + K * P)
    C = np.broadcast_to(np.eye(K), (m, K, K)).copy()
    C[:, 0, 1:] = tail
    cs = C.sum(axis=2)
    Ms = C @ np.swapaxes(C, 1, 2) - c * cs[:, :, None] * cs[:, None, :]
    return kernels.chol_diag_batch(np.ascontiguousarray(Ms))


def _residual_batch(K, P, tail):
    d = np.abs(_tilde_diag(K, P, tail))
    return d[:, 1:] - d[:, :1]


@dataclass
class SymResult:
    """Outcome of the equalization search.

    ``status`` is ``"found"`` or ``"not-found"``; the search cannot prove
    that no admissible solution exists.
    """

    K: int
    P: float
    status: str
    beta: np.ndarray | None = None
    residual: float = math.inf
    rate: float = 0.0
    candidates: list = field(default_factory=list)

    @property
    def found(self) -> bool:
        return self.status == "found"


SOLVE_TOL = 1e-12
ADMISSIBLE_SLACK = 1e-9
PROJECT_RESTARTS = 3


def _newton(K, P, x0, max_iter=60, fd=1e-7):
    x = np.array(x0, dtype=float)
    n = K - 1
    restarts = 0
    for _ in range(max_iter):
        pts = np.vstack([x, x + fd * np.eye(n)])
        R = _residual_batch(K, P, pts)
        if np.any(np.isnan(R)):
            return x, math.inf
        r = R[0]
        nr = float(np.max(np.abs(r)))
        if nr < SOLVE_TOL:
            return x, nr
        J = (R[1:] - r).T / fd
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, -r, rcond=None)[0]
        t = 1.0
        while t > 1e-6:
            xn = x + t * step
            Rn = _residual_batch(K, P, xn)[0]
            if not np.any(np.isnan(Rn)) and np.max(np.abs(Rn)) < nr:
                break
            t *= 0.5
        else:
            return x, nr
        x = xn
        if np.any(x < 1.0 - ADMISSIBLE_SLACK):
            # step left the admissible box: project and start over from there
            if restarts >= PROJECT_RESTARTS:
                return x, float(np.max(np.abs(_residual_batch(K, P, x)[0])))
            restarts += 1
            x = np.maximum(x, 1.0)
    return x, float(np.max(np.abs(_residual_batch(K, P, x)[0])))


def _coordinate_descent(K, P, x0, sweeps=40, hi=8.0):
    from scipy.optimize import minimize_scalar

    x = np.maximum(np.array(x0, dtype=float), 1.0)

    def sse(z):
        R = _residual_batch(K, P, z)[0]
        return math.inf if np.any(np.isnan(R)) else float(R @ R)

    for _ in range(sweeps):
        for i in range(K - 1):
            def f(v, i=i):
                z = x.copy()
                z[i] = v
                return sse(z)

            x[i] = minimize_scalar(f, bounds=(1.0, hi), method="bounded", options={"xatol": 1e-12}).x
    return x, math.sqrt(sse(x))


def _starts(K: int, n_random: int, seed: int):
    n = K - 1
    yield np.ones(n)
    yield np.full(n, 1.0 + 1e-3)
    for top in (1.2, 1.5, 1.8, 2.2, 3.0):
        yield np.linspace(top, 1.0 + (top - 1.0) / n, n)
        yield np.linspace(top, 1.0, n)
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        yield np.sort(1.0 + 2.0 * rng.random(n))[::-1]


def sym_equalize_betas(K: int, P: float, n_random: int = 16, seed: int = 0) -> SymResult:
    """Search ``beta2..betaK >= 1`` with equal-magnitude Cholesky diagonals.

    Damped Newton with a finite-difference Jacobian from a fixed list of
    starts (all ones, decreasing ramps, seeded random draws); coordinate
    descent on the squared residual is tried when Newton produces nothing.
    """
    if K < 2:
        raise ValueError("K must be at least 2")
    if not P > 0:
        raise ValueError("P must be positive")
    cands = []
    for x0 in _starts(K, n_random, seed):
        x, res = _newton(K, P, x0)
        if res < 1e-10 and np.all(x >= 1.0 - ADMISSIBLE_SLACK):
            if not any(np.max(np.abs(x - c)) < 1e-7 for c in cands):
                cands.append(x)
    if not cands:
        x, res = _coordinate_descent(K, P, np.ones(K - 1))
        if res < 1e-10:
            x, res2 = _newton(K, P, x)
            if res2 < 1e-10 and np.all(x >= 1.0 - ADMISSIBLE_SLACK):
                cands.append(x)
    if not cands:
        return SymResult(K, float(P), "not-found")
    x = cands[0]
    beta = np.concatenate([[1.0], np.maximum(x, 1.0) if np.all(x >= 1.0 - ADMISSIBLE_SLACK) else x])
    res = float(np.max(np.abs(_residual_batch(K, P, x)[0])))
    d = np.abs(_tilde_diag(K, P, x)[0])
    rate = float(-np.log2(d[0]))
    return SymResult(K, float(P), "found", beta=beta, residual=res, rate=rate, candidates=cands)


def p_star(K: int, tol: float = 0.01, ceiling: float = 100.0, start: float = 0.1, refine: float = 32.0):
    """Bracket the smallest power at which the equalization search succeeds.

    A doubling scan from ``start`` finds the first feasible power; bisection
    then narrows ``[lo, hi]`` (``lo`` infeasible, ``hi`` feasible) until its
    width is at most ``tol / refine``.
    """
    if K < 2:
        raise ValueError("K must be at least 2")
    if tol < 1e-3:
        raise ValueError("tol must be at least 1e-3")
    feas = lambda p: sym_equalize_betas(K, p).found  # noqa: E731
    lo, hi = None, start
    while not feas(hi):
        lo = hi
        hi *= 2.0
        if hi > ceiling:
            if lo < ceiling and feas(ceiling):
                hi = ceiling
                break
            raise RuntimeError(f"no admissible scaling found for K={K} up to P={ceiling}")
    if lo is None:
        raise RuntimeError(f"already feasible at the lower seed P={start}")
    while hi - lo > tol / refine:
        mid = 0.5 * (lo + hi)
        if feas(mid):
            hi = mid
        else:
            lo = mid
    return lo, hi


def sym_rates_check(K: int, res: SymResult) -> np.ndarray:
    """Message rates at an equalization result, for cross-checking."""
    cfg = ChannelConfig(np.ones(K), res.P)
    return message_rates_k(cfg, symmetric_coefficients(K), res.beta).rates


__all__ = [
    "IDENTITY_TOL",
    "CholeskyError",
    "CholeskyResult",
    "CoefficientMatrix",
    "SymResult",
    "batch_rates",
    "cholesky_lower",
    "diagonal_rates",
    "max_min_rate",
    "message_rates_k",
    "noise_covariance",
    "p_star",
    "prediction_factor",
    "sum_rate_identity_check",
    "sym_equalize_betas",
    "sym_rates_check",
    "symmetric_capacity",
    "symmetric_coefficients",
    "three_user_alt_family",
    "three_user_family",
    "three_user_family_sweep",
]
