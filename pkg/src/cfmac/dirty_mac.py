"""Two-user Gaussian MAC with interference known to one transmitter each.

The channel is ``y = x_1 + x_2 + s_1 + s_2 + z`` with unit gains; user ``k``
has power ``P_k`` and knows ``s_k`` (variance ``Q_k``) non-causally. Each
transmitter pre-cancels ``gamma_k s_k`` inside its modulo operation, and the
receiver decodes two integer sums ``a`` and ``b`` of the lattice codewords.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .channel import RateTuple, RegionCurve
from .comp_rate import as_coefficients
from .two_user import PairRates, combine_two_sums

#: grid resolution per gamma axis for the coarse stage of optimize_gamma
GAMMA_GRID = 41
DEFAULT_BUDGET = 600


class OutOfScopeError(ValueError):
    """Inputs fall outside the hypothesis of the result being evaluated."""


@dataclass(frozen=True)
class DirtyConfig:
    P: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float).reshape(-1)
        Q = np.asarray(self.Q, dtype=float).reshape(-1)
        if P.shape != (2,) or Q.shape != (2,):
            raise ValueError("P and Q must each hold two values")
        if not np.all(np.isfinite(P)) or np.any(P <= 0):
            raise ValueError("powers must be positive and finite")
        if not np.all(np.isfinite(Q)) or np.any(Q < 0):
            raise ValueError("interference variances must be nonnegative and finite")
        for arr in (P, Q):
            arr.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "Q", Q)


@dataclass(frozen=True)
class DirtyParams:
    gamma: np.ndarray
    beta: np.ndarray = field(default_factory=lambda: np.ones(2))

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float).reshape(-1)
        b = np.asarray(self.beta, dtype=float).reshape(-1)
        if g.shape != (2,) or b.shape != (2,):
            raise ValueError("gamma and beta must each hold two values")
        if not np.all(np.isfinite(g)) or not np.all(np.isfinite(b)):
            raise ValueError("parameters must be finite")
        if np.any(b == 0):
            raise ValueError("scaling factors must be nonzero")
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "beta", b)


def _coef(a):
    return as_coefficients(a, 2)


def _independent(a, b):
    if a[0] * b[1] == a[1] * b[0]:
        raise ValueError(f"coefficient vectors {tuple(a)} and {tuple(b)} are linearly dependent")


def N1(dcfg: DirtyConfig, a, params: DirtyParams, alpha1: float) -> float:
    """``alpha1^2 + sum_k [(alpha1 - a_k beta_k)^2 P_k + (alpha1 - a_k gamma_k)^2 Q_k]``."""
    a = _coef(a)
    bt, g = params.beta, params.gamma
    return float(alpha1**2 + np.sum((alpha1 - a * bt) ** 2 * dcfg.P + (alpha1 - a * g) ** 2 * dcfg.Q))


def N2(dcfg: DirtyConfig, a, b, params: DirtyParams, alpha2: float, lam: float) -> float:
    """``alpha2^2 + sum_k [(alpha2 - (lam a_k + b_k) gamma_k)^2 Q_k + (alpha2 - (lam a_k + b_k) beta_k)^2 P_k]``."""
    a, b = _coef(a), _coef(b)
    bt, g = params.beta, params.gamma
    c = lam * a + b
    return float(alpha2**2 + np.sum((alpha2 - c * g) ** 2 * dcfg.Q + (alpha2 - c * bt) ** 2 * dcfg.P))


def optimal_alpha1(dcfg: DirtyConfig, a, params: DirtyParams) -> float:
    a = _coef(a)
    num = np.sum(a * params.beta * dcfg.P + a * params.gamma * dcfg.Q)
    return float(num / (1.0 + dcfg.P.sum() + dcfg.Q.sum()))


def optimal_alpha2_lambda(dcfg: DirtyConfig, a, b, params: DirtyParams) -> tuple[float, float, bool]:
    """Minimizer of N2 from the 2x2 normal equations.

    Returns ``(alpha2, lam, singular)``. When the system is singular the
    first sum carries no usable side information and ``lam = 0`` is used.
    """
    a, b = _coef(a), _coef(b)
    w = np.concatenate([dcfg.P, dcfg.Q])
    u = np.concatenate([a * params.beta, a * params.gamma])
    v = np.concatenate([b * params.beta, b * params.gamma])
    S = np.array([[1.0 + w.sum(), -(w @ u)], [-(w @ u), w @ (u * u)]])
    t = np.array([w @ v, -(w @ (u * v))])
    det = S[0, 0] * S[1, 1] - S[0, 1] ** 2
    if det > 1e-14 * S[0, 0] * (S[1, 1] + 1e-300):
        al, lam = np.linalg.solve(S, t)
        return float(al), float(lam), False
    return float(t[0] / S[0, 0]), 0.0, True


def _rates_from_noise(dcfg, params, n):
    return 0.5 * np.log2(params.beta**2 * dcfg.P / n)


def r_a_dirty(dcfg: DirtyConfig, a, params: DirtyParams) -> PairRates:
    n = N1(dcfg, a, params, optimal_alpha1(dcfg, a, params))
    raw = _rates_from_noise(dcfg, params, n)
    return PairRates(raw, np.maximum(raw, 0.0))


def r_b_given_a_dirty(dcfg: DirtyConfig, a, b, params: DirtyParams, return_flag: bool = False):
    a, b = _coef(a), _coef(b)
    _independent(a, b)
    al, lam, singular = optimal_alpha2_lambda(dcfg, a, b, params)
    raw = _rates_from_noise(dcfg, params, N2(dcfg, a, b, params, al, lam))
    out = PairRates(raw, np.maximum(raw, 0.0))
    return (out, singular) if return_flag else out


def message_rates_dirty(dcfg: DirtyConfig, a, b, params: DirtyParams) -> RateTuple:
    """Combine the two sums; constrained users need strictly positive rates."""
    a, b = _coef(a), _coef(b)
    ra = r_a_dirty(dcfg, a, params).raw
    rb = r_b_given_a_dirty(dcfg, a, b, params).raw
    for k in range(2):
        if (a[k] != 0 and not ra[k] > 0) or (b[k] != 0 and not rb[k] > 0):
            return RateTuple.infeasible(2, f"rate of user {k + 1} is not positive at these parameters")
    return combine_two_sums(a, b, ra, rb)


# ---------------------------------------------------------------------------
# batched evaluation and the outer optimization over gamma (and beta)


def _combine_batch(a, b, ra, rb) -> np.ndarray:
    feas = np.ones(ra.shape[0], dtype=bool)
    R = np.empty_like(ra)
    for k in range(2):
        if a[k] != 0:
            feas &= ra[:, k] > 0
        if b[k] != 0:
            feas &= rb[:, k] > 0
        if b[k] == 0:
            R[:, k] = ra[:, k]
        elif a[k] == 0:
            R[:, k] = rb[:, k]
        else:
            R[:, k] = np.minimum(ra[:, k], rb[:, k])
    R[~feas] = 0.0
    return np.where(np.isfinite(R), R, 0.0)


def batch_message_rates(dcfg: DirtyConfig, a, b, betas, gammas) -> np.ndarray:
    """Message rates for rows of ``betas`` and ``gammas`` (shape (m, 2)); infeasible rows are 0."""
    a, b = _coef(a), _coef(b)
    betas = np.ascontiguousarray(np.atleast_2d(betas), dtype=float)
    gammas = np.ascontiguousarray(np.atleast_2d(gammas), dtype=float)
    ra, rb = kernels.dirty_rates_batch(
        np.ascontiguousarray(dcfg.P), np.ascontiguousarray(dcfg.Q), a, b, betas, gammas
    )
    return _combine_batch(a, b, ra, rb)


def _scalarize(R, objective):
    if isinstance(objective, str):
        if objective != "min":
            raise ValueError(f"unknown objective {objective!r}")
        return R.min(axis=1)
    if isinstance(objective, tuple) and len(objective) == 2 and objective[0] == "ray":
        # Chebyshev scalarization reaches non-convex parts of a boundary
        w = np.asarray(objective[1], dtype=float)
        on = w > 0
        if w.shape != (2,) or not on.any() or np.any(w < 0):
            raise ValueError("ray weights must be two nonnegative values, not both zero")
        return (R[:, on] / w[on]).min(axis=1)
    w = np.asarray(objective, dtype=float)
    if w.shape != (2,):
        raise ValueError("weights must hold two values")
    return R @ w


def gamma_scale(dcfg: DirtyConfig, a, beta) -> float:
    """Natural magnitude of gamma: the receiver scaling when interference is fully cancelled."""
    a = _coef(a)
    beta = np.asarray(beta, dtype=float)
    alpha0 = float(np.sum(np.abs(a * beta) * dcfg.P) / (1.0 + dcfg.P.sum()))
    return max(alpha0, float(np.max(np.abs(beta))))


def optimize_gamma(dcfg: DirtyConfig, a, b, beta=(1.0, 1.0), budget: int = DEFAULT_BUDGET, objective="min"):
    """Maximize a scalarization of the message rates over ``gamma``.

    A deterministic ``GAMMA_GRID`` x ``GAMMA_GRID`` grid over
    ``[-2s, 2s]^2`` (``s`` from :func:`gamma_scale`) seeds a Nelder-Mead
    refinement limited to ``budget`` objective evaluations.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    a, b = _coef(a), _coef(b)
    _independent(a, b)
    beta = np.asarray(beta, dtype=float)
    s = gamma_scale(dcfg, a, beta)
    g = np.linspace(-2 * s, 2 * s, GAMMA_GRID)
    G1, G2 = np.meshgrid(g, g, indexing="ij")
    gam = np.column_stack([G1.ravel(), G2.ravel()])
    bet = np.broadcast_to(beta, gam.shape)
    vals = _scalarize(batch_message_rates(dcfg, a, b, bet, gam), objective)
    x0 = gam[int(np.argmax(vals))]
    bet1 = beta[None, :]

    def f(x):
        return -float(_scalarize(batch_message_rates(dcfg, a, b, bet1, x[None, :]), objective)[0])

    res = minimize(f, x0, method="Nelder-Mead", options={"maxfev": int(budget), "xatol": 1e-10, "fatol": 1e-14})
    x = res.x if res.fun <= f(x0) else x0
    gamma = np.asarray(x, dtype=float)
    return gamma, message_rates_dirty(dcfg, a, b, DirtyParams(gamma, beta))


def _beta2_grid(n: int = 25, span: float = 1.5) -> np.ndarray:
    pos = np.logspace(-span, span, n)
    return np.concatenate([-pos[::-1], pos])


def optimize_params(dcfg: DirtyConfig, a, b, objective="min", budget: int = DEFAULT_BUDGET, n_beta: int = 25, n_gamma: int = 21):
    """Joint search over ``beta2`` (``beta1 = 1``) and ``gamma``.

    Returns ``(value, DirtyParams)``; the value is the scalarized rate.
    """
    a, b = _coef(a), _coef(b)
    _independent(a, b)
    pts = _joint_grid(dcfg, a, n_beta, n_gamma)
    vals = _scalarize(batch_message_rates(dcfg, a, b, pts[:, :2], pts[:, 2:]), objective)
    i = int(np.argmax(vals))
    x0 = np.array([pts[i, 1], pts[i, 2], pts[i, 3]])
    best = (float(vals[i]), x0)
    xr = _refine(dcfg, a, b, x0, objective, budget)
    if xr[0] > best[0]:
        best = xr
    x = best[1]
    return best[0], DirtyParams(np.array([x[1], x[2]]), np.array([1.0, x[0]]))


def _joint_grid(dcfg, a, n_beta, n_gamma):
    """Rows ``(1, beta2, gamma1, gamma2)``; the gamma box scales with each beta2."""
    rows = []
    u = np.linspace(-2.0, 2.0, n_gamma)
    U1, U2 = np.meshgrid(u, u, indexing="ij")
    U1, U2 = U1.ravel(), U2.ravel()
    for b2 in _beta2_grid(n_beta):
        s = gamma_scale(dcfg, a, (1.0, b2))
        rows.append(np.column_stack([np.ones(U1.size), np.full(U1.size, b2), s * U1, s * U2]))
    return np.vstack(rows)


def _refine(dcfg, a, b, x0, objective, budget):
    def f(x):
        if x[0] == 0:
            return 0.0
        R = batch_message_rates(dcfg, a, b, np.array([[1.0, x[0]]]), np.array([[x[1], x[2]]]))
        return -float(_scalarize(R, objective)[0])

    res = minimize(f, x0, method="Nelder-Mead", options={"maxfev": int(budget), "xatol": 1e-10, "fatol": 1e-14})
    return float(-res.fun), np.asarray(res.x)


# ---------------------------------------------------------------------------
# single decoded sum


def single_sum_ratio_rate(P1: float, P2: float, r: float) -> float:
    """Pre-clamp rate of user 2 with ``a = (1, 1)``, matched gammas and ``beta1/beta2 = r``."""
    return 0.5 * math.log2(P2 * (1 + P1 + P2) / (r * r * P1 + P2 + P1 * P2 * (r - 1) ** 2))


def single_sum_rate(P1: float, P2: float) -> float:
    """Rate of user 2 from one sum when user 1's codeword is known at the receiver."""
    if not (P1 > 0 and P2 > 0):
        raise ValueError("powers must be positive")
    if P1 >= (P2 + 1) ** 2 / P2:
        return 0.5 * math.log2(1 + P2)
    if P2 >= (P1 + 1) ** 2 / P1:
        return 0.5 * math.log2(1 + P1)
    x = (1 + P1 + P2) / (2 + (math.sqrt(P1) - math.sqrt(P2)) ** 2)
    return max(0.0, 0.5 * math.log2(x))


def time_shared_single_sum_region(P1: float, P2: float, n: int = 64) -> RegionCurve:
    """Time-sharing line between the two single-user-at-a-time points."""
    if n < 2:
        raise ValueError("need at least two samples")
    r1 = single_sum_rate(P2, P1)
    r2 = single_sum_rate(P1, P2)
    t = np.linspace(0.0, 1.0, n)
    pts = np.column_stack([r1 * (1 - t), r2 * t])
    return RegionCurve(pts, label="single-sum", meta={"endpoints": (r1, r2)})


def single_sum_symmetric_rate(P1: float, P2: float) -> float:
    r1, r2 = single_sum_rate(P2, P1), single_sum_rate(P1, P2)
    return 0.0 if r1 + r2 == 0 else r1 * r2 / (r1 + r2)


# ---------------------------------------------------------------------------
# high interference


def high_interference_feasible(a, b) -> bool:
    """Whether every interference term can be nulled at once.

    Setting all ``Q``-weighted terms of both noise functionals to zero gives
    a homogeneous 4x4 system in ``(alpha1, alpha2, gamma1, gamma2)`` for each
    ``lambda``; a nontrivial solution exists for some ``lambda`` exactly when
    the system loses rank.
    """
    a = np.asarray(a, dtype=int)
    b = np.asarray(b, dtype=int)
    if a.shape != (2,) or b.shape != (2,):
        raise ValueError("a and b must each hold two integers")
    if a[0] == 0 or a[1] == 0:
        raise OutOfScopeError("the first sum must involve both users")
    # the determinant does not depend on lambda, so lambda = 0 decides it
    M = [[1, 0, -a[0], 0], [1, 0, 0, -a[1]], [0, 1, -b[0], 0], [0, 1, 0, -b[1]]]
    return _int_det(M) == 0


def _int_det(M) -> int:
    """Exact determinant of an integer matrix by fraction-free elimination."""
    A = [[int(x) for x in row] for row in M]
    n, sign, prev = len(A), 1, 1
    for k in range(n - 1):
        if A[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if A[i][k] != 0), None)
            if swap is None:
                return 0
            A[k], A[swap] = A[swap], A[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) // prev
        prev = A[k][k]
    return sign * A[-1][-1]


# ---------------------------------------------------------------------------
# region tracing


def region_family(max_coeff: int) -> list:
    """``a = (c, 1)`` or ``(1, c)`` with ``b = (1, 0)`` for ``c = 1..max_coeff``."""
    if max_coeff < 1:
        raise ValueError("max_coeff must be at least 1")
    fam = [((1, 1), (1, 0))]
    for c in range(2, max_coeff + 1):
        fam += [((c, 1), (1, 0)), ((1, c), (1, 0))]
    return fam


def pareto_front(points) -> np.ndarray:
    """Non-dominated points, sorted by the first rate."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    order = np.lexsort((-pts[:, 1], -pts[:, 0]))
    keep, best = [], -np.inf
    for i in order:
        if pts[i, 1] > best + 1e-15:
            keep.append(i)
            best = pts[i, 1]
    return pts[keep][::-1]


def dirty_region_sweep(
    dcfg: DirtyConfig,
    max_coeff: int = 5,
    budget: int = 300,
    n_dirs: int = 64,
    n_beta: int = 25,
    n_gamma: int = 21,
    family=None,
) -> RegionCurve:
    """Upper boundary of the union of two-sum points and the single-sum segment.

    Each coefficient pair is traced by weighted-sum maximization over
    ``n_dirs`` directions in the first quadrant plus the min-rate objective.
    The same directions are also used as rays, since a single pair's region
    need not be convex and weighted sums only find its hull vertices.
    """
    fam = region_family(max_coeff) if family is None else family
    thetas = np.linspace(0.0, np.pi / 2, n_dirs)
    dirs = [np.array([math.cos(t), math.sin(t)]) for t in thetas]
    objectives = dirs + ["min"] + [("ray", w) for w in dirs[1:-1]]
    traced = {}
    for a, b in fam:
        a_, b_ = _coef(a), _coef(b)
        pts = _joint_grid(dcfg, a_, n_beta, n_gamma)
        R = batch_message_rates(dcfg, a_, b_, pts[:, :2], pts[:, 2:])
        found = []
        for obj in objectives:
            vals = _scalarize(R, obj)
            i = int(np.argmax(vals))
            x0 = pts[i, 1:].copy()
            _, x = _refine(dcfg, a_, b_, x0, obj, budget)
            r = batch_message_rates(dcfg, a_, b_, np.array([[1.0, x[0]]]), x[None, 1:])[0]
            found.append(r if _scalarize(r[None, :], obj)[0] >= vals[i] else R[i])
        traced[(tuple(a), tuple(b))] = np.array(found)
    seg = time_shared_single_sum_region(float(dcfg.P[0]), float(dcfg.P[1]), n_dirs)
    pool = np.vstack(list(traced.values()) + [seg.points])
    front = pareto_front(pool)
    return RegionCurve(front, label="dirty-region", meta={"traced": traced, "single_sum": seg.points})


def symmetric_family(max_coeff: int = 2) -> list:
    """Independent pairs ``(a, b)`` with entries in ``[-max_coeff, max_coeff]``, one per sign class."""
    vecs = []
    for v in itertools.product(range(-max_coeff, max_coeff + 1), repeat=2):
        if v == (0, 0):
            continue
        first = v[0] if v[0] != 0 else v[1]
        if first > 0:
            vecs.append(v)
    return [(a, b) for a in vecs for b in vecs if a[0] * b[1] != a[1] * b[0]]


def best_symmetric_rate(dcfg: DirtyConfig, max_coeff: int = 2, budget: int = DEFAULT_BUDGET, top: int = 6, n_beta: int = 17, n_gamma: int = 21):
    """Largest equal-rate point over a coefficient family, with ``beta2`` and ``gamma`` optimized.

    Every pair is screened on a coarse joint grid and the ``top`` pairs are
    refined with Nelder-Mead.
    """
    screened = []
    for a, b in symmetric_family(max_coeff):
        a_, b_ = _coef(a), _coef(b)
        pts = _joint_grid(dcfg, a_, n_beta, n_gamma)
        vals = batch_message_rates(dcfg, a_, b_, pts[:, :2], pts[:, 2:]).min(axis=1)
        i = int(np.argmax(vals))
        screened.append((float(vals[i]), a, b, pts[i, 1:].copy()))
    screened.sort(key=lambda t: -t[0])
    best = (0.0, None, None, None)
    for v0, a, b, x0 in screened[:top]:
        v, x = _refine(dcfg, _coef(a), _coef(b), x0, "min", budget)
        if v0 > v:
            v, x = v0, x0
        if v > best[0]:
            best = (v, a, b, x)
    v, a, b, x = best
    params = None if x is None else DirtyParams(np.array([x[1], x[2]]), np.array([1.0, x[0]]))
    return {"rate": v, "a": a, "b": b, "params": params}


def symmetric_rate_curves(P: float, alphas, max_coeff: int = 2, budget: int = DEFAULT_BUDGET) -> list:
    """Equal-rate comparison at ``P_1 = P_2 = P`` and ``Q = alpha P``."""
    out = []
    for al in alphas:
        dcfg = DirtyConfig([P, P], [al * P, al * P])
        two = best_symmetric_rate(dcfg, max_coeff=max_coeff, budget=budget)
        out.append(
            {
                "alpha": float(al),
                "two_sum": two["rate"],
                "single_sum": single_sum_symmetric_rate(P, P),
                "upper": 0.25 * math.log2(1 + 2 * P),
                "a": two["a"],
                "b": two["b"],
            }
        )
    return out
