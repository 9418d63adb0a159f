"""Two-user MAC: rates from two decoded sums and dominant-face analysis.

Throughout, ``beta_1`` is normalized to 1 where a single ``beta2`` is taken;
rate expressions are invariant to a common rescaling of both factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .channel import (
    UNCONSTRAINED,
    ChannelConfig,
    RateTuple,
    RegionCurve,
    corner_points,
    sum_capacity,
)
from .comp_rate import as_coefficients, as_scaling

CASE_I = "CaseI"
CASE_II = "CaseII"
CASE_III = "CaseIII"
SINGLE_USER = "single-user"

#: ties on the case thresholds are resolved toward the higher case
CASE_EPS = 1e-12

DEFAULT_SAMPLES = 512


class DegenerateChannelError(ValueError):
    """A gain is zero, so the two-sum construction does not apply."""


@dataclass(frozen=True)
class TwoSumChoice:
    a: tuple
    b: tuple

    def __post_init__(self):
        a = tuple(int(x) for x in as_coefficients(self.a, 2))
        b = tuple(int(x) for x in as_coefficients(self.b, 2))
        if a[0] * b[1] == a[1] * b[0]:
            raise ValueError(f"coefficient vectors {a} and {b} are linearly dependent")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def det(self) -> int:
        """``a_2 b_1 - a_1 b_2``."""
        return self.a[1] * self.b[0] - self.a[0] * self.b[1]

    def __str__(self):
        return f"a={self.a},b={self.b}"


#: the two choices that reach the dominant face
A1 = TwoSumChoice((1, 1), (0, 1))
A2 = TwoSumChoice((1, 1), (1, 0))


@dataclass(frozen=True)
class CaseLabel:
    case: str
    A_value: float


class PairRates(NamedTuple):
    raw: np.ndarray
    rates: np.ndarray


def _require_2(cfg: ChannelConfig):
    if cfg.K != 2:
        raise ValueError(f"two-user analysis needs K = 2, got K = {cfg.K}")


def _beta_pair(beta) -> np.ndarray:
    if np.isscalar(beta):
        return as_scaling([1.0, float(beta)], 2)
    return as_scaling(beta, 2)


def K_const(a, beta, cfg: ChannelConfig) -> float:
    """``sum_k a_k^2 beta_k^2 + P (a_1 beta_1 h_2 - a_2 beta_2 h_1)^2``."""
    _require_2(cfg)
    a = as_coefficients(a, 2)
    beta = _beta_pair(beta)
    h1, h2 = cfg.h
    return float(np.sum(a**2 * beta**2) + cfg.P * (a[0] * beta[0] * h2 - a[1] * beta[1] * h1) ** 2)


def _S2(cfg: ChannelConfig) -> float:
    return 1.0 + cfg.P * float(cfg.h @ cfg.h)


def r_a(cfg: ChannelConfig, a, beta) -> PairRates:
    """Computation rates of the first sum, ``0.5 log2(beta_k^2 S^2 / K(a, beta))``."""
    beta = _beta_pair(beta)
    raw = 0.5 * np.log2(beta**2 * _S2(cfg) / K_const(a, beta, cfg))
    return PairRates(raw, np.maximum(raw, 0.0))


def r_b_given_a(cfg: ChannelConfig, a, b, beta) -> PairRates:
    """Rates for the second sum ``b`` once sum ``a`` is known."""
    choice = TwoSumChoice(tuple(np.asarray(a, dtype=int)), tuple(np.asarray(b, dtype=int)))
    beta = _beta_pair(beta)
    k = K_const(choice.a, beta, cfg)
    raw = 0.5 * np.log2(beta**2 * k / (beta[0] ** 2 * beta[1] ** 2 * choice.det**2))
    return PairRates(raw, np.maximum(raw, 0.0))


def combine_two_sums(a, b, ra_raw, rb_raw, tol: float = 1e-12) -> RateTuple:
    """Message rates from the computation rates of two decoded sums.

    A user absent from one sum is constrained only by the other. The
    constraining rates must be nonnegative, otherwise the result is marked
    infeasible.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    for k in range(2):
        if a[k] != 0 and ra_raw[k] < -tol:
            return RateTuple.infeasible(2, f"first-sum rate of user {k + 1} is negative")
        if b[k] != 0 and rb_raw[k] < -tol:
            return RateTuple.infeasible(2, f"second-sum rate of user {k + 1} is negative")
    rates = np.empty(2)
    binding = []
    for k in range(2):
        if a[k] == 0 and b[k] == 0:  # pragma: no cover - excluded by independence
            rates[k], tag = math.inf, UNCONSTRAINED
        elif b[k] == 0:
            rates[k], tag = ra_raw[k], "a"
        elif a[k] == 0:
            rates[k], tag = rb_raw[k], "b|a"
        elif ra_raw[k] <= rb_raw[k]:
            rates[k], tag = ra_raw[k], "a"
        else:
            rates[k], tag = rb_raw[k], "b|a"
        binding.append(tag)
    return RateTuple(np.maximum(rates, 0.0), binding)


def message_rates_two_sums(cfg: ChannelConfig, choice: TwoSumChoice, beta) -> RateTuple:
    ra = r_a(cfg, choice.a, beta).raw
    rb = r_b_given_a(cfg, choice.a, choice.b, beta).raw
    return combine_two_sums(choice.a, choice.b, ra, rb)


def two_sum_sweep(cfg: ChannelConfig, choice: TwoSumChoice, beta2_values) -> list:
    """Message rates for each ``beta2`` (with ``beta1 = 1``)."""
    return [message_rates_two_sums(cfg, choice, (1.0, float(b2))) for b2 in np.atleast_1d(beta2_values)]


# ---------------------------------------------------------------------------
# case analysis


def discriminant_A(cfg: ChannelConfig) -> float:
    """``h1 h2 P / sqrt(1 + h1^2 P + h2^2 P)``."""
    _require_2(cfg)
    h1, h2 = cfg.h
    return float(h1 * h2 * cfg.P / math.sqrt(_S2(cfg)))


def classify(cfg: ChannelConfig) -> CaseLabel:
    _require_2(cfg)
    A = discriminant_A(cfg)
    if cfg.h[0] * cfg.h[1] == 0:
        return CaseLabel(SINGLE_USER, A)
    if A >= 1.0 - CASE_EPS:
        return CaseLabel(CASE_III, A)
    if A >= 0.75 - CASE_EPS:
        return CaseLabel(CASE_II, A)
    return CaseLabel(CASE_I, A)


def _require_connected(cfg: ChannelConfig):
    _require_2(cfg)
    if cfg.h[0] * cfg.h[1] == 0:
        raise DegenerateChannelError("a channel gain is zero; the MAC reduces to a single user")


def f_quadratic(cfg: ChannelConfig, beta2, a=(1, 1)) -> float:
    """``K(a, (1, beta2)) - beta2 S``; nonpositive where the first sum is not the bottleneck."""
    return K_const(a, (1.0, beta2), cfg) - beta2 * math.sqrt(_S2(cfg))


def beta_roots(cfg: ChannelConfig, a=(1, 1)):
    """Real roots ``(beta2', beta2'')`` of :func:`f_quadratic`, or None."""
    _require_connected(cfg)
    a1, a2 = as_coefficients(a, 2)
    if a1 * a2 == 0:
        raise ValueError("both coefficients of the first sum must be nonzero")
    h1, h2 = cfg.h
    P = cfg.P
    S = math.sqrt(_S2(cfg))
    D = S * (1 - 4 * a1**2 * a2**2) + 4 * P * a1 * a2 * h1 * h2
    if D < 0:
        if D > -CASE_EPS * S:
            D = 0.0
        else:
            return None
    lead = 2 * (a2**2 + a2**2 * h1**2 * P)
    mid = 2 * a1 * a2 * h1 * h2 * P + S
    rad = math.sqrt(S * D)
    return (mid - rad) / lead, (mid + rad) / lead


def corner_betas(cfg: ChannelConfig, a=(1, 1)) -> tuple[float, float]:
    """``beta2`` values maximizing ``r_1(a)`` and ``r_2(a)`` respectively.

    For ``a = (1, 1)`` these land on the two capacity corners with A1 and
    A2; in general a corner needs the matching ``|a_k| = 1``.
    """
    _require_connected(cfg)
    a1, a2 = as_coefficients(a, 2)
    if a1 * a2 == 0:
        raise ValueError("both coefficients of the first sum must be nonzero")
    h1, h2 = cfg.h
    P = cfg.P
    return a1 * h1 * h2 * P / (a2 * (1 + h1**2 * P)), a1 * (1 + h2**2 * P) / (a2 * h1 * h2 * P)


def corner_containment(cfg: ChannelConfig) -> dict:
    """Details of whether both corner ``beta2`` values sit in the root interval."""
    roots = beta_roots(cfg)
    b1, b2 = corner_betas(cfg)
    if roots is None:
        return {"contained": False, "reason": "no real roots (case I)", "roots": None, "corners": (b1, b2)}
    lo, hi = roots
    slack = CASE_EPS * max(1.0, abs(hi))
    inside = (lo - slack <= b1 <= hi + slack) and (lo - slack <= b2 <= hi + slack)
    return {
        "contained": bool(inside),
        "reason": "" if inside else "a corner beta lies outside the root interval",
        "roots": roots,
        "corners": (b1, b2),
    }


def interval_contains_corners(cfg: ChannelConfig) -> bool:
    return corner_containment(cfg)["contained"]


def coefficient_feasibility(cfg: ChannelConfig, a) -> tuple[bool, bool]:
    """Threshold tests for a general first sum ``a``.

    Returns ``(some dominant-face point reachable, corners reachable)``.
    """
    a1, a2 = as_coefficients(a, 2)
    if a1 * a2 == 0:
        raise ValueError("both coefficients of the first sum must be nonzero")
    A = discriminant_A(cfg)
    p = a1 * a2
    return bool(A >= (4 * p * p - 1) / (4 * p) - CASE_EPS), bool(A >= p - CASE_EPS)


# ---------------------------------------------------------------------------
# sweeps


def _sweep_points(cfg, choice, betas):
    pts, used = [], []
    for b2 in betas:
        rt = message_rates_two_sums(cfg, choice, (1.0, b2))
        if rt.feasible:
            pts.append(rt.rates)
            used.append(b2)
    return np.array(pts).reshape(-1, 2), np.array(used)


def dominant_face_sweep(cfg: ChannelConfig, n_samples: int = DEFAULT_SAMPLES) -> RegionCurve:
    """Rate pairs on the dominant face reached by A1 and A2.

    In case II both choices sweep the full root interval; in case III A1
    sweeps ``[beta2', beta2^(1)]`` and A2 sweeps ``[beta2^(2), beta2'']``.
    Interval endpoints are always sampled.
    """
    _require_connected(cfg)
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    label = classify(cfg)
    meta = {"case": label.case, "A": label.A_value, "C_sum": sum_capacity(cfg), "K": 2}
    if label.case == CASE_I:
        return RegionCurve(np.empty((0, 2)), label="dominant-face", meta=meta)
    lo, hi = beta_roots(cfg)
    b1, b2 = corner_betas(cfg)
    if label.case == CASE_III:
        spans = {str(A1): (lo, b1), str(A2): (b2, hi)}
    else:
        spans = {str(A1): (lo, hi), str(A2): (lo, hi)}
    segments = {}
    all_pts = []
    for choice in (A1, A2):
        start, stop = spans[str(choice)]
        betas = np.linspace(start, stop, n_samples)
        pts, used = _sweep_points(cfg, choice, betas)
        segments[str(choice)] = {"beta2": used, "points": pts, "interval": (start, stop)}
        all_pts.append(pts)
    pts = np.vstack(all_pts)
    order = np.argsort(pts[:, 0], kind="stable")
    meta.update(roots=(lo, hi), corner_betas=(b1, b2), segments=segments)
    return RegionCurve(pts[order], label="dominant-face", meta=meta)


def on_dominant_face(cfg: ChannelConfig, points, tol: float = 1e-9) -> np.ndarray:
    pts = np.atleast_2d(points)
    return np.abs(pts.sum(axis=1) - sum_capacity(cfg)) <= tol


def reaches_corners(cfg: ChannelConfig, points, tol: float = 1e-9) -> tuple[bool, bool]:
    c_a, c_b = corner_points(cfg)
    pts = np.atleast_2d(points)
    if pts.size == 0:
        return False, False
    hit = lambda c: bool(np.any(np.max(np.abs(pts - c), axis=1) <= tol))  # noqa: E731
    return hit(c_a), hit(c_b)


def coefficient_face_sweep(cfg: ChannelConfig, a, n_samples: int = DEFAULT_SAMPLES, tol: float = 1e-9) -> RegionCurve:
    """Dominant-face points reachable with first sum ``a`` and a unit second sum.

    Only second sums with ``|det| = 1`` can reach the face, and only for
    ``beta2`` between the roots of the generalized quadratic, so the sweep
    covers exactly that interval for each admissible ``b``.
    """
    _require_connected(cfg)
    a = tuple(int(x) for x in as_coefficients(a, 2))
    meta = {"a": a, "C_sum": sum_capacity(cfg), "K": 2, "segments": {}}
    roots = beta_roots(cfg, a)
    meta["roots"] = roots
    if roots is None:
        return RegionCurve(np.empty((0, 2)), label="coefficient-face", meta=meta)
    pts = []
    for b in ((0, 1), (1, 0)):
        choice = TwoSumChoice(a, b)
        if abs(choice.det) != 1:
            continue
        betas = np.linspace(roots[0], roots[1], n_samples)
        extra = [c for c in corner_betas(cfg, a) if roots[0] <= c <= roots[1]]
        betas = np.unique(np.concatenate([betas, extra]))
        seg, used = _sweep_points(cfg, choice, betas[betas != 0])
        on = on_dominant_face(cfg, seg, tol) if len(seg) else np.zeros(0, dtype=bool)
        meta["segments"][str(choice)] = {"beta2": used[on], "points": seg[on]}
        pts.append(seg[on])
    pts = np.vstack(pts) if pts else np.empty((0, 2))
    order = np.argsort(pts[:, 0], kind="stable")
    return RegionCurve(pts[order], label="coefficient-face", meta=meta)


def oracle_second_sum_rates(cfg: ChannelConfig, a, b, beta) -> np.ndarray:
    """Pre-clamp ``r_k(b|a)`` from a zooming grid search over ``(alpha2, lambda)``.

    Minimizes ``alpha2^2 + P sum_k (alpha2 h_k - (lambda a_k + b_k) beta_k)^2``
    directly rather than through the closed form.
    """
    from .oracle import zoom_min_2d

    choice = TwoSumChoice(tuple(np.asarray(a, dtype=int)), tuple(np.asarray(b, dtype=int)))
    beta = _beta_pair(beta)
    av, bv = np.asarray(choice.a, float), np.asarray(choice.b, float)
    scale = 2.0 * (1.0 + float(np.max(np.abs(beta))) * (1.0 + np.max(np.abs(bv))))
    n2, _ = zoom_min_2d(1.0, np.full(2, cfg.P), cfg.h, av * beta, bv * beta, half=(scale, scale))
    return 0.5 * np.log2(beta**2 * cfg.P / n2)
