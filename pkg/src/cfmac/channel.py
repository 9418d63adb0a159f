"""Problem instances, result carriers and MAC capacity geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

#: absolute tolerance used by identity checks throughout the package
IDENTITY_TOL = 1e-9
#: residual tolerance for root finding
ROOT_TOL = 1e-12

UNCONSTRAINED = "unconstrained"


@dataclass(frozen=True)
class ChannelConfig:
    """Real Gaussian MAC ``y = sum_k h_k x_k + z`` with common power ``P``.

    Unequal powers are expressed by scaling the gains,
    ``h_k -> sqrt(P_k / P) h_k``; see :meth:`with_powers`.
    """

    h: np.ndarray
    P: float

    def __post_init__(self):
        h = np.atleast_1d(np.asarray(self.h, dtype=float)).copy()
        if h.ndim != 1 or h.size < 1:
            raise ValueError("h must be a non-empty vector")
        if not np.all(np.isfinite(h)):
            raise ValueError("channel gains must be finite")
        P = float(self.P)
        if not (P > 0 and math.isfinite(P)):
            raise ValueError(f"power must be positive and finite, got {self.P!r}")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "P", P)

    @property
    def K(self) -> int:
        return int(self.h.size)

    @classmethod
    def with_powers(cls, h: Sequence[float], powers: Sequence[float], P: float | None = None):
        """Fold per-user powers into the gains against a reference power."""
        h = np.asarray(h, dtype=float)
        powers = np.asarray(powers, dtype=float)
        if h.shape != powers.shape:
            raise ValueError("h and powers must have the same length")
        if np.any(powers <= 0):
            raise ValueError("powers must be positive")
        P = float(powers.max() if P is None else P)
        return cls(h * np.sqrt(powers / P), P)


@dataclass
class RateTuple:
    """Per-user rates in bits per channel use.

    ``binding[k]`` names the decoded sum that limits user ``k``, or
    ``"unconstrained"`` when no decoded sum involves that user (its rate is
    then ``+inf``). ``feasible`` is False when the scheme's preconditions
    fail at the given parameters; the rates are then all zero.
    """

    rates: np.ndarray
    binding: list = field(default_factory=list)
    feasible: bool = True
    reason: str = ""

    def __post_init__(self):
        self.rates = np.asarray(self.rates, dtype=float)
        if self.rates.ndim != 1:
            raise ValueError("rates must be a vector")
        if np.any(np.isnan(self.rates)) or np.any(self.rates < 0):
            raise ValueError(f"rates must be nonnegative, got {self.rates}")
        if not self.binding:
            self.binding = [""] * self.rates.size
        if len(self.binding) != self.rates.size:
            raise ValueError("one binding tag per user is required")
        for k, r in enumerate(self.rates):
            if math.isinf(r) and self.binding[k] != UNCONSTRAINED:
                raise ValueError("only unconstrained users may carry an infinite rate")

    @property
    def K(self) -> int:
        return int(self.rates.size)

    @property
    def total(self) -> float:
        return float(self.rates.sum())

    @classmethod
    def infeasible(cls, K: int, reason: str) -> "RateTuple":
        return cls(np.zeros(K), ["infeasible"] * K, feasible=False, reason=reason)


@dataclass
class RegionCurve:
    """Ordered rate points tracing (part of) an achievable region."""

    points: np.ndarray
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, int(self.meta.get("K", 2)))
        if pts.ndim != 2:
            raise ValueError("points must be a 2-D array (n_points, K)")
        if np.any(pts < -1e-12):
            raise ValueError("rate points must be componentwise nonnegative")
        self.points = np.maximum(pts, 0.0)

    def __len__(self):
        return self.points.shape[0]

    @property
    def empty(self) -> bool:
        return self.points.shape[0] == 0


def log_plus(x: float) -> float:
    """``max(0, 0.5 * log2(x))`` for a positive ratio ``x``."""
    x = float(x)
    if not x > 0:
        raise ValueError(f"log_plus needs a positive argument, got {x}")
    return max(0.0, 0.5 * math.log2(x))


def half_log2(x):
    """Unclamped ``0.5 * log2(x)``, vectorized."""
    return 0.5 * np.log2(x)


def sum_capacity(cfg: ChannelConfig) -> float:
    return 0.5 * math.log2(1.0 + cfg.P * float(cfg.h @ cfg.h))


def single_user_capacities(cfg: ChannelConfig) -> np.ndarray:
    return 0.5 * np.log2(1.0 + cfg.P * cfg.h**2)


def capacity_region_2user(cfg: ChannelConfig) -> RegionCurve:
    """Vertices of the two-user MAC pentagon, counterclockwise from the origin.

    Repeated vertices (a disconnected user) are collapsed, so degenerate
    channels yield fewer than five points.
    """
    if cfg.K != 2:
        raise ValueError(f"capacity_region_2user needs K = 2, got K = {cfg.K}")
    c1, c2 = single_user_capacities(cfg)
    cs = sum_capacity(cfg)
    verts = [(0.0, 0.0), (c1, 0.0), (c1, cs - c1), (cs - c2, c2), (0.0, c2)]
    out = [verts[0]]
    for v in verts[1:]:
        if max(abs(v[0] - out[-1][0]), abs(v[1] - out[-1][1])) > 1e-15:
            out.append(v)
    if len(out) > 1 and max(abs(out[-1][0] - out[0][0]), abs(out[-1][1] - out[0][1])) <= 1e-15:
        out.pop()
    return RegionCurve(np.array(out), label="capacity", meta={"C_sum": cs, "C": (c1, c2)})


def corner_points(cfg: ChannelConfig) -> tuple[np.ndarray, np.ndarray]:
    """The two dominant-face corners: user 1 decoded last, user 2 decoded last."""
    c1, c2 = single_user_capacities(cfg)
    cs = sum_capacity(cfg)
    return np.array([c1, cs - c1]), np.array([cs - c2, c2])
