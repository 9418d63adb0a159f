"""Hot numeric kernels, each with a numba and a pure-numpy implementation.

The public names at the bottom of this module are bound to one of the two
implementations at import time (see :mod:`cfmac._accel`). Both variants are
kept importable under ``*_nb`` / ``*_np`` so tests and the benchmark can
compare them directly.

Conventions shared by all kernels:

* matrices are float64, C-contiguous;
* Cholesky pivots ``<= PIVOT_TOL`` count as a factorization failure;
* rates are in bits (log base 2).
"""

import math

import numpy as np

from ._accel import USE_NUMBA, jit

PIVOT_TOL = 1e-12


# ---------------------------------------------------------------------------
# Cholesky


def _chol_lower_py(M):
    n = M.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        s = M[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not s > PIVOT_TOL:
            return L, j
        d = math.sqrt(s)
        L[j, j] = d
        for i in range(j + 1, n):
            t = M[i, j]
            for k in range(j):
                t -= L[i, k] * L[j, k]
            L[i, j] = t / d
    return L, -1


_chol_lower_nb = jit(_chol_lower_py)


def _chol_lower_np(M):
    n = M.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        s = M[j, j] - L[j, :j] @ L[j, :j]
        if not s > PIVOT_TOL:
            return L, j
        d = math.sqrt(s)
        L[j, j] = d
        L[j + 1 :, j] = (M[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / d
    return L, -1


def _chol_diag_batch_py(Ms):
    m, n, _ = Ms.shape
    out = np.empty((m, n))
    L = np.empty((n, n))
    for b in range(m):
        ok = True
        for j in range(n):
            s = Ms[b, j, j]
            for k in range(j):
                s -= L[j, k] * L[j, k]
            if not s > PIVOT_TOL:
                ok = False
                break
            d = math.sqrt(s)
            L[j, j] = d
            for i in range(j + 1, n):
                t = Ms[b, i, j]
                for k in range(j):
                    t -= L[i, k] * L[j, k]
                L[i, j] = t / d
        if ok:
            for j in range(n):
                out[b, j] = L[j, j]
        else:
            for j in range(n):
                out[b, j] = np.nan
    return out


_chol_diag_batch_nb = jit(_chol_diag_batch_py)


def _chol_diag_batch_np(Ms):
    m, n, _ = Ms.shape
    L = np.zeros((m, n, n))
    bad = np.zeros(m, dtype=bool)
    for j in range(n):
        s = Ms[:, j, j] - np.einsum("bk,bk->b", L[:, j, :j], L[:, j, :j])
        bad |= ~(s > PIVOT_TOL)
        d = np.sqrt(np.where(bad, 1.0, s))
        L[:, j, j] = d
        t = Ms[:, j + 1 :, j] - np.einsum("bik,bk->bi", L[:, j + 1 :, :j], L[:, j, :j])
        L[:, j + 1 :, j] = t / d[:, None]
    out = np.diagonal(L, axis1=1, axis2=2).copy()
    out[bad] = np.nan
    return out


# ---------------------------------------------------------------------------
# K-user message rates over a batch of scaling vectors


def _k_user_rates_batch_py(A, betas, h, P):
    m, K = betas.shape
    hh = 0.0
    for k in range(K):
        hh += h[k] * h[k]
    c = P / (1.0 + P * hh)
    rates = np.empty((m, K))
    binding = np.empty((m, K), dtype=np.int64)
    G = np.empty((K, K))
    M = np.empty((K, K))
    L = np.empty((K, K))
    for b in range(m):
        # G = A B, M = G (I - c h h^T) G^T
        for i in range(K):
            for k in range(K):
                G[i, k] = A[i, k] * betas[b, k]
        for i in range(K):
            gi = 0.0
            for k in range(K):
                gi += G[i, k] * h[k]
            for j in range(i + 1):
                gj = 0.0
                s = 0.0
                for k in range(K):
                    gj += G[j, k] * h[k]
                    s += G[i, k] * G[j, k]
                M[i, j] = s - c * gi * gj
                M[j, i] = M[i, j]
        ok = True
        for j in range(K):
            s = M[j, j]
            for k in range(j):
                s -= L[j, k] * L[j, k]
            if not s > PIVOT_TOL:
                ok = False
                break
            d = math.sqrt(s)
            L[j, j] = d
            for i in range(j + 1, K):
                t = M[i, j]
                for k in range(j):
                    t -= L[i, k] * L[j, k]
                L[i, j] = t / d
        for k in range(K):
            best = np.inf
            arg = -1
            if ok:
                for ell in range(K):
                    if A[ell, k] != 0:
                        r = 0.5 * math.log2(betas[b, k] ** 2 / (L[ell, ell] * L[ell, ell]))
                        if r < 0.0:
                            r = 0.0
                        if r < best:
                            best = r
                            arg = ell
            else:
                best = np.nan
            rates[b, k] = best
            binding[b, k] = arg
    return rates, binding


_k_user_rates_batch_nb = jit(_k_user_rates_batch_py)


def _k_user_rates_batch_np(A, betas, h, P):
    m, K = betas.shape
    c = P / (1.0 + P * (h @ h))
    G = A[None, :, :] * betas[:, None, :]
    gh = G @ h
    M = G @ np.swapaxes(G, 1, 2) - c * gh[:, :, None] * gh[:, None, :]
    diag = _chol_diag_batch_np(M)
    with np.errstate(divide="ignore", invalid="ignore"):
        per_sum = 0.5 * np.log2(betas[:, None, :] ** 2 / diag[:, :, None] ** 2)
    per_sum = np.maximum(per_sum, 0.0)
    per_sum = np.where((A != 0)[None, :, :], per_sum, np.inf)
    binding = np.argmin(per_sum, axis=1)
    rates = np.take_along_axis(per_sum, binding[:, None, :], axis=1)[:, 0, :]
    binding = np.where(np.isinf(rates), -1, binding)
    failed = np.isnan(diag).any(axis=1)
    rates[failed] = np.nan
    binding[failed] = -1
    return rates, binding.astype(np.int64)


# ---------------------------------------------------------------------------
# Dense-grid minimization of sums of squared affine terms (oracle kernels)
#
#   N(x)    = c0 x^2 + sum_j w_j (x g_j - v_j)^2
#   N(x, y) = c0 x^2 + sum_j w_j (x g_j - y u_j - v_j)^2


def _quad_grid_min_1d_py(c0, w, g, v, xs):
    best = np.inf
    arg = 0.0
    for i in range(xs.shape[0]):
        x = xs[i]
        s = c0 * x * x
        for j in range(w.shape[0]):
            e = x * g[j] - v[j]
            s += w[j] * e * e
        if s < best:
            best = s
            arg = x
    return best, arg


_quad_grid_min_1d_nb = jit(_quad_grid_min_1d_py)


def _quad_grid_min_1d_np(c0, w, g, v, xs):
    # chunked so dense grids stay within memory
    best = np.inf
    arg = 0.0
    for start in range(0, xs.shape[0], 1 << 16):
        x = xs[start : start + (1 << 16)]
        e = x[:, None] * g[None, :] - v[None, :]
        s = c0 * x * x + (e * e) @ w
        i = int(np.argmin(s))
        if s[i] < best:
            best = float(s[i])
            arg = float(x[i])
    return best, arg


def _quad_grid_min_2d_py(c0, w, g, u, v, xs, ys):
    best = np.inf
    bx = 0.0
    by = 0.0
    for i in range(xs.shape[0]):
        x = xs[i]
        base = c0 * x * x
        for k in range(ys.shape[0]):
            y = ys[k]
            s = base
            for j in range(w.shape[0]):
                e = x * g[j] - y * u[j] - v[j]
                s += w[j] * e * e
            if s < best:
                best = s
                bx = x
                by = y
    return best, bx, by


_quad_grid_min_2d_nb = jit(_quad_grid_min_2d_py)


def _quad_grid_min_2d_np(c0, w, g, u, v, xs, ys):
    e = (
        xs[:, None, None] * g[None, None, :]
        - ys[None, :, None] * u[None, None, :]
        - v[None, None, :]
    )
    s = c0 * (xs * xs)[:, None] + (e * e) @ w
    i, k = np.unravel_index(int(np.argmin(s)), s.shape)
    return float(s[i, k]), float(xs[i]), float(ys[k])


# ---------------------------------------------------------------------------
# Dirty-MAC closed-form rates over a batch of (beta, gamma) parameters
#
# Returns pre-clamp r_k(a, gamma, beta) and r_k(b | a, gamma, beta) for k = 1, 2,
# shape (m, 2) each. Singular 2x2 normal equations fall back to lambda = 0.


def _dirty_rates_batch_py(P, Q, a, b, bet, gam):
    m = bet.shape[0]
    ra = np.empty((m, 2))
    rb = np.empty((m, 2))
    den1 = 1.0 + P[0] + P[1] + Q[0] + Q[1]
    for i in range(m):
        num = 0.0
        sq = 0.0
        for k in range(2):
            num += a[k] * bet[i, k] * P[k] + a[k] * gam[i, k] * Q[k]
            sq += a[k] * a[k] * (bet[i, k] ** 2 * P[k] + gam[i, k] ** 2 * Q[k])
        n1 = sq - num * num / den1
        s11 = den1
        s12 = 0.0
        s22 = 0.0
        t1 = 0.0
        t2 = 0.0
        c = 0.0
        for k in range(2):
            for j in range(2):
                if j == 0:
                    wt = P[k]
                    uu = a[k] * bet[i, k]
                    vv = b[k] * bet[i, k]
                else:
                    wt = Q[k]
                    uu = a[k] * gam[i, k]
                    vv = b[k] * gam[i, k]
                s12 -= wt * uu
                s22 += wt * uu * uu
                t1 += wt * vv
                t2 -= wt * uu * vv
                c += wt * vv * vv
        det = s11 * s22 - s12 * s12
        if det > 1e-14 * s11 * (s22 + 1e-300):
            al = (s22 * t1 - s12 * t2) / det
            lam = (s11 * t2 - s12 * t1) / det
        else:
            al = t1 / s11
            lam = 0.0
        n2 = c - (al * t1 + lam * t2)
        for k in range(2):
            sig = bet[i, k] ** 2 * P[k]
            ra[i, k] = 0.5 * math.log2(sig / n1) if n1 > 0 else np.inf
            rb[i, k] = 0.5 * math.log2(sig / n2) if n2 > 0 else np.inf
    return ra, rb


_dirty_rates_batch_nb = jit(_dirty_rates_batch_py)


def _dirty_rates_batch_np(P, Q, a, b, bet, gam):
    den1 = 1.0 + P.sum() + Q.sum()
    num = (a * bet * P + a * gam * Q).sum(axis=1)
    sq = (a * a * (bet**2 * P + gam**2 * Q)).sum(axis=1)
    n1 = sq - num * num / den1
    wt = np.concatenate([np.broadcast_to(P, bet.shape), np.broadcast_to(Q, gam.shape)], axis=1)
    uu = np.concatenate([a * bet, a * gam], axis=1)
    vv = np.concatenate([b * bet, b * gam], axis=1)
    s11 = den1
    s12 = -(wt * uu).sum(axis=1)
    s22 = (wt * uu * uu).sum(axis=1)
    t1 = (wt * vv).sum(axis=1)
    t2 = -(wt * uu * vv).sum(axis=1)
    c = (wt * vv * vv).sum(axis=1)
    det = s11 * s22 - s12 * s12
    regular = det > 1e-14 * s11 * (s22 + 1e-300)
    safe = np.where(regular, det, 1.0)
    al = np.where(regular, (s22 * t1 - s12 * t2) / safe, t1 / s11)
    lam = np.where(regular, (s11 * t2 - s12 * t1) / safe, 0.0)
    n2 = c - (al * t1 + lam * t2)
    sig = bet**2 * P
    with np.errstate(divide="ignore", invalid="ignore"):
        ra = np.where(n1[:, None] > 0, 0.5 * np.log2(sig / n1[:, None]), np.inf)
        rb = np.where(n2[:, None] > 0, 0.5 * np.log2(sig / n2[:, None]), np.inf)
    return ra, rb


# ---------------------------------------------------------------------------
# dispatch

if USE_NUMBA:
    chol_lower = _chol_lower_nb
    chol_diag_batch = _chol_diag_batch_nb
    k_user_rates_batch = _k_user_rates_batch_nb
    quad_grid_min_1d = _quad_grid_min_1d_nb
    quad_grid_min_2d = _quad_grid_min_2d_nb
    dirty_rates_batch = _dirty_rates_batch_nb
else:
    chol_lower = _chol_lower_np
    chol_diag_batch = _chol_diag_batch_np
    k_user_rates_batch = _k_user_rates_batch_np
    quad_grid_min_1d = _quad_grid_min_1d_np
    quad_grid_min_2d = _quad_grid_min_2d_np
    dirty_rates_batch = _dirty_rates_batch_np

IMPLEMENTATIONS = {
    "chol_lower": (_chol_lower_nb, _chol_lower_np),
    "chol_diag_batch": (_chol_diag_batch_nb, _chol_diag_batch_np),
    "k_user_rates_batch": (_k_user_rates_batch_nb, _k_user_rates_batch_np),
    "quad_grid_min_1d": (_quad_grid_min_1d_nb, _quad_grid_min_1d_np),
    "quad_grid_min_2d": (_quad_grid_min_2d_nb, _quad_grid_min_2d_np),
    "dirty_rates_batch": (_dirty_rates_batch_nb, _dirty_rates_batch_np),
}
