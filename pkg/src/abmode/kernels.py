"""Hot loops of the simulated likelihood and of draw-averaged prediction.

Every kernel exists twice: a numba version parallel over individuals (or
rows) and a vectorized numpy version. Each individual's contribution is
computed independently and reduced afterwards in a fixed order, so results
do not depend on the thread count. ``ABMODE_DISABLE_NUMBA=1`` selects the
numpy path.
"""
from __future__ import annotations

import numpy as np

from . import _accel
from ._accel import njit, prange

# ---------------------------------------------------------------------------
# numba
# ---------------------------------------------------------------------------


@njit(parallel=True, cache=True)
def _panel_numba(X, avail, chosen, starts, counts, beta, rand_idx, sd, xi, eff, eff_mask, extra, want_grad):
    n_ind = starts.shape[0]
    R = eff.shape[1]
    K = X.shape[2]
    J = X.shape[1]
    Q = rand_idx.shape[0]
    ll = np.empty(n_ind)
    g_beta = np.zeros((n_ind, K))
    g_sd = np.zeros((n_ind, Q))
    w_out = np.zeros((n_ind, R))
    de_out = np.zeros((n_ind, R))
    for i in prange(n_ind):
        s = np.empty(R)
        gr = np.zeros((R, K))
        b = np.empty(K)
        v = np.empty(J)
        p = np.empty(J)
        for r in range(R):
            for k in range(K):
                b[k] = beta[k]
            for q in range(Q):
                b[rand_idx[q]] += sd[q] * xi[i, r, q]
            tot = 0.0
            de = 0.0
            for t in range(starts[i], starts[i] + counts[i]):
                vmax = -np.inf
                for j in range(J):
                    if avail[t, j]:
                        acc = eff[i, r] * eff_mask[j]
                        for k in range(K):
                            acc += X[t, j, k] * b[k]
                        v[j] = acc
                        if acc > vmax:
                            vmax = acc
                den = 0.0
                for j in range(J):
                    if avail[t, j]:
                        p[j] = np.exp(v[j] - vmax)
                        den += p[j]
                    else:
                        p[j] = 0.0
                c = chosen[t]
                tot += v[c] - vmax - np.log(den)
                if want_grad:
                    de += eff_mask[c]
                    for j in range(J):
                        if avail[t, j]:
                            pj = p[j] / den
                            de -= pj * eff_mask[j]
                            for k in range(K):
                                gr[r, k] -= pj * X[t, j, k]
                    for k in range(K):
                        gr[r, k] += X[t, c, k]
            s[r] = tot + extra[i, r]
            de_out[i, r] = de
        smax = s.max()
        sw = 0.0
        for r in range(R):
            s[r] = np.exp(s[r] - smax)
            sw += s[r]
        ll[i] = smax + np.log(sw) - np.log(R)
        if want_grad:
            for r in range(R):
                wr = s[r] / sw
                w_out[i, r] = wr
                for k in range(K):
                    g_beta[i, k] += wr * gr[r, k]
                for q in range(Q):
                    g_sd[i, q] += wr * gr[r, rand_idx[q]] * xi[i, r, q]
    return ll, g_beta, g_sd, w_out, de_out


@njit(parallel=True, cache=True)
def _mean_probs_numba(X, avail, ind_of_row, beta, rand_idx, sd, xi, eff, eff_mask):
    n = X.shape[0]
    J = X.shape[1]
    K = X.shape[2]
    R = eff.shape[1]
    Q = rand_idx.shape[0]
    out = np.zeros((n, J))
    for t in prange(n):
        i = ind_of_row[t]
        b = np.empty(K)
        v = np.empty(J)
        for r in range(R):
            for k in range(K):
                b[k] = beta[k]
            for q in range(Q):
                b[rand_idx[q]] += sd[q] * xi[i, r, q]
            vmax = -np.inf
            for j in range(J):
                if avail[t, j]:
                    acc = eff[i, r] * eff_mask[j]
                    for k in range(K):
                        acc += X[t, j, k] * b[k]
                    v[j] = acc
                    if acc > vmax:
                        vmax = acc
            den = 0.0
            for j in range(J):
                if avail[t, j]:
                    v[j] = np.exp(v[j] - vmax)
                    den += v[j]
            for j in range(J):
                if avail[t, j]:
                    out[t, j] += v[j] / den
        for j in range(J):
            out[t, j] /= R
    return out


# ---------------------------------------------------------------------------
# numpy
# ---------------------------------------------------------------------------


def _draw_utilities(X, avail, ind_of_row, beta, rand_idx, sd, xi, eff, eff_mask):
    """Utilities shaped (rows, R, J) with unavailable entries at -inf."""
    base = X @ beta
    V = base[:, None, :] + eff[ind_of_row][:, :, None] * eff_mask[None, None, :]
    for q in range(len(rand_idx)):
        V = V + X[:, None, :, rand_idx[q]] * (sd[q] * xi[ind_of_row, :, q])[:, :, None]
    return np.where(avail[:, None, :], V, -np.inf)


def _softmax(V):
    vmax = V.max(axis=-1, keepdims=True)
    e = np.exp(V - vmax)
    den = e.sum(axis=-1, keepdims=True)
    return e / den, (vmax + np.log(den))[..., 0]


def _panel_numpy(X, avail, chosen, starts, counts, beta, rand_idx, sd, xi, eff, eff_mask, extra, want_grad):
    n_ind = len(starts)
    R = eff.shape[1]
    K = X.shape[2]
    Q = len(rand_idx)
    ll = np.empty(n_ind)
    g_beta = np.zeros((n_ind, K))
    g_sd = np.zeros((n_ind, Q))
    w_out = np.zeros((n_ind, R))
    de_out = np.zeros((n_ind, R))
    rows_per_ind = max(1, int(np.max(counts))) if n_ind else 1
    chunk = max(1, int(2e5 // (R * rows_per_ind)))
    for a in range(0, n_ind, chunk):
        b = min(n_ind, a + chunk)
        lo, hi = starts[a], starts[b - 1] + counts[b - 1]
        local = np.repeat(np.arange(b - a), counts[a:b])
        Xc = X[lo:hi]
        ch = chosen[lo:hi]
        V = _draw_utilities(Xc, avail[lo:hi], local, beta, rand_idx, sd, xi[a:b], eff[a:b], eff_mask)
        P, lse = _softmax(V)
        rows = np.arange(hi - lo)
        logp = V[rows, :, ch] - lse
        seg = starts[a:b] - lo
        s = np.add.reduceat(logp, seg, axis=0) + extra[a:b]
        smax = s.max(axis=1, keepdims=True)
        e = np.exp(s - smax)
        sw = e.sum(axis=1)
        ll[a:b] = smax[:, 0] + np.log(sw) - np.log(R)
        if want_grad:
            w = e / sw[:, None]
            w_out[a:b] = w
            G = Xc[rows, ch, :][:, None, :] - np.einsum("trj,tjk->trk", P, Xc)
            Gi = np.add.reduceat(G, seg, axis=0)
            g_beta[a:b] = np.einsum("ir,irk->ik", w, Gi)
            for q in range(Q):
                g_sd[a:b, q] = np.einsum("ir,ir->i", w, Gi[:, :, rand_idx[q]] * xi[a:b, :, q])
            de = eff_mask[ch][:, None] - P @ eff_mask
            de_out[a:b] = np.add.reduceat(de, seg, axis=0)
    return ll, g_beta, g_sd, w_out, de_out


def _mean_probs_numpy(X, avail, ind_of_row, beta, rand_idx, sd, xi, eff, eff_mask):
    n = X.shape[0]
    R = eff.shape[1]
    out = np.zeros((n, X.shape[1]))
    chunk = max(1, int(2e5 // R))
    for a in range(0, n, chunk):
        b = min(n, a + chunk)
        V = _draw_utilities(X[a:b], avail[a:b], ind_of_row[a:b], beta, rand_idx, sd, xi, eff, eff_mask)
        P, _ = _softmax(V)
        out[a:b] = P.mean(axis=1)
    return out


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def _prep(*arrays):
    return tuple(np.ascontiguousarray(a) for a in arrays)


def panel_loglik(X, avail, chosen, starts, counts, beta, rand_idx, sd, xi, eff, eff_mask, extra,
                 want_grad=True, backend=None):
    """Simulated panel log-likelihood per individual.

    For individual ``i`` and draw ``r`` the utilities are
    ``X[t] @ (beta + sd * xi[i, r])`` (random part on ``rand_idx``) plus
    ``eff[i, r] * eff_mask``. The draw's log-kernel is the sum over the
    individual's tasks of the chosen log-probability plus ``extra[i, r]``;
    ``ll[i]`` is the log of its draw average.

    Returns
    -------
    ll : (n_ind,) log-likelihood contributions
    g_beta : (n_ind, K) scores for ``beta``
    g_sd : (n_ind, Q) scores for ``sd``
    w : (n_ind, R) posterior draw weights
    de : (n_ind, R) derivative of each draw's choice log-kernel w.r.t. ``eff``
    """
    args = _prep(
        np.asarray(X, float), np.asarray(avail, bool), np.asarray(chosen, np.int64),
        np.asarray(starts, np.int64), np.asarray(counts, np.int64), np.asarray(beta, float),
        np.asarray(rand_idx, np.int64), np.asarray(sd, float), np.asarray(xi, float),
        np.asarray(eff, float), np.asarray(eff_mask, float), np.asarray(extra, float),
    )
    if _use_numba(backend):
        return _panel_numba(*args, bool(want_grad))
    return _panel_numpy(*args, bool(want_grad))


def mean_probabilities(X, avail, ind_of_row, beta, rand_idx, sd, xi, eff, eff_mask, backend=None):
    """Choice probabilities per row averaged over that row's individual's draws."""
    args = _prep(
        np.asarray(X, float), np.asarray(avail, bool), np.asarray(ind_of_row, np.int64),
        np.asarray(beta, float), np.asarray(rand_idx, np.int64), np.asarray(sd, float),
        np.asarray(xi, float), np.asarray(eff, float), np.asarray(eff_mask, float),
    )
    if _use_numba(backend):
        return _mean_probs_numba(*args)
    return _mean_probs_numpy(*args)


def _use_numba(backend):
    if backend is None:
        return _accel.USE_NUMBA
    if backend == "numba":
        if not _accel.HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is unavailable or disabled")
        return True
    if backend == "numpy":
        return False
    raise ValueError(f"unknown backend {backend!r}")
