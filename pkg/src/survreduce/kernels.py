"""Hot loops, each written twice: a numba ``@njit`` version (``*_nb``) and a
vectorised numpy version (``*_np``). The public wrappers dispatch on
:func:`survreduce._accel.use_numba`.
"""
import numpy as np

from ._accel import njit, use_numba


# leave-one-out Kaplan-Meier ---------------------------------------------------

@njit
def _loo_km_nb(u, n_risk, d, pos, status, taus):
    n = pos.shape[0]
    m = u.shape[0]
    K = taus.shape[0]
    surv = np.empty((n, K))
    area = np.empty((n, K))
    for i in range(n):
        s = 1.0
        prev = 0.0
        acc = 0.0
        k = 0
        for l in range(m + 1):
            t = u[l] if l < m else np.inf
            while k < K and taus[k] < t:
                surv[i, k] = s
                area[i, k] = acc + s * (taus[k] - prev)
                k += 1
            if l == m:
                break
            acc += s * (t - prev)
            prev = t
            r = n_risk[l] - (1.0 if l <= pos[i] else 0.0)
            e = d[l] - (status[i] if l == pos[i] else 0.0)
            if r > 0:
                s *= 1.0 - e / r
        while k < K:
            surv[i, k] = s
            area[i, k] = acc + s * (taus[k] - prev)
            k += 1
    return surv, area


def _loo_km_np(u, n_risk, d, pos, status, taus):
    n, m = len(pos), len(u)
    cols = np.arange(m)
    r = n_risk[None, :] - (cols[None, :] <= pos[:, None])
    e = d[None, :] - status[:, None] * (cols[None, :] == pos[:, None])
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(r > 0, 1.0 - e / np.where(r > 0, r, 1.0), 1.0)
    s = np.cumprod(f, axis=1)
    # survival on [u_l, u_{l+1}) is s[:, l]; before u_0 it is 1
    s_full = np.concatenate([np.ones((n, 1)), s], axis=1)
    edges = np.concatenate([[0.0], u])
    seg = np.diff(edges)
    acc = np.concatenate([np.zeros((n, 1)), np.cumsum(s_full[:, :-1] * seg[None, :], axis=1)],
                         axis=1)
    idx = np.searchsorted(u, taus, side="right")
    surv = s_full[:, idx]
    area = acc[:, idx] + surv * (taus - edges[idx])[None, :]
    return surv, area


def loo_km(u, n_risk, d, pos, status, taus):
    """Kaplan-Meier survival and restricted mean at ``taus`` with subject ``i``
    removed, for every ``i``.

    ``u`` are the sorted unique observed times with risk-set sizes ``n_risk``
    and event counts ``d``; subject ``i`` sits at ``u[pos[i]]``.
    """
    args = (np.asarray(u, float), np.asarray(n_risk, float), np.asarray(d, float),
            np.asarray(pos, np.int64), np.asarray(status, float), np.asarray(taus, float))
    return (_loo_km_nb if use_numba() else _loo_km_np)(*args)


# leave-one-out competing-risks CIF -------------------------------------------

@njit
def _loo_cif_nb(u, n_risk, dk, pos, cause, taus):
    n = pos.shape[0]
    m, q = dk.shape
    K = taus.shape[0]
    out = np.empty((n, K, q))
    cif = np.empty(q)
    for i in range(n):
        s = 1.0
        for c in range(q):
            cif[c] = 0.0
        k = 0
        for l in range(m + 1):
            t = u[l] if l < m else np.inf
            while k < K and taus[k] < t:
                for c in range(q):
                    out[i, k, c] = cif[c]
                k += 1
            if l == m:
                break
            r = n_risk[l] - (1.0 if l <= pos[i] else 0.0)
            if r <= 0:
                continue
            tot = 0.0
            for c in range(q):
                e = dk[l, c] - (1.0 if (l == pos[i] and cause[i] == c + 1) else 0.0)
                cif[c] += s * e / r
                tot += e
            s *= 1.0 - tot / r
        while k < K:
            for c in range(q):
                out[i, k, c] = cif[c]
            k += 1
    return out


def _loo_cif_np(u, n_risk, dk, pos, cause, taus):
    n, m, q = len(pos), len(u), dk.shape[1]
    cols = np.arange(m)
    r = n_risk[None, :] - (cols[None, :] <= pos[:, None])
    at = cols[None, :] == pos[:, None]
    e = dk[None, :, :] - (at[:, :, None] & (cause[:, None, None] == np.arange(1, q + 1)))
    safe = np.where(r > 0, r, 1.0)
    tot = np.zeros((n, m))
    for c in range(q):
        tot = tot + e[:, :, c]
    f = np.where(r > 0, 1.0 - tot / safe, 1.0)
    s_prev = np.concatenate([np.ones((n, 1)), np.cumprod(f, axis=1)[:, :-1]], axis=1)
    inc = np.where((r > 0)[:, :, None], s_prev[:, :, None] * e / safe[:, :, None], 0.0)
    cif = np.concatenate([np.zeros((n, 1, q)), np.cumsum(inc, axis=1)], axis=1)
    idx = np.searchsorted(u, taus, side="right")
    return cif[:, idx, :]


def loo_cif(u, n_risk, dk, pos, cause, taus):
    """Aalen-Johansen cause-specific CIFs at ``taus`` leaving out each subject.

    ``dk[l, c]`` counts cause ``c + 1`` events at ``u[l]``; ``cause[i]`` is the
    subject's cause code (0 when censored). Returns an ``(n, K, q)`` array.
    """
    args = (np.asarray(u, float), np.asarray(n_risk, float), np.asarray(dk, float),
            np.asarray(pos, np.int64), np.asarray(cause, np.int64), np.asarray(taus, float))
    return (_loo_cif_nb if use_numba() else _loo_cif_np)(*args)


# CRM pairwise targets --------------------------------------------------------

@njit
def _crm_pair(ti, di, si, tj, dj, sj):
    # probability that subject i fails before subject j; i is the canonical side
    if di == 1 and dj == 1:
        if ti < tj:
            return 1.0
        if ti > tj:
            return 0.0
        return 0.5
    if di == 1:
        if ti <= tj:
            return 1.0
        return si / sj if sj > 0 else 0.0
    if dj == 1:
        if tj <= ti:
            return 0.0
        return 1.0 - (sj / si if si > 0 else 0.0)
    if ti <= tj:
        return 1.0 - (sj / (2.0 * si) if si > 0 else 0.5)
    return si / (2.0 * sj) if sj > 0 else 0.5


@njit
def _crm_matrix_nb(t, d, s):
    n = t.shape[0]
    P = np.empty((n, n))
    for i in range(n):
        P[i, i] = 0.0
        for j in range(i + 1, n):
            p = _crm_pair(t[i], d[i], s[i], t[j], d[j], s[j])
            P[i, j] = p
            P[j, i] = 1.0 - p
    return P


def _crm_matrix_np(t, d, s):
    n = len(t)
    ti, tj = t[:, None], t[None, :]
    di, dj = d[:, None] == 1, d[None, :] == 1
    si, sj = s[:, None], s[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio_ij = np.where(sj > 0, si / np.where(sj > 0, sj, 1.0), 0.0)
        ratio_ji = np.where(si > 0, sj / np.where(si > 0, si, 1.0), 0.0)
        half_ji = np.where(si > 0, sj / (2.0 * np.where(si > 0, si, 1.0)), 0.5)
        half_ij = np.where(sj > 0, si / (2.0 * np.where(sj > 0, sj, 1.0)), 0.5)
    both = np.where(ti < tj, 1.0, np.where(ti > tj, 0.0, 0.5))
    i_only = np.where(ti <= tj, 1.0, ratio_ij)
    j_only = np.where(tj <= ti, 0.0, 1.0 - ratio_ji)
    neither = np.where(ti <= tj, 1.0 - half_ji, half_ij)
    P = np.where(di & dj, both, np.where(di, i_only, np.where(dj, j_only, neither)))
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    P = np.where(upper, P, 0.0)
    return P + np.where(upper.T, 1.0 - P.T, 0.0)


def crm_matrix(t, d, s):
    """Pairwise probabilities ``P[i, j]`` that subject ``i`` fails first.

    ``s[i]`` is the marginal Kaplan-Meier survival at ``t[i]``. Only the upper
    triangle is evaluated; the lower one is ``1 - P.T`` so ``P + P.T = 1``
    off the diagonal.
    """
    args = (np.asarray(t, float), np.asarray(d, np.int64), np.asarray(s, float))
    return (_crm_matrix_nb if use_numba() else _crm_matrix_np)(*args)


# Harrell's C -----------------------------------------------------------------

@njit
def _harrell_nb(risk, t, d):
    n = t.shape[0]
    conc = 0.0
    comp = 0.0
    for i in range(n):
        if d[i] != 1:
            continue
        for j in range(n):
            if t[i] < t[j]:
                comp += 1.0
                if risk[i] > risk[j]:
                    conc += 1.0
                elif risk[i] == risk[j]:
                    conc += 0.5
    return conc, comp


def _harrell_np(risk, t, d, chunk=512):
    conc = 0.0
    comp = 0.0
    events = np.flatnonzero(d == 1)
    for start in range(0, len(events), chunk):
        ev = events[start:start + chunk]
        mask = t[ev, None] < t[None, :]
        ri = risk[ev, None]
        c = (mask & (ri > risk[None, :])).sum() + 0.5 * (mask & (ri == risk[None, :])).sum()
        conc += float(c)
        comp += float(mask.sum())
    return conc, comp


def harrell_counts(risk, t, d):
    """(concordant, comparable) pair counts; risk ties count one half."""
    args = (np.asarray(risk, float), np.asarray(t, float), np.asarray(d, np.int64))
    return (_harrell_nb if use_numba() else _harrell_np)(*args)


# gradient-boosted tree split search ------------------------------------------

@njit
def _best_splits_nb(X, order, g, h, node, n_nodes, lam, min_leaf, gamma):
    n, p = X.shape
    GT = np.zeros(n_nodes)
    HT = np.zeros(n_nodes)
    CT = np.zeros(n_nodes, dtype=np.int64)
    for r in range(n):
        k = node[r]
        if k >= 0:
            GT[k] += g[r]
            HT[k] += h[r]
            CT[k] += 1
    best = np.full(n_nodes, -np.inf)
    col = np.full(n_nodes, -1, dtype=np.int64)
    thr = np.zeros(n_nodes)
    GL = np.zeros(n_nodes)
    HL = np.zeros(n_nodes)
    CL = np.zeros(n_nodes, dtype=np.int64)
    last = np.zeros(n_nodes)
    for c in range(p):
        GL[:] = 0.0
        HL[:] = 0.0
        CL[:] = 0
        for t in range(n):
            r = order[c, t]
            k = node[r]
            if k < 0:
                continue
            x = X[r, c]
            if CL[k] >= min_leaf and CT[k] - CL[k] >= min_leaf and x > last[k]:
                GR = GT[k] - GL[k]
                HR = HT[k] - HL[k]
                gain = (GL[k] * GL[k] / (HL[k] + lam) + GR * GR / (HR + lam)
                        - GT[k] * GT[k] / (HT[k] + lam))
                if gain > gamma and gain > best[k]:
                    best[k] = gain
                    col[k] = c
                    mid = 0.5 * (last[k] + x)
                    thr[k] = mid if mid < x else last[k]
            GL[k] += g[r]
            HL[k] += h[r]
            CL[k] += 1
            last[k] = x
    return best, col, thr


def _best_splits_np(X, order, g, h, node, n_nodes, lam, min_leaf, gamma):
    best = np.full(n_nodes, -np.inf)
    col = np.full(n_nodes, -1, dtype=np.int64)
    thr = np.zeros(n_nodes)
    active = node >= 0
    # totals accumulate in row order, as in the compiled kernel
    GT = np.bincount(node[active], weights=g[active], minlength=n_nodes)
    HT = np.bincount(node[active], weights=h[active], minlength=n_nodes)
    for c in range(X.shape[1]):
        idx = order[c]
        nd = node[idx]
        idx = idx[nd >= 0]
        nd = node[idx]
        grouped = idx[np.argsort(nd, kind="stable")]
        nd = node[grouped]
        bounds = np.searchsorted(nd, np.arange(n_nodes + 1))
        for k in range(n_nodes):
            rows = grouped[bounds[k]:bounds[k + 1]]
            m = len(rows)
            if m < 2 * max(min_leaf, 1):
                continue
            x = X[rows, c]
            cg = np.cumsum(g[rows])
            ch = np.cumsum(h[rows])
            GT_, HT_ = GT[k], HT[k]
            # candidate between position t-1 and t: left holds rows [0, t)
            t = np.arange(1, m)
            ok = (t >= min_leaf) & (m - t >= min_leaf) & (x[1:] > x[:-1])
            if not ok.any():
                continue
            GLv, HLv = cg[:-1][ok], ch[:-1][ok]
            GRv, HRv = GT_ - GLv, HT_ - HLv
            gain = GLv * GLv / (HLv + lam) + GRv * GRv / (HRv + lam) - GT_ * GT_ / (HT_ + lam)
            a = int(np.argmax(gain))
            if gain[a] > gamma and gain[a] > best[k]:
                best[k] = gain[a]
                col[k] = c
                lo, hi = x[:-1][ok][a], x[1:][ok][a]
                mid = 0.5 * (lo + hi)
                thr[k] = mid if mid < hi else lo
    return best, col, thr


def best_splits(X, order, g, h, node, n_nodes, lam, min_leaf, gamma=0.0):
    """Exact greedy split per active node over presorted columns.

    ``node[r]`` is the current-level node of row ``r`` (-1 = inactive). Ties go
    to the lowest column, then the lowest threshold. Returns (gain, column,
    threshold) per node; column -1 means no admissible split.
    """
    args = (np.asarray(X, float), np.asarray(order, np.int64), np.asarray(g, float),
            np.asarray(h, float), np.asarray(node, np.int64), int(n_nodes), float(lam),
            max(int(min_leaf), 1), float(gamma))
    return (_best_splits_nb if use_numba() else _best_splits_np)(*args)


@njit
def _tree_predict_nb(X, feature, threshold, left, right, value, roots, n_trees):
    n = X.shape[0]
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for t in range(n_trees):
            k = roots[t]
            while feature[k] >= 0:
                if X[i, feature[k]] <= threshold[k]:
                    k = left[k]
                else:
                    k = right[k]
            acc += value[k]
        out[i] = acc
    return out


def _tree_predict_np(X, feature, threshold, left, right, value, roots, n_trees):
    n = X.shape[0]
    out = np.zeros(n)
    rows = np.arange(n)
    for t in range(n_trees):
        k = np.full(n, roots[t])
        while True:
            f = feature[k]
            inner = f >= 0
            if not inner.any():
                break
            xv = X[rows[inner], f[inner]]
            k[inner] = np.where(xv <= threshold[k[inner]], left[k[inner]], right[k[inner]])
        out = out + value[k]
    return out


def tree_predict(X, feature, threshold, left, right, value, roots, n_trees):
    """Sum of leaf values of the first ``n_trees`` trees of a flat forest."""
    args = (np.asarray(X, float), np.asarray(feature, np.int64), np.asarray(threshold, float),
            np.asarray(left, np.int64), np.asarray(right, np.int64), np.asarray(value, float),
            np.asarray(roots, np.int64), int(n_trees))
    return (_tree_predict_nb if use_numba() else _tree_predict_np)(*args)
