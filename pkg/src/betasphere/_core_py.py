"""Pure-Python kernels.

Reference implementations of the two hot loops: the transportation network
simplex and the Metropolis-within-Gibbs sweep.  ``_core.pyx`` is a typed
transcription of this file; both consume identical inputs and random streams,
so they can be cross-checked directly.
"""

import math

import numpy as np

BACKEND = "python"


# ---------------------------------------------------------------------------
# Network simplex on the complete bipartite graph
# ---------------------------------------------------------------------------
#
# Nodes 0..n1-1 are sources, n1..n1+n2-1 are sinks and n1+n2 is an artificial
# root.  Real arc e = i*n2 + j joins source i to sink j.  Artificial arcs
# n1*n2 + u join u to the root (sources, cost 0) or the root to u (sinks,
# cost ART).  Every arc is uncapacitated, so a non-tree arc always sits at
# flow zero.  Reduced cost of arc s->t is cost + pi[s] - pi[t].


def _remove_child(p, x, first_child, next_sib, prev_sib):
    pv = prev_sib[x]
    nx = next_sib[x]
    if pv != -1:
        next_sib[pv] = nx
    else:
        first_child[p] = nx
    if nx != -1:
        prev_sib[nx] = pv


def _add_child(p, x, first_child, next_sib, prev_sib):
    head = first_child[p]
    next_sib[x] = head
    prev_sib[x] = -1
    if head != -1:
        prev_sib[head] = x
    first_child[p] = x


def network_simplex(a, b, C, max_pivots=0):
    """Solve ``min <P, C>`` subject to ``P 1 = a, P^T 1 = b, P >= 0``.

    Parameters
    ----------
    a, b : ndarray
        Strictly positive marginals with equal sums.
    C : ndarray, shape (n1, n2)
        Cost matrix.
    max_pivots : int
        Pivot limit, 0 for none.

    Returns
    -------
    flow : ndarray, shape (n1, n2)
    u, v : ndarray
        Dual potentials with ``u_i + v_j <= C_ij``.
    pivots : int
    status : int
        0 optimal, 1 pivot limit reached.
    """
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    C = np.ascontiguousarray(C, dtype=float)
    n1, n2 = C.shape
    n = n1 + n2 + 1
    root = n - 1
    m_real = n1 * n2
    m = m_real + n1 + n2
    cost = C.ravel()
    art = (float(np.abs(cost).max()) + 1.0) * n
    eps = 1e-14 * art

    flow = np.zeros(m)
    in_tree = np.zeros(m, dtype=bool)
    in_tree[m_real:] = True
    parent = [-1] * n
    pred = [-1] * n
    up = [False] * n
    depth = [0] * n
    first_child = [-1] * n
    next_sib = [-1] * n
    prev_sib = [-1] * n
    pi = np.zeros(n)

    for u in range(n1 + n2):
        parent[u] = root
        pred[u] = m_real + u
        depth[u] = 1
        _add_child(root, u, first_child, next_sib, prev_sib)
        if u < n1:
            up[u] = True
            flow[m_real + u] = a[u]
            pi[u] = 0.0
        else:
            flow[m_real + u] = b[u - n1]
            pi[u] = art

    def endpoints(e):
        if e < m_real:
            return e // n2, n1 + e % n2, cost[e]
        u = e - m_real
        if u < n1:
            return u, root, 0.0
        return root, u, art

    block = max(10, int(math.sqrt(m)))
    next_arc = 0
    pivots = 0
    status = 0
    src_idx = np.repeat(np.arange(n1), n2)
    snk_idx = np.tile(np.arange(n1, n1 + n2), n1)
    art_cost = np.concatenate((np.zeros(n1), np.full(n2, art)))
    art_src = np.concatenate((np.arange(n1), np.full(n2, root)))
    art_tgt = np.concatenate((np.full(n1, root), np.arange(n1, n1 + n2)))
    all_cost = np.concatenate((cost, art_cost))
    all_src = np.concatenate((src_idx, art_src))
    all_tgt = np.concatenate((snk_idx, art_tgt))

    while True:
        if max_pivots and pivots >= max_pivots:
            status = 1
            break
        # block search pricing, vectorised per block
        entering = -1
        best = -eps
        scanned = 0
        start = next_arc
        while scanned < m:
            lo = start
            hi = min(lo + block, m)
            rc = all_cost[lo:hi] + pi[all_src[lo:hi]] - pi[all_tgt[lo:hi]]
            rc[in_tree[lo:hi]] = np.inf
            k = int(np.argmin(rc))
            if rc[k] < best:
                best = rc[k]
                entering = lo + k
            scanned += hi - lo
            start = hi % m
            if entering != -1:
                break
        if entering == -1:
            break
        next_arc = start
        e = entering
        s, t, c_e = endpoints(e)

        # join node
        x, y = s, t
        while depth[x] > depth[y]:
            x = parent[x]
        while depth[y] > depth[x]:
            y = parent[y]
        while x != y:
            x = parent[x]
            y = parent[y]
        join = x

        # leaving arc
        delta = math.inf
        u_out = -1
        result = 0
        x = s
        while x != join:
            if up[x]:
                d = flow[pred[x]]
                if d < delta:
                    delta = d
                    u_out = x
                    result = 1
            x = parent[x]
        x = t
        while x != join:
            if not up[x]:
                d = flow[pred[x]]
                if d <= delta:
                    delta = d
                    u_out = x
                    result = 2
            x = parent[x]
        if result == 1:
            u_in, v_in = s, t
        else:
            u_in, v_in = t, s

        if delta > 0:
            flow[e] += delta
            x = s
            while x != join:
                flow[pred[x]] += -delta if up[x] else delta
                x = parent[x]
            x = t
            while x != join:
                flow[pred[x]] += delta if up[x] else -delta
                x = parent[x]
            flow[pred[u_out]] = 0.0

        in_tree[pred[u_out]] = False
        in_tree[e] = True

        # re-hang the subtree of u_out from u_in below v_in
        stem = [u_in]
        while stem[-1] != u_out:
            stem.append(parent[stem[-1]])
        _remove_child(parent[u_out], u_out, first_child, next_sib, prev_sib)
        for i in range(len(stem) - 1):
            _remove_child(stem[i + 1], stem[i], first_child, next_sib, prev_sib)
        old_pred = [pred[w] for w in stem]
        old_up = [up[w] for w in stem]
        for i in range(len(stem) - 1):
            w, nxt = stem[i], stem[i + 1]
            parent[nxt] = w
            pred[nxt] = old_pred[i]
            up[nxt] = not old_up[i]
            _add_child(w, nxt, first_child, next_sib, prev_sib)
        parent[u_in] = v_in
        pred[u_in] = e
        up[u_in] = u_in == s
        _add_child(v_in, u_in, first_child, next_sib, prev_sib)

        sigma = pi[v_in] - pi[u_in] - (c_e if up[u_in] else -c_e)
        stack = [u_in]
        while stack:
            x = stack.pop()
            pi[x] += sigma
            depth[x] = depth[parent[x]] + 1
            ch = first_child[x]
            while ch != -1:
                stack.append(ch)
                ch = next_sib[ch]
        pivots += 1

    u_pot = -pi[:n1]
    v_pot = pi[n1:n1 + n2].copy()
    return flow[:m_real].reshape(n1, n2), u_pot, v_pot, pivots, status


# ---------------------------------------------------------------------------
# Metropolis-within-Gibbs sweeps
# ---------------------------------------------------------------------------


def weighted_column(p, logc):
    """Weighted orthonormal basis evaluated at the unit vector ``p``.

    Entry i is ``exp(logc[i]) * a^(i/2) (1-a)^((k-1-i)/2) e^(i i theta)`` with
    ``a = (1 + p_z)/2``; this is ``e_i(x) (1+|x|^2)^(-(k-1)/2)``.
    """
    k = logc.shape[0]
    a = 0.5 * (1.0 + p[2])
    b = 0.5 * (1.0 - p[2])
    i = np.arange(k)
    with np.errstate(divide="ignore", invalid="ignore"):
        la = np.where(i > 0, 0.5 * i * math.log(a) if a > 0 else -np.inf, 0.0)
        lb = np.where(i < k - 1, 0.5 * (k - 1 - i) * math.log(b) if b > 0 else -np.inf, 0.0)
    theta = math.atan2(p[1], p[0])
    return np.exp(logc + la + lb) * np.exp(1j * theta * i)


def _section_matrix(P, logc):
    return np.column_stack([weighted_column(p, logc) for p in P])


def _refresh(P, logc):
    M = _section_matrix(P, logc)
    Minv = np.linalg.inv(M)
    sign, logdet = np.linalg.slogdet(M)
    return Minv, float(logdet)


def _propose(p, r, step):
    g = r[1:4]
    if r[0] < 0.8:
        t = g - np.dot(g, p) * p
        q = p + step * t
    else:
        q = g
    nrm = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2])
    return q / nrm


def mcmc_sweeps(P, Minv, logc, beta, step, order, rnd, min_sep=0.0):
    """Run ``order.shape[0]`` sweeps in place.

    Parameters
    ----------
    P : ndarray, shape (k, 3)
        Current unit vectors, updated in place.
    Minv : ndarray, shape (k, k) complex
        Inverse of the weighted section matrix (rows basis, columns points);
        updated in place.
    logc : ndarray, shape (k,)
        ``0.5 * log(k * binom(k-1, i))``.
    beta, step : float
    order : ndarray of int, shape (n_sweeps, k)
        Site visiting order per sweep.
    rnd : ndarray, shape (n_sweeps, k, 5)
        Per proposal: mixture uniform, three normals, acceptance uniform.
    min_sep : float
        Proposals closer than this (Euclidean) to another point are rejected.

    Returns
    -------
    accepted : int
    log_rho_trace : ndarray, shape (n_sweeps,)
        log|det M| after each sweep.
    max_residual : float
        Largest inverse residual observed before a refresh.
    """
    k = P.shape[0]
    n_sweeps = order.shape[0]
    accepted = 0
    since_refresh = 0
    trace = np.empty(n_sweeps)
    M = _section_matrix(P, logc)
    log_rho = float(np.linalg.slogdet(M)[1])
    max_res = 0.0
    for s in range(n_sweeps):
        for idx in range(k):
            j = order[s, idx]
            r = rnd[s, idx]
            q = _propose(P[j], r, step)
            if q[2] >= 1.0:
                continue
            diff = P - q
            dist2 = np.einsum("ij,ij->i", diff, diff)
            dist2[j] = np.inf
            if dist2.min() <= min_sep * min_sep:
                continue
            v = weighted_column(q, logc)
            uj = np.dot(Minv[j], v)
            mag = abs(uj)
            if mag == 0.0:
                continue
            lr = beta * math.log(mag)
            if lr < 0.0 and math.log(r[4]) >= lr:
                continue
            u = Minv @ v
            u[j] -= 1.0
            row = Minv[j].copy()
            Minv -= np.outer(u, row) / uj
            P[j] = q
            log_rho += math.log(mag)
            accepted += 1
            since_refresh += 1
            # the updated inverse must map the new column to e_j
            w = Minv @ v
            w[j] -= 1.0
            drift = np.abs(w).max()
            if since_refresh >= k or drift > 1e-6:
                M = _section_matrix(P, logc)
                res = np.abs(M @ Minv - np.eye(k)).max()
                max_res = max(max_res, res, drift)
                Minv[:], log_rho = _refresh(P, logc)
                since_refresh = 0
        trace[s] = log_rho
    return accepted, trace, max_res
