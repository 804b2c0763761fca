# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; typed mirror of ``_core_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, exp, fabs, INFINITY
from scipy.linalg cimport cython_lapack, cython_blas

cnp.import_array()

BACKEND = "cython"


cdef inline void _remove_child(Py_ssize_t p, Py_ssize_t x, Py_ssize_t[::1] first_child,
                               Py_ssize_t[::1] next_sib, Py_ssize_t[::1] prev_sib) noexcept nogil:
    cdef Py_ssize_t pv = prev_sib[x]
    cdef Py_ssize_t nx = next_sib[x]
    if pv != -1:
        next_sib[pv] = nx
    else:
        first_child[p] = nx
    if nx != -1:
        prev_sib[nx] = pv


cdef inline void _add_child(Py_ssize_t p, Py_ssize_t x, Py_ssize_t[::1] first_child,
                            Py_ssize_t[::1] next_sib, Py_ssize_t[::1] prev_sib) noexcept nogil:
    cdef Py_ssize_t head = first_child[p]
    next_sib[x] = head
    prev_sib[x] = -1
    if head != -1:
        prev_sib[head] = x
    first_child[p] = x


def network_simplex(a, b, C, long max_pivots=0):
    """See ``_core_py.network_simplex``."""
    cdef double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    Cc = np.ascontiguousarray(C, dtype=np.float64)
    cdef Py_ssize_t n1 = Cc.shape[0], n2 = Cc.shape[1]
    cdef double[::1] cost = Cc.ravel()
    cdef Py_ssize_t n = n1 + n2 + 1
    cdef Py_ssize_t root = n - 1
    cdef Py_ssize_t m_real = n1 * n2
    cdef Py_ssize_t m = m_real + n1 + n2
    cdef double art = (float(np.abs(Cc).max()) + 1.0) * n
    cdef double eps = 1e-14 * art

    flow_arr = np.zeros(m)
    cdef double[::1] flow = flow_arr
    cdef unsigned char[::1] in_tree = np.zeros(m, dtype=np.uint8)
    cdef Py_ssize_t[::1] parent = np.full(n, -1, dtype=np.intp)
    cdef Py_ssize_t[::1] pred = np.full(n, -1, dtype=np.intp)
    cdef unsigned char[::1] up = np.zeros(n, dtype=np.uint8)
    cdef Py_ssize_t[::1] depth = np.zeros(n, dtype=np.intp)
    cdef Py_ssize_t[::1] first_child = np.full(n, -1, dtype=np.intp)
    cdef Py_ssize_t[::1] next_sib = np.full(n, -1, dtype=np.intp)
    cdef Py_ssize_t[::1] prev_sib = np.full(n, -1, dtype=np.intp)
    cdef Py_ssize_t[::1] stem = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] stem_pred = np.empty(n, dtype=np.intp)
    cdef unsigned char[::1] stem_up = np.empty(n, dtype=np.uint8)
    cdef Py_ssize_t[::1] stack = np.empty(n, dtype=np.intp)
    pi_arr = np.zeros(n)
    cdef double[::1] pi = pi_arr

    cdef Py_ssize_t u, e, s, t, x, y, join, u_out, u_in, v_in, i, j, ns, top, ch, w, nxt
    cdef Py_ssize_t entering, scanned, start, block, next_arc, cnt
    cdef double best, rc, c_e, delta, d, sigma
    cdef int result, status = 0
    cdef long pivots = 0

    for u in range(n1 + n2):
        parent[u] = root
        pred[u] = m_real + u
        depth[u] = 1
        in_tree[m_real + u] = 1
        _add_child(root, u, first_child, next_sib, prev_sib)
        if u < n1:
            up[u] = 1
            flow[m_real + u] = av[u]
            pi[u] = 0.0
        else:
            flow[m_real + u] = bv[u - n1]
            pi[u] = art

    block = <Py_ssize_t> sqrt(<double> m)
    if block < 10:
        block = 10
    next_arc = 0

    with nogil:
        while True:
            if max_pivots > 0 and pivots >= max_pivots:
                status = 1
                break
            # block search pricing
            entering = -1
            best = -eps
            scanned = 0
            e = next_arc
            cnt = 0
            while scanned < m:
                if not in_tree[e]:
                    if e < m_real:
                        i = e // n2
                        j = e - i * n2
                        rc = cost[e] + pi[i] - pi[n1 + j]
                    else:
                        u = e - m_real
                        if u < n1:
                            rc = pi[u] - pi[root]
                        else:
                            rc = art + pi[root] - pi[u]
                    if rc < best:
                        best = rc
                        entering = e
                scanned += 1
                cnt += 1
                e += 1
                if e == m:
                    e = 0
                if cnt == block:
                    if entering != -1:
                        break
                    cnt = 0
            if entering == -1:
                break
            next_arc = e
            e = entering
            if e < m_real:
                s = e // n2
                t = n1 + e - s * n2
                c_e = cost[e]
            else:
                u = e - m_real
                if u < n1:
                    s = u
                    t = root
                    c_e = 0.0
                else:
                    s = root
                    t = u
                    c_e = art

            x = s
            y = t
            while depth[x] > depth[y]:
                x = parent[x]
            while depth[y] > depth[x]:
                y = parent[y]
            while x != y:
                x = parent[x]
                y = parent[y]
            join = x

            delta = INFINITY
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
                u_in = s
                v_in = t
            else:
                u_in = t
                v_in = s

            if delta > 0:
                flow[e] += delta
                x = s
                while x != join:
                    if up[x]:
                        flow[pred[x]] -= delta
                    else:
                        flow[pred[x]] += delta
                    x = parent[x]
                x = t
                while x != join:
                    if up[x]:
                        flow[pred[x]] += delta
                    else:
                        flow[pred[x]] -= delta
                    x = parent[x]
                flow[pred[u_out]] = 0.0

            in_tree[pred[u_out]] = 0
            in_tree[e] = 1

            ns = 0
            stem[0] = u_in
            while stem[ns] != u_out:
                stem[ns + 1] = parent[stem[ns]]
                ns += 1
            ns += 1
            _remove_child(parent[u_out], u_out, first_child, next_sib, prev_sib)
            for i in range(ns - 1):
                _remove_child(stem[i + 1], stem[i], first_child, next_sib, prev_sib)
            for i in range(ns):
                stem_pred[i] = pred[stem[i]]
                stem_up[i] = up[stem[i]]
            for i in range(ns - 1):
                w = stem[i]
                nxt = stem[i + 1]
                parent[nxt] = w
                pred[nxt] = stem_pred[i]
                up[nxt] = 1 - stem_up[i]
                _add_child(w, nxt, first_child, next_sib, prev_sib)
            parent[u_in] = v_in
            pred[u_in] = e
            up[u_in] = 1 if u_in == s else 0
            _add_child(v_in, u_in, first_child, next_sib, prev_sib)

            if up[u_in]:
                sigma = pi[v_in] - pi[u_in] - c_e
            else:
                sigma = pi[v_in] - pi[u_in] + c_e
            top = 0
            stack[0] = u_in
            while top >= 0:
                x = stack[top]
                top -= 1
                pi[x] += sigma
                depth[x] = depth[parent[x]] + 1
                ch = first_child[x]
                while ch != -1:
                    top += 1
                    stack[top] = ch
                    ch = next_sib[ch]
            pivots += 1

    u_pot = -pi_arr[:n1]
    v_pot = pi_arr[n1:n1 + n2].copy()
    return flow_arr[:m_real].reshape(n1, n2), u_pot, v_pot, int(pivots), status


# ---------------------------------------------------------------------------
# Metropolis-within-Gibbs sweeps
# ---------------------------------------------------------------------------

cdef void _column(double px, double py, double pz, double[::1] logc,
                  double complex[::1] out) noexcept nogil:
    cdef Py_ssize_t k = logc.shape[0]
    cdef double a = 0.5 * (1.0 + pz)
    cdef double b = 0.5 * (1.0 - pz)
    cdef double la = log(a) if a > 0 else -INFINITY
    cdef double lb = log(b) if b > 0 else -INFINITY
    cdef double rho = sqrt(px * px + py * py)
    cdef double complex step, ph = 1.0
    cdef double ex
    cdef Py_ssize_t i
    if rho > 0:
        step = (px + 1j * py) / rho
    else:
        step = 1.0
    for i in range(k):
        ex = logc[i]
        if i > 0:
            ex += 0.5 * i * la
        if i < k - 1:
            ex += 0.5 * (k - 1 - i) * lb
        out[i] = exp(ex) * ph
        ph = ph * step


cdef double _refresh(double[:, ::1] P, double[::1] logc, double complex[:, ::1] Minv,
                     double complex[:, ::1] Mbuf, double complex[::1] col,
                     int[::1] ipiv, double complex[::1] work) noexcept nogil:
    """Rebuild Minv from scratch; returns log|det M| (NaN if singular)."""
    cdef int k = <int> P.shape[0]
    cdef int lwork = <int> work.shape[0]
    cdef int info = 0
    cdef Py_ssize_t i, j
    cdef double logdet = 0.0
    for j in range(k):
        _column(P[j, 0], P[j, 1], P[j, 2], logc, col)
        for i in range(k):
            Minv[i, j] = col[i]
    # a C-ordered buffer is the transpose for LAPACK; inv(M^T) read back in C order is inv(M)
    cython_lapack.zgetrf(&k, &k, &Minv[0, 0], &k, &ipiv[0], &info)
    if info != 0:
        return 0.0 / 0.0
    for i in range(k):
        logdet += log(sqrt(Minv[i, i].real * Minv[i, i].real + Minv[i, i].imag * Minv[i, i].imag))
    cython_lapack.zgetri(&k, &Minv[0, 0], &k, &ipiv[0], &work[0], &lwork, &info)
    if info != 0:
        return 0.0 / 0.0
    return logdet


cdef double _residual(double[:, ::1] P, double[::1] logc, double complex[:, ::1] Minv,
                      double complex[:, ::1] Mbuf, double complex[:, ::1] R,
                      double complex[::1] col) noexcept nogil:
    cdef int k = <int> P.shape[0]
    cdef Py_ssize_t i, j
    cdef double complex one = 1.0, zero = 0.0
    cdef double res = 0.0, r
    cdef char trans = b'N'
    for j in range(k):
        _column(P[j, 0], P[j, 1], P[j, 2], logc, col)
        for i in range(k):
            Mbuf[i, j] = col[i]
    # Fortran view: Minv^T @ M^T = (M @ Minv)^T, i.e. R in C order
    cython_blas.zgemm(&trans, &trans, &k, &k, &k, &one, &Minv[0, 0], &k, &Mbuf[0, 0], &k,
                      &zero, &R[0, 0], &k)
    for i in range(k):
        for j in range(k):
            if i == j:
                r = abs(R[i, j] - 1.0)
            else:
                r = abs(R[i, j])
            if r > res:
                res = r
    return res


def mcmc_sweeps(P_arr, Minv_arr, logc_arr, double beta, double step, order_arr, rnd_arr,
                double min_sep=0.0):
    """See ``_core_py.mcmc_sweeps``."""
    cdef double[:, ::1] P = P_arr
    cdef double complex[:, ::1] Minv = Minv_arr
    cdef double[::1] logc = np.ascontiguousarray(logc_arr, dtype=np.float64)
    cdef Py_ssize_t[:, ::1] order = np.ascontiguousarray(order_arr, dtype=np.intp)
    cdef double[:, :, ::1] rnd = np.ascontiguousarray(rnd_arr, dtype=np.float64)
    cdef Py_ssize_t k = P.shape[0]
    cdef Py_ssize_t n_sweeps = order.shape[0]
    trace_arr = np.empty(n_sweeps)
    cdef double[::1] trace = trace_arr
    cdef double complex[::1] v = np.empty(k, dtype=np.complex128)
    cdef double complex[::1] uvec = np.empty(k, dtype=np.complex128)
    cdef double complex[::1] row = np.empty(k, dtype=np.complex128)
    cdef double complex[:, ::1] Mbuf = np.empty((k, k), dtype=np.complex128)
    cdef double complex[:, ::1] R = np.empty((k, k), dtype=np.complex128)
    cdef double complex[:, ::1] Mnew = np.empty((k, k), dtype=np.complex128)
    cdef int[::1] ipiv = np.empty(k, dtype=np.intc)
    cdef double complex[::1] work = np.empty(max(1, 64 * k), dtype=np.complex128)

    cdef Py_ssize_t s, idx, j, i, c, r
    cdef double qx, qy, qz, gx, gy, gz, dot, nrm, dx, dy, dz, dist2, mag, lr, drift, res
    cdef double min_sep2 = min_sep * min_sep
    cdef double complex uj, acc, alpha
    cdef double complex one = 1.0, zero = 0.0
    cdef int ki = <int> k, inc = 1
    cdef char transT = b'T'
    cdef long accepted = 0, since_refresh = 0
    cdef double max_res = 0.0
    cdef bint reject
    cdef double log_rho

    log_rho = _refresh(P, logc, Mnew, Mbuf, v, ipiv, work)
    with nogil:
        for s in range(n_sweeps):
            for idx in range(k):
                j = order[s, idx]
                gx = rnd[s, idx, 1]
                gy = rnd[s, idx, 2]
                gz = rnd[s, idx, 3]
                if rnd[s, idx, 0] < 0.8:
                    dot = gx * P[j, 0] + gy * P[j, 1] + gz * P[j, 2]
                    qx = P[j, 0] + step * (gx - dot * P[j, 0])
                    qy = P[j, 1] + step * (gy - dot * P[j, 1])
                    qz = P[j, 2] + step * (gz - dot * P[j, 2])
                else:
                    qx = gx
                    qy = gy
                    qz = gz
                nrm = sqrt(qx * qx + qy * qy + qz * qz)
                qx /= nrm
                qy /= nrm
                qz /= nrm
                if qz >= 1.0:
                    continue
                reject = False
                for i in range(k):
                    if i == j:
                        continue
                    dx = P[i, 0] - qx
                    dy = P[i, 1] - qy
                    dz = P[i, 2] - qz
                    dist2 = dx * dx + dy * dy + dz * dz
                    if dist2 <= min_sep2:
                        reject = True
                        break
                if reject:
                    continue
                _column(qx, qy, qz, logc, v)
                uj = 0.0
                for c in range(k):
                    uj = uj + Minv[j, c] * v[c]
                mag = abs(uj)
                if mag == 0.0:
                    continue
                lr = beta * log(mag)
                if lr < 0.0 and log(rnd[s, idx, 4]) >= lr:
                    continue
                # Fortran view of the C-ordered Minv is its transpose
                cython_blas.zgemv(&transT, &ki, &ki, &one, &Minv[0, 0], &ki, &v[0], &inc,
                                  &zero, &uvec[0], &inc)
                uvec[j] = uvec[j] - 1.0
                for c in range(k):
                    row[c] = Minv[j, c]
                alpha = -1.0 / uj
                cython_blas.zgeru(&ki, &ki, &alpha, &row[0], &inc, &uvec[0], &inc,
                                  &Minv[0, 0], &ki)
                P[j, 0] = qx
                P[j, 1] = qy
                P[j, 2] = qz
                log_rho += log(mag)
                accepted += 1
                since_refresh += 1
                cython_blas.zgemv(&transT, &ki, &ki, &one, &Minv[0, 0], &ki, &v[0], &inc,
                                  &zero, &uvec[0], &inc)
                uvec[j] = uvec[j] - 1.0
                drift = 0.0
                for r in range(k):
                    if abs(uvec[r]) > drift:
                        drift = abs(uvec[r])
                if since_refresh >= k or drift > 1e-6:
                    res = _residual(P, logc, Minv, Mbuf, R, v)
                    if res > max_res:
                        max_res = res
                    if drift > max_res:
                        max_res = drift
                    log_rho = _refresh(P, logc, Minv, Mbuf, v, ipiv, work)
                    since_refresh = 0
            trace[s] = log_rho
    return int(accepted), trace_arr, max_res
