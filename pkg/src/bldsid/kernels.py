"""Hot numeric kernels, each with a numba loop version and a numpy fallback.

Three loops dominate runtime at experiment scale: the bilinear state
recursion, the Kronecker feature-window expansion, and the sampled matrix
products used for stability estimates.  The module exposes both concrete
implementations (``*_numpy`` and, when compiled, ``*_jit``) plus a
dispatcher for each that honors the BLDSID_NUMBA flag.  The two paths are
algebraically identical; tests pin them against each other.
"""

from __future__ import annotations

import numpy as np

from ._accel import NUMBA_ENABLED, jit_if_enabled

# ---------------------------------------------------------------------------
# bilinear state recursion
#
# x_{t+1} = (A_0 + sum_k (u_t)_k A_k) x_t + B u_t + w_t
# y_t     = C x_t + D u_t + z_t
#
# Returns (x, y, overflow_t); overflow_t = -1 when the state norm stayed
# under `guard`, else the first offending time index (y rows beyond it are
# unspecified).


def _simulate_loop(A_stack, B, C, D, u, w, z, guard):
    steps = u.shape[0]
    n = A_stack.shape[1]
    p = u.shape[1]
    x = np.zeros((steps, n))
    y = np.empty((steps, C.shape[0]))
    g2 = guard * guard
    for t in range(steps):
        y[t] = C @ x[t] + D @ u[t] + z[t]
        if t + 1 < steps:
            M = A_stack[0].copy()
            for k in range(p):
                uk = u[t, k]
                for r in range(n):
                    for c in range(n):
                        M[r, c] += uk * A_stack[k + 1, r, c]
            xn = M @ x[t] + B @ u[t] + w[t]
            s = 0.0
            for r in range(n):
                s += xn[r] * xn[r]
            if s > g2:
                return x, y, t + 1
            x[t + 1] = xn
    return x, y, -1


simulate_jit = jit_if_enabled(_simulate_loop) if NUMBA_ENABLED else None


def simulate_numpy(A_stack, B, C, D, u, w, z, guard):
    steps = u.shape[0]
    n = A_stack.shape[1]
    x = np.zeros((steps, n))
    # per-step transition matrices, batched up front
    Ms = A_stack[0] + np.einsum("tk,kab->tab", u, A_stack[1:])
    Bu = u @ B.T
    g2 = guard * guard
    for t in range(steps - 1):
        xn = Ms[t] @ x[t] + Bu[t] + w[t]
        if xn @ xn > g2:
            y = x @ C.T + u @ D.T + z
            return x, y, t + 1
        x[t + 1] = xn
    y = x @ C.T + u @ D.T + z
    return x, y, -1


def simulate_path(A_stack, B, C, D, u, w, z, guard):
    if simulate_jit is not None:
        return simulate_jit(A_stack, B, C, D, u, w, z, guard)
    return simulate_numpy(A_stack, B, C, D, u, w, z, guard)


# ---------------------------------------------------------------------------
# feature-window expansion
#
# Row s (for t = L + s) is laid out as
#   [ u_t | u_{t-1} | ubar_{t-1} (x) u_{t-2} | ... | ubar_{t-1} (x) ... (x) u_{t-L} ]
# with ubar = [1; u] and the leftmost factor slowest-varying.


def _feature_rows_loop(u, L, out):
    steps = u.shape[0]
    p = u.shape[1]
    nrows = steps - L
    maxc = (p + 1) ** (L - 1)
    cum = np.empty(maxc)
    for s in range(nrows):
        t = L + s
        for j in range(p):
            out[s, j] = u[t, j]
        off = p
        cum[0] = 1.0
        clen = 1
        for ell in range(1, L + 1):
            for a in range(clen):
                ca = cum[a]
                base = off + a * p
                for j in range(p):
                    out[s, base + j] = ca * u[t - ell, j]
            off += clen * p
            if ell < L:
                # extend cum by (x) ubar_{t-ell}; descending so the
                # expansion can run in place
                for a in range(clen - 1, -1, -1):
                    ca = cum[a]
                    base = a * (p + 1)
                    for j in range(p):
                        cum[base + 1 + j] = ca * u[t - ell, j]
                    cum[base] = ca
                clen *= p + 1
    return out


feature_rows_jit = jit_if_enabled(_feature_rows_loop) if NUMBA_ENABLED else None


def features_from_windows_numpy(windows):
    """Vectorized expansion of independent input windows.

    windows: (N, L+1, p) with windows[:, -1] the newest input u_t.
    """
    N, Lp1, p = windows.shape
    L = Lp1 - 1
    d = (p + 1) ** L + p - 1
    out = np.empty((N, d))
    out[:, :p] = windows[:, L]
    off = p
    cum = np.ones((N, 1))
    for ell in range(1, L + 1):
        u_ell = np.ascontiguousarray(windows[:, L - ell])
        blk = (cum[:, :, None] * u_ell[:, None, :]).reshape(N, -1)
        out[:, off : off + blk.shape[1]] = blk
        off += blk.shape[1]
        if ell < L:
            ubar = np.concatenate([np.ones((N, 1)), u_ell], axis=1)
            cum = (cum[:, :, None] * ubar[:, None, :]).reshape(N, -1)
    return out


def feature_rows_numpy(u, L):
    windows = np.lib.stride_tricks.sliding_window_view(u, L + 1, axis=0)
    # view comes out (N, p, L+1); reorder to (N, L+1, p)
    return features_from_windows_numpy(windows.transpose(0, 2, 1))


def feature_rows(u, L):
    u = np.ascontiguousarray(u, dtype=np.float64)
    if feature_rows_jit is not None:
        p = u.shape[1]
        d = (p + 1) ** L + p - 1
        out = np.empty((u.shape[0] - L, d))
        return feature_rows_jit(u, L, out)
    return feature_rows_numpy(u, L)


# ---------------------------------------------------------------------------
# sampled matrix products for stability estimates
#
# For every sample s and depth k, the log operator norm AND the log spectral
# radius of (u_{s,1} o A)(u_{s,2} o A) ... (u_{s,k} o A).  Products carry a
# separate log scale with periodic Frobenius renormalization, so deep
# products neither overflow nor underflow.  rho(P)^(1/k) per product gives a
# true lower bound on the joint spectral radius; norms feed the transient
# constant.


def _product_scan_loop(A_stack, useq):
    S, K, p = useq.shape
    n = A_stack.shape[1]
    lognorms = np.empty((S, K))
    logradii = np.empty((S, K))
    for s in range(S):
        P = np.eye(n)
        logscale = 0.0
        for k in range(K):
            M = A_stack[0].copy()
            for j in range(p):
                uj = useq[s, k, j]
                for r in range(n):
                    for c in range(n):
                        M[r, c] += uj * A_stack[j + 1, r, c]
            P = P @ M
            fro = 0.0
            for r in range(n):
                for c in range(n):
                    fro += P[r, c] * P[r, c]
            fro = np.sqrt(fro)
            if fro == 0.0:
                for kk in range(k, K):
                    lognorms[s, kk] = -np.inf
                    logradii[s, kk] = -np.inf
                break
            if fro > 1e100 or fro < 1e-100:
                P = P / fro
                logscale += np.log(fro)
            sv = np.linalg.svd(P)[1]
            lognorms[s, k] = np.log(sv[0]) + logscale
            ev = np.linalg.eigvals(P.astype(np.complex128))
            rad = np.max(np.abs(ev))
            logradii[s, k] = np.log(rad) + logscale if rad > 0.0 else -np.inf
    return lognorms, logradii


product_scan_jit = jit_if_enabled(_product_scan_loop) if NUMBA_ENABLED else None


def product_scan_numpy(A_stack, useq):
    S, K, p = useq.shape
    n = A_stack.shape[1]
    Ms = A_stack[0] + np.einsum("skj,jab->skab", useq, A_stack[1:])
    lognorms = np.empty((S, K))
    logradii = np.empty((S, K))
    P = np.broadcast_to(np.eye(n), (S, n, n)).copy()
    logscale = np.zeros(S)
    dead = np.zeros(S, dtype=bool)
    for k in range(K):
        P = P @ Ms[:, k]
        fro = np.linalg.norm(P, axis=(1, 2))
        dead |= fro == 0.0
        stretch = ~dead & ((fro > 1e100) | (fro < 1e-100))
        if stretch.any():
            P[stretch] /= fro[stretch, None, None]
            logscale[stretch] += np.log(fro[stretch])
        sv = np.linalg.svd(P, compute_uv=False)
        rad = np.max(np.abs(np.linalg.eigvals(P.astype(np.complex128))), axis=1)
        with np.errstate(divide="ignore"):
            lognorms[:, k] = np.where(dead, -np.inf, np.log(sv[:, 0]) + logscale)
            logradii[:, k] = np.where(dead | (rad == 0.0), -np.inf, np.log(rad) + logscale)
    return lognorms, logradii


def product_scan(A_stack, useq):
    A_stack = np.ascontiguousarray(A_stack, dtype=np.float64)
    useq = np.ascontiguousarray(useq, dtype=np.float64)
    if product_scan_jit is not None:
        return product_scan_jit(A_stack, useq)
    return product_scan_numpy(A_stack, useq)
