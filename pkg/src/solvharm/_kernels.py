"""Synthesis engines for the frame pipeline.

Per grid point the pipeline needs the negative Fourier modes of
g^k = exp(-mu_k xt3) x^k where xt3 = Xi/lam + conj(Xi) lam. Because the
twist is a product of two one-sided exponentials, the modes come from a
short double series instead of a full loop-group Iwasawa call:

    E_j       = sum_{r-q=j} (-mu Xi)^q/q! (-mu conj(Xi))^r/r!
    g_{-j}    = sum_m E_{m+1-j} a_m                    (j = 1..N+EX)
    ft(lam)   = 2 Re sum_j g_{-j} lam^{-j}             (real on |lam|=1)
    fhat^k    = exp(mu_k xt3(lam)) (ft(lam) - ft(1))
    fhat^3    = 2 Re((1/lam - 1) Xi)
    phihat(lam) = group(Fhat(-lam), inv(Fhat(lam)))    coordinatewise

Two interchangeable engines: a per-point loop that numba can jit, and a
grid-vectorized numpy fallback. Selection: numba when importable and
SOLVHARM_DISABLE_NUMBA is not "1". The loop body is plain scalar
arithmetic so the same source serves as the jit kernel and as a slow
reference for tiny grids.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via the env flag instead
    numba = None
    _HAVE_NUMBA = False

_JITTED = None


def numba_enabled() -> bool:
    return _HAVE_NUMBA and os.environ.get("SOLVHARM_DISABLE_NUMBA", "") != "1"


def exp_depth(x: np.ndarray, tol: float, cap: int) -> np.ndarray:
    """Per-entry number of Taylor terms of exp needed for tail < tol.

    Tail after q terms is bounded by x^(q+1)/(q+1)! e^x. Entries that
    still exceed tol at q = cap are reported as cap (caller masks them).
    """
    x = np.asarray(x, dtype=float)
    bound = np.exp(x) * x
    depth = np.zeros(x.shape, dtype=np.int64)
    done = bound <= tol
    q = 0
    while not done.all() and q < cap:
        q += 1
        bound = bound * x / (q + 1)
        newly = ~done & (bound <= tol)
        depth[newly] = q
        done |= newly
    depth[~done] = cap
    return depth


def synth_points(Xi, a1, a2, mu1, mu2, lams, EX, out):
    """Scalar per-point engine; also the numba jit source.

    Xi: (P,) complex, a1/a2: (P, N) complex moments, lams: (L,) complex
    on the unit circle, out: (P, L, 3) float filled in place.
    """
    P = Xi.shape[0]
    N = a1.shape[1]
    L = lams.shape[0]
    M = N + EX
    ep = np.empty(EX + 1, np.complex128)
    em = np.empty(EX + 1, np.complex128)
    E = np.empty(2 * EX + 1, np.complex128)
    g1 = np.empty(M, np.complex128)
    g2 = np.empty(M, np.complex128)
    for p in range(P):
        xi = Xi[p]
        for side in range(2):
            mu = mu1 if side == 0 else mu2
            a = a1 if side == 0 else a2
            g = g1 if side == 0 else g2
            if mu == 0.0 or xi == 0.0:
                for j in range(M):
                    g[j] = a[p, j] if j < N else 0.0
            else:
                w = -mu * xi
                wb = -mu * np.conj(xi)
                ep[0] = 1.0
                em[0] = 1.0
                for q in range(1, EX + 1):
                    ep[q] = ep[q - 1] * w / q
                    em[q] = em[q - 1] * wb / q
                for j in range(-EX, EX + 1):
                    qlo = -j if j < 0 else 0
                    qhi = EX - (j if j > 0 else 0)
                    s = 0.0 + 0.0j
                    for q in range(qlo, qhi + 1):
                        s += ep[q] * em[q + j]
                    E[j + EX] = s
                for j in range(1, M + 1):
                    s = 0.0 + 0.0j
                    mlo = j - 1 - EX
                    if mlo < 0:
                        mlo = 0
                    mhi = j - 1 + EX
                    if mhi > N - 1:
                        mhi = N - 1
                    for m in range(mlo, mhi + 1):
                        s += E[m + 1 - j + EX] * a[p, m]
                    g[j - 1] = s
        s1 = 0.0 + 0.0j
        s2 = 0.0 + 0.0j
        for j in range(M):
            s1 += g1[j]
            s2 += g2[j]
        f1_one = 2.0 * s1.real
        f2_one = 2.0 * s2.real
        for li in range(L):
            lam = lams[li]
            # coordinates of Fhat at -lam, then at lam
            a1_ = a2_ = a3_ = 0.0
            b1_ = b2_ = b3_ = 0.0
            for sgn in range(2):
                v = -lam if sgn == 0 else lam
                u = 1.0 / v
                h1 = 0.0 + 0.0j
                h2 = 0.0 + 0.0j
                for j in range(M - 1, -1, -1):
                    h1 = (h1 + g1[j]) * u
                    h2 = (h2 + g2[j]) * u
                x3t = 2.0 * (u * xi).real
                v1 = np.exp(mu1 * x3t) * (2.0 * h1.real - f1_one)
                v2 = np.exp(mu2 * x3t) * (2.0 * h2.real - f2_one)
                v3 = 2.0 * ((u - 1.0) * xi).real
                if sgn == 0:
                    a1_, a2_, a3_ = v1, v2, v3
                else:
                    b1_, b2_, b3_ = v1, v2, v3
            d3 = a3_ - b3_
            out[p, li, 0] = a1_ - np.exp(mu1 * d3) * b1_
            out[p, li, 1] = a2_ - np.exp(mu2 * d3) * b2_
            out[p, li, 2] = d3


def synth_vectorized(Xi, a1, a2, mu1, mu2, lams, EX, out):
    """Grid-vectorized engine, same contract as synth_points."""
    P = Xi.shape[0]
    N = a1.shape[1]
    M = N + EX
    gs = []
    for mu, a in ((mu1, a1), (mu2, a2)):
        if mu == 0.0:
            g = np.zeros((P, M), np.complex128)
            g[:, :N] = a
            gs.append(g)
            continue
        w = -mu * Xi
        wb = np.conj(w)
        ep = np.empty((P, EX + 1), np.complex128)
        em = np.empty((P, EX + 1), np.complex128)
        ep[:, 0] = 1.0
        em[:, 0] = 1.0
        for q in range(1, EX + 1):
            ep[:, q] = ep[:, q - 1] * w / q
            em[:, q] = em[:, q - 1] * wb / q
        E = np.zeros((P, 2 * EX + 1), np.complex128)
        for j in range(-EX, EX + 1):
            qlo = max(0, -j)
            qhi = EX - max(0, j)
            E[:, j + EX] = np.sum(
                ep[:, qlo : qhi + 1] * em[:, qlo + j : qhi + j + 1], axis=1
            )
        g = np.empty((P, M), np.complex128)
        for j in range(1, M + 1):
            mlo = max(0, j - 1 - EX)
            mhi = min(N - 1, j - 1 + EX)
            if mlo > mhi:
                g[:, j - 1] = 0.0
                continue
            idx = np.arange(mlo, mhi + 1) + 1 - j + EX
            g[:, j - 1] = np.sum(E[:, idx] * a[:, mlo : mhi + 1], axis=1)
        gs.append(g)
    g1, g2 = gs
    f1_one = 2.0 * np.sum(g1, axis=1).real
    f2_one = 2.0 * np.sum(g2, axis=1).real

    def coords(v):
        u = 1.0 / v
        h1 = np.zeros(P, np.complex128)
        h2 = np.zeros(P, np.complex128)
        for j in range(M - 1, -1, -1):
            h1 = (h1 + g1[:, j]) * u
            h2 = (h2 + g2[:, j]) * u
        x3t = 2.0 * (u * Xi).real
        return (
            np.exp(mu1 * x3t) * (2.0 * h1.real - f1_one),
            np.exp(mu2 * x3t) * (2.0 * h2.real - f2_one),
            2.0 * ((u - 1.0) * Xi).real,
        )

    for li, lam in enumerate(lams):
        a_1, a_2, a_3 = coords(-lam)
        b_1, b_2, b_3 = coords(lam)
        d3 = a_3 - b_3
        out[:, li, 0] = a_1 - np.exp(mu1 * d3) * b_1
        out[:, li, 1] = a_2 - np.exp(mu2 * d3) * b_2
        out[:, li, 2] = d3


def _jitted():
    global _JITTED
    if _JITTED is None:
        _JITTED = numba.njit(cache=True)(synth_points)
    return _JITTED


def run_engine(Xi, a1, a2, mu1, mu2, lams, EX, engine="auto"):
    """Dispatch to an engine; returns the (P, L, 3) slice array."""
    Xi = np.ascontiguousarray(Xi, dtype=np.complex128)
    a1 = np.ascontiguousarray(a1, dtype=np.complex128)
    a2 = np.ascontiguousarray(a2, dtype=np.complex128)
    lams = np.ascontiguousarray(lams, dtype=np.complex128)
    out = np.empty((Xi.shape[0], lams.shape[0], 3), dtype=float)
    if engine == "auto":
        engine = "numba" if numba_enabled() else "numpy"
    if engine == "numba":
        if not numba_enabled():
            raise RuntimeError("numba engine requested but not available")
        _jitted()(Xi, a1, a2, mu1, mu2, lams, EX, out)
    elif engine == "numpy":
        synth_vectorized(Xi, a1, a2, mu1, mu2, lams, EX, out)
    elif engine == "point":
        synth_points(Xi, a1, a2, mu1, mu2, lams, EX, out)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return out
