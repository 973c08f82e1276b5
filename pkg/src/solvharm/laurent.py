"""Truncated Laurent series on the unit circle.

A loop f(lam) = sum_j c_j lam^j is stored as the coefficient slab
c_{-N}..c_{N}.  All arithmetic is exact on the stored band: products
are full convolutions and only an explicit projection discards
coefficients, so truncation loss is always attributable to a single
reported number (the ``discarded`` field) instead of leaking silently
through intermediate results.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BandOverflow, NonConvergent, ZeroArgument

# Pipeline-wide defaults.  Bands are coerced up, never down, at module
# boundaries; the hard cap only guards against runaway support growth.
PIPELINE_BAND = 12
EXP_TOL = 1e-14
EXP_MAX_TERMS = 64
MAX_BAND = 1024


@dataclass(frozen=True, eq=False)
class LaurentLoop:
    """Coefficients c_j for j in [-band, band]; immutable after construction.

    ``discarded`` accumulates the absolute coefficient mass dropped by
    every truncating operation that produced this value.
    """

    band: int
    coeffs: np.ndarray
    discarded: float = field(default=0.0)

    def __post_init__(self):
        if self.band < 0:
            raise ValueError("band must be >= 0")
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != (2 * self.band + 1,):
            raise ValueError(
                f"need {2 * self.band + 1} coefficients for band {self.band}, got {c.shape}"
            )
        if not np.all(np.isfinite(c.view(np.float64))):
            raise ValueError("coefficients must be finite")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def coeff(self, j: int) -> complex:
        """c_j, zero outside the band by convention."""
        if abs(j) > self.band:
            return 0.0 + 0.0j
        return complex(self.coeffs[j + self.band])

    def support(self):
        """(lo, hi) indices of the nonzero coefficients, or None if zero."""
        nz = np.nonzero(self.coeffs)[0]
        if nz.size == 0:
            return None
        return int(nz[0]) - self.band, int(nz[-1]) - self.band

    def mass(self) -> float:
        return float(np.sum(np.abs(self.coeffs)))

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def __repr__(self):
        sup = self.support()
        return f"LaurentLoop(band={self.band}, support={sup}, mass={self.mass():.3g})"


def loop_zero(band: int = 0) -> LaurentLoop:
    return LaurentLoop(band, np.zeros(2 * band + 1, dtype=np.complex128))


def loop_one(band: int = 0) -> LaurentLoop:
    c = np.zeros(2 * band + 1, dtype=np.complex128)
    c[band] = 1.0
    return LaurentLoop(band, c)


def loop_from_terms(terms: dict, band: int | None = None) -> LaurentLoop:
    """Build a loop from {index: coefficient}."""
    if band is None:
        band = max((abs(j) for j in terms), default=0)
    c = np.zeros(2 * band + 1, dtype=np.complex128)
    for j, v in terms.items():
        if abs(j) > band:
            raise ValueError(f"index {j} outside band {band}")
        c[j + band] = v
    return LaurentLoop(band, c)


def _aligned(f: LaurentLoop, band: int) -> np.ndarray:
    """Coefficient slab of f embedded in a band-sized array."""
    if band < f.band:
        raise ValueError("alignment never shrinks a band")
    out = np.zeros(2 * band + 1, dtype=np.complex128)
    out[band - f.band : band + f.band + 1] = f.coeffs
    return out


def loop_add(f: LaurentLoop, g: LaurentLoop) -> LaurentLoop:
    band = max(f.band, g.band)
    return LaurentLoop(band, _aligned(f, band) + _aligned(g, band), f.discarded + g.discarded)


def loop_sub(f: LaurentLoop, g: LaurentLoop) -> LaurentLoop:
    band = max(f.band, g.band)
    return LaurentLoop(band, _aligned(f, band) - _aligned(g, band), f.discarded + g.discarded)


def loop_scale(c: complex, f: LaurentLoop) -> LaurentLoop:
    return LaurentLoop(f.band, c * f.coeffs, f.discarded)


def loop_mul(f: LaurentLoop, g: LaurentLoop, out_band: int | None = None) -> LaurentLoop:
    """Product of two loops.

    The convolution is computed on the full natural band f.band + g.band;
    with out_band given, the result is projected down and the dropped
    mass recorded.  out_band=None keeps everything.
    """
    nat = f.band + g.band
    if nat > MAX_BAND:
        raise BandOverflow(f"product band {nat} exceeds cap {MAX_BAND}")
    full = np.convolve(f.coeffs, g.coeffs)
    if out_band is None or out_band >= nat:
        return LaurentLoop(nat, full, f.discarded + g.discarded)
    dropped = float(
        np.sum(np.abs(full[: nat - out_band])) + np.sum(np.abs(full[nat + out_band + 1 :]))
    )
    kept = full[nat - out_band : nat + out_band + 1]
    return LaurentLoop(out_band, kept, f.discarded + g.discarded + dropped)


def loop_exp(
    f: LaurentLoop,
    out_band: int | None = None,
    tol: float = EXP_TOL,
    max_terms: int = EXP_MAX_TERMS,
) -> LaurentLoop:
    """exp(f) by an adaptive Taylor sum on the natural support.

    Terms f^m/m! are accumulated until the added term's coefficient mass
    drops below tol.  For one-sided f the partial sums are exact on the
    one-sided band once m exceeds it, because higher powers have support
    disjoint from that band.
    """
    if f.is_zero():
        result = loop_one(0)
    else:
        term = loop_one(0)
        acc = loop_one(0)
        converged = False
        for m in range(1, max_terms + 1):
            if term.band + f.band > MAX_BAND:
                raise BandOverflow("exp support exceeded the band cap before converging")
            term = loop_scale(1.0 / m, loop_mul(term, f))
            acc = loop_add(acc, term)
            if term.mass() < tol:
                converged = True
                break
        if not converged:
            raise NonConvergent(
                f"exp series still above tol={tol:g} after {max_terms} terms "
                f"(last term mass {term.mass():.3g})"
            )
        result = _trim(acc)
    if out_band is None or out_band >= result.band:
        return result
    dropped = LaurentLoop(
        result.band,
        np.where(np.abs(np.arange(-result.band, result.band + 1)) > out_band, result.coeffs, 0.0),
    ).mass()
    kept = result.coeffs[result.band - out_band : result.band + out_band + 1]
    return LaurentLoop(out_band, kept, result.discarded + dropped)


def _trim(f: LaurentLoop) -> LaurentLoop:
    """Shrink storage to the nonzero support (no mass is lost)."""
    sup = f.support()
    if sup is None:
        return LaurentLoop(0, np.zeros(1, dtype=np.complex128), f.discarded)
    band = max(abs(sup[0]), abs(sup[1]))
    if band == f.band:
        return f
    return LaurentLoop(band, f.coeffs[f.band - band : f.band + band + 1], f.discarded)


def conj_reflect(f: LaurentLoop) -> LaurentLoop:
    """g with g_j = conj(f_{-j}); pointwise complex conjugation on |lam|=1."""
    return LaurentLoop(f.band, np.conj(f.coeffs[::-1]), f.discarded)


def real_part(f: LaurentLoop) -> LaurentLoop:
    """(1/2)(f + conj_reflect(f)); fixed by conj_reflect, real on the circle."""
    return loop_scale(0.5, loop_add(f, conj_reflect(f)))


def project_band(f: LaurentLoop, lo: int, hi: int) -> LaurentLoop:
    """Keep coefficients with lo <= j <= hi, zero the rest.

    This is an exact linear projection (the complement is recoverable),
    so it does not count toward the discarded-mass diagnostic.
    """
    if lo > hi:
        raise ValueError("need lo <= hi")
    idx = np.arange(-f.band, f.band + 1)
    keep = (idx >= lo) & (idx <= hi)
    return LaurentLoop(f.band, np.where(keep, f.coeffs, 0.0), f.discarded)


def negative_part(f: LaurentLoop) -> LaurentLoop:
    """Coefficients with j < 0 only."""
    return project_band(f, -f.band - 1, -1)


def nonnegative_part(f: LaurentLoop) -> LaurentLoop:
    """Coefficients with j >= 0 only."""
    return project_band(f, 0, f.band + 1)


def loop_eval(f: LaurentLoop, lam: complex) -> complex:
    """f(lam) by Horner evaluation in lam and 1/lam."""
    lam = complex(lam)
    if lam == 0:
        raise ZeroArgument("loop evaluation at lam = 0")
    n = f.band
    # nonnegative powers: c_0 + lam(c_1 + lam(...))
    pos = 0.0 + 0.0j
    for j in range(n, -1, -1):
        pos = pos * lam + f.coeffs[j + n]
    # negative powers, Horner from the deepest index upward
    inv = 1.0 / lam
    neg = 0.0 + 0.0j
    for k in range(n, 0, -1):
        neg = neg * inv + f.coeffs[n - k]
    neg *= inv
    return pos + neg


def max_coeff_diff(f: LaurentLoop, g: LaurentLoop) -> float:
    """Largest coefficient deviation between two loops (band-aligned)."""
    band = max(f.band, g.band)
    return float(np.max(np.abs(_aligned(f, band) - _aligned(g, band))))
