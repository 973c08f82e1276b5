"""Global Birkhoff and Iwasawa factorizations of loop elements.

Both splits work coordinatewise. The third coordinate is additive, so it
splits by Fourier index directly. The first two coordinates twist under
the group law by exp(mu_k x^3), so they are first untwisted with the
already-split third coordinate, split as scalars, and the factor that
carries the twist is multiplied back.

All intermediate products run at their natural bands; the returned
factors keep whatever support they actually have. Truncating factors to
the input band would look tidy but breaks reconstruction: the tails of
the twisting exponentials re-enter the band under convolution.
"""

from __future__ import annotations

from .laurent import (
    LaurentLoop,
    _trim,
    conj_reflect,
    loop_exp,
    loop_mul,
    loop_scale,
    loop_sub,
    max_coeff_diff,
    negative_part,
    nonnegative_part,
    real_part,
)
from .liegroup import SolvLoopElement

RECONSTRUCT_TOL = 1e-10
REALITY_TOL = 1e-10


def _doubled_real_negative(f: LaurentLoop) -> LaurentLoop:
    """sum_{j<0} (f_j lam^j + conj(f_j) lam^{-j}), coefficients copied bitwise."""
    return loop_scale(2.0, real_part(negative_part(f)))


def birkhoff_split(g: SolvLoopElement):
    """g = g_minus * g_plus with g_minus(infinity) = identity.

    x^3 splits by index sign; each x^k is untwisted by exp(-mu_k x^3_-),
    split at index 0, and the negative piece is re-twisted so that the
    group product restores the original coordinate exactly.
    """
    p = g.params
    x3m = _trim(negative_part(g.x3))
    x3p = _trim(nonnegative_part(g.x3))
    minus = []
    plus = []
    for mu_k, xk in ((p.mu1, g.x1), (p.mu2, g.x2)):
        if mu_k == 0.0 or x3m.is_zero():
            hat = xk
            xkm = negative_part(hat)
        else:
            hat = loop_mul(loop_exp(loop_scale(-mu_k, x3m)), xk)
            xkm = loop_mul(negative_part(hat), loop_exp(loop_scale(mu_k, x3m)))
        minus.append(_trim(xkm))
        plus.append(_trim(nonnegative_part(hat)))
    return (
        SolvLoopElement(minus[0], minus[1], x3m, p),
        SolvLoopElement(plus[0], plus[1], x3p, p),
    )


def iwasawa_split(g: SolvLoopElement):
    """g = g_real * g_plus with g_real fixed by conj_reflect entrywise.

    The real factor's third coordinate doubles the negative part into a
    reflection-symmetric loop; the plus factor absorbs the correction
    -sum_{j<0} conj(x_j) lam^{-j} so the sum reproduces x^3 on the nose.
    The x^k coordinates follow the same pattern after untwisting.
    """
    p = g.params
    x3t = _trim(_doubled_real_negative(g.x3))
    x3p = _trim(loop_sub(g.x3, x3t))
    real_entries = []
    plus_entries = []
    for mu_k, xk in ((p.mu1, g.x1), (p.mu2, g.x2)):
        if mu_k == 0.0 or x3t.is_zero():
            hat = xk
            ft = _doubled_real_negative(hat)
            xkt = ft
        else:
            hat = loop_mul(loop_exp(loop_scale(-mu_k, x3t)), xk)
            ft = _doubled_real_negative(hat)
            xkt = loop_mul(ft, loop_exp(loop_scale(mu_k, x3t)))
        real_entries.append(_trim(xkt))
        plus_entries.append(_trim(loop_sub(hat, ft)))
    return (
        SolvLoopElement(real_entries[0], real_entries[1], x3t, p),
        SolvLoopElement(plus_entries[0], plus_entries[1], x3p, p),
    )


def check_reality(g: SolvLoopElement):
    """(flag, residual): residual is the worst |c_j - conj(c_{-j})| over entries."""
    residual = 0.0
    for f in g.entries():
        residual = max(residual, max_coeff_diff(f, conj_reflect(f)))
    return residual <= REALITY_TOL, residual
