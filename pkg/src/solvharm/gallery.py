"""Closed-form example maps: vacuum solutions, Heisenberg graphs, primitive maps.

These fixtures are produced analytically, not through the loop pipeline, so
they serve as independent ground truth for the residual checks and as
round-trip targets for potential extraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dpw import HoloPoly, MapGrid, _grid_axes
from .liegroup import (
    GroupSpec,
    SolvParams,
    group_exp,
    matrix_exp3,
    nil_mul,
    se2_matrix_basis,
    solv_matrix_basis,
    solv_point_from_matrix,
    solv_point_mul,
)
from .verify import (
    ResidualReport,
    _report,
    _se2_neutral,
    _shrink,
    _solv_neutral,
    d_z,
)

# Eigenvectors of the order-4 automorphism on the complexified algebra of
# G(1, -1), keyed by the power of i they pick up.  The -1 slot is the one a
# primitive map's dz-part must stay inside.
SOL3_EIGENBASIS = {
    1: (1.0, -1j, 0.0),
    2: (0.0, 0.0, 1.0),
    -1: (1.0, 1j, 0.0),
}


def _empty_grid(domain, n_x, n_y, width=3):
    xs, ys, h = _grid_axes(domain, n_x, n_y)
    pts = np.zeros((n_y, n_x, width))
    return xs, ys, h, pts


def vacuum_map(X, Y, group: GroupSpec, domain=(-1.0, 1.0, -1.0, 1.0), n_x=33, n_y=33) -> MapGrid:
    """Sample (x, y) -> exp(x X) exp(y Y) in group coordinates.

    X and Y are algebra vectors in the coordinate basis.  Groups with a
    matrix picture go through the matrix exponential and back; the abelian
    mu = (0, 0) case, which has no such picture, multiplies coordinates
    directly.  The motion group reports its angle coordinate in (-pi, pi].
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    xs, ys, h, pts = _empty_grid(domain, n_x, n_y)
    if group.kind == "solv":
        params = group.params
        if (params.mu1, params.mu2) == (0.0, 0.0):
            for iy, y in enumerate(ys):
                for ix, x in enumerate(xs):
                    p = solv_point_mul(
                        params, group_exp(params, x * X), group_exp(params, y * Y)
                    )
                    pts[iy, ix] = (p.x1, p.x2, p.x3)
        else:
            basis = solv_matrix_basis(params)
            Xm = sum(X[i] * basis[i] for i in range(3))
            Ym = sum(Y[i] * basis[i] for i in range(3))
            for iy, y in enumerate(ys):
                for ix, x in enumerate(xs):
                    m = matrix_exp3(x * Xm) @ matrix_exp3(y * Ym)
                    p = solv_point_from_matrix(params, m)
                    pts[iy, ix] = (p.x1, p.x2, p.x3)
    elif group.kind == "nil3":
        for iy, y in enumerate(ys):
            for ix, x in enumerate(xs):
                pts[iy, ix] = nil_mul(x * X, y * Y)
    else:
        basis = se2_matrix_basis()
        Xm = sum(X[i] * basis[i] for i in range(3))
        Ym = sum(Y[i] * basis[i] for i in range(3))
        for iy, y in enumerate(ys):
            for ix, x in enumerate(xs):
                m = matrix_exp3(x * Xm) @ matrix_exp3(y * Ym)
                pts[iy, ix] = (
                    m[0, 2].real,
                    m[1, 2].real,
                    math.atan2(m[1, 0].real, m[0, 0].real),
                )
    mask = np.zeros((n_y, n_x), dtype=bool)
    return MapGrid(tuple(domain), n_x, n_y, h, pts, mask)


def nil_from_holomorphic(fs, domain=(-1.0, 1.0, -1.0, 1.0), n_x=33, n_y=33) -> MapGrid:
    """Harmonic map into Nil_{2n+1} from holomorphic data: phi^j = 2 Re f^j."""
    fs = list(fs)
    if len(fs) < 3 or len(fs) % 2 == 0:
        raise ValueError("need an odd number of components, at least three")
    xs, ys, h, pts = _empty_grid(domain, n_x, n_y, width=len(fs))
    zs = xs[None, :] + 1j * ys[:, None]
    for j, f in enumerate(fs):
        pts[..., j] = 2.0 * np.real(f.eval(zs))
    mask = np.zeros((n_y, n_x), dtype=bool)
    return MapGrid(tuple(domain), n_x, n_y, h, pts, mask)


def sol3_primitive(w: HoloPoly, c: float, domain=(-1.0, 1.0, -1.0, 1.0), n_x=33, n_y=33) -> MapGrid:
    """Primitive map into G(1, -1): phi = (Re w, -e^{-2c} Im w, c).

    phi^1 and e^{2 phi^3} phi^2 are then conjugate harmonic, which is the
    defining property: phi^1 - i e^{2c} phi^2 = w is holomorphic.
    """
    xs, ys, h, pts = _empty_grid(domain, n_x, n_y)
    zs = xs[None, :] + 1j * ys[:, None]
    vals = w.eval(zs)
    pts[..., 0] = np.real(vals)
    pts[..., 1] = -math.exp(-2.0 * c) * np.imag(vals)
    pts[..., 2] = c
    mask = np.zeros((n_y, n_x), dtype=bool)
    return MapGrid(tuple(domain), n_x, n_y, h, pts, mask)


def sol3_primitivity_residual(grid: MapGrid) -> ResidualReport:
    """How far the dz-part of a G(1, -1) map strays from the -1 eigenspace.

    The translated derivative is A = (e^{-phi3} phi1_z, e^{phi3} phi2_z,
    phi3_z); membership in the span of (1, i, 0) means phi3_z = 0 and
    i A_1 = A_2, and those two scalars are the reported residual field.
    """
    phi = np.asarray(grid.points)
    h = grid.h
    pz = d_z(phi, h)
    pc = phi[1:-1, 1:-1]
    a1 = np.exp(-pc[..., 2]) * pz[..., 0]
    a2 = np.exp(pc[..., 2]) * pz[..., 1]
    R = np.stack([1j * a1 - a2, pz[..., 2]], axis=-1)
    ok = ~np.asarray(grid.mask, dtype=bool)
    return _report("sol3-primitivity", R, _shrink(ok), h)


@dataclass(frozen=True)
class Se2PairReport:
    """The two formulations of motion-group harmonicity, side by side."""

    direct: ResidualReport
    transformed: ResidualReport
    discrepancy: ResidualReport


def se2_check_pair(grid: MapGrid) -> Se2PairReport:
    """Evaluate motion-group harmonicity directly and through G(1, -1).

    The change of variables ((phi1 + i phi2)/sqrt(2), (phi1 - i phi2)/sqrt(2),
    i phi3) turns the motion-group system into the mu = (1, -1) one; it is
    unitary on the first pair, so the per-point residual norms of the two
    formulations agree to rounding and their difference is reported as the
    discrepancy.
    """
    phi = np.asarray(grid.points)
    h = grid.h
    s = 1.0 / math.sqrt(2.0)
    tilde = np.stack(
        [
            s * (phi[..., 0] + 1j * phi[..., 1]),
            s * (phi[..., 0] - 1j * phi[..., 1]),
            1j * phi[..., 2],
        ],
        axis=-1,
    )
    direct = _se2_neutral(phi, h)
    transformed = _solv_neutral(tilde, h, SolvParams(1.0, -1.0))
    nd = np.sqrt(np.sum(np.abs(direct) ** 2, axis=-1))
    nt = np.sqrt(np.sum(np.abs(transformed) ** 2, axis=-1))
    disc = np.abs(nd - nt)[..., None]
    ok = ~np.asarray(grid.mask, dtype=bool)
    valid = _shrink(ok)
    return Se2PairReport(
        _report("se2-direct", direct, valid, h),
        _report("se2-transformed", transformed, valid, h),
        _report("se2-pair-discrepancy", disc, valid, h),
    )
