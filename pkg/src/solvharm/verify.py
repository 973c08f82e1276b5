"""Finite-difference verification of the differential identities.

Everything here consumes maps sampled on uniform grids and reports residual
norms for the identities a harmonic map has to satisfy: the Maurer-Cartan
equation, flatness of the loop of connections, the harmonic map equation in
its group-specific and connection-level forms, admissibility, and
torsion-freeness along the map.  Stencils are the classical second-order
ones, so residuals of exact solutions shrink like h^2 under refinement; the
tests assert that slope.

Sign bookkeeping, once and for all.  Write alpha' = A dz, alpha'' = B dzbar
and use [alpha ^ beta](X, Y) = m(alpha(X), beta(Y)) - m(alpha(Y), beta(X))
for any bilinear m.  Every 2-form equation is turned into a residual by
contracting with the pair (d/dz, d/dzbar) and flipping the overall sign,
i.e. reading off the coefficient of dzbar ^ dz:

    dbar alpha'                  ->   d_zbar A
    d alpha''                    ->  -d_z B
    [alpha' ^ alpha'']           ->  -[A, B]
    (sym mu)(alpha'' ^ alpha')   ->   (sym mu)(B, A)

With this orientation the harmonicity equation
dbar alpha' - d alpha'' + 2 (sym mu)(alpha'' ^ alpha') = 0 becomes

    R_harm = d_zbar A + d_z B + 2 (sym mu)(B, A),

the Maurer-Cartan equation dbar alpha' + d alpha'' + [alpha' ^ alpha''] = 0
becomes

    R_mc = d_zbar A - d_z B - [A, B],

and the pluriharmonicity equation
2 dbar alpha' + [alpha' ^ alpha''] + 2 (sym mu)(alpha'' ^ alpha') = 0 becomes

    R_pluri = 2 d_zbar A - [A, B] + 2 (sym mu)(B, A),

so that R_mc + R_harm = R_pluri holds exactly, term by term.  The tests
check that identity numerically to guard against sign drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .dpw import MapGrid
from .errors import GridTooSmall
from .liegroup import (
    ConnectionTensor,
    GroupSpec,
    LieAlgebraData,
    SolvParams,
    nil3_algebra,
    se2_algebra,
    solv_algebra,
)

FD_TOL = 1e-10


# ---------------------------------------------------------------------------
# Stencils.  All of them map an (n_y, n_x, ...) sample to its interior
# (n_y - 2, n_x - 2, ...), one boundary ring lost per application.

def d_z(f: np.ndarray, h: float) -> np.ndarray:
    """d/dz = (d/dx - i d/dy)/2 by 3-point central differences."""
    fx = (f[1:-1, 2:] - f[1:-1, :-2]) / (2.0 * h)
    fy = (f[2:, 1:-1] - f[:-2, 1:-1]) / (2.0 * h)
    return 0.5 * (fx - 1j * fy)


def d_zbar(f: np.ndarray, h: float) -> np.ndarray:
    """d/dzbar = (d/dx + i d/dy)/2 by 3-point central differences."""
    fx = (f[1:-1, 2:] - f[1:-1, :-2]) / (2.0 * h)
    fy = (f[2:, 1:-1] - f[:-2, 1:-1]) / (2.0 * h)
    return 0.5 * (fx + 1j * fy)


def d_zzbar(f: np.ndarray, h: float) -> np.ndarray:
    """d^2/(dz dzbar) = Laplacian/4 by the 5-point stencil."""
    lap = (
        f[1:-1, 2:] + f[1:-1, :-2] + f[2:, 1:-1] + f[:-2, 1:-1] - 4.0 * f[1:-1, 1:-1]
    ) / (h * h)
    return 0.25 * lap


def _shrink(ok: np.ndarray) -> np.ndarray:
    """Points whose full 5-point stencil lies in the ok region."""
    return (
        ok[1:-1, 1:-1]
        & ok[1:-1, 2:]
        & ok[1:-1, :-2]
        & ok[2:, 1:-1]
        & ok[:-2, 1:-1]
    )


def _pointwise_bilinear(tensor, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Apply m[k, i, j] to vector fields: out_k = sum_ij m_kij X_i Y_j."""
    t = np.asarray(tensor, dtype=complex)
    return np.einsum("kij,...i,...j->...k", t, X, Y)


def _sym_tensor(conn: ConnectionTensor) -> np.ndarray:
    m = np.asarray(conn.mu, dtype=float)
    return (m + m.transpose(0, 2, 1)) / 2.0


# ---------------------------------------------------------------------------
# Domain types

@dataclass
class FormGrid:
    """alpha = A dz + B dzbar sampled on the interior points of a map grid.

    For a map into the real group B is the componentwise conjugate of A;
    that is validated at construction.  `valid` marks the interior points
    whose stencil did not touch a masked cell.
    """

    A: np.ndarray  # (m_y, m_x, n) complex
    B: np.ndarray
    h: float
    alg: LieAlgebraData
    valid: np.ndarray | None = None

    def __post_init__(self):
        A = np.asarray(self.A, dtype=complex)
        B = np.asarray(self.B, dtype=complex)
        if A.shape != B.shape or A.ndim != 3:
            raise ValueError("A and B must be matching (m_y, m_x, n) arrays")
        if A.shape[0] < 3 or A.shape[1] < 3:
            raise GridTooSmall("form grid too small for derivative stencils")
        if A.shape[2] != self.alg.dim:
            raise ValueError("component count does not match the algebra dimension")
        valid = self.valid
        if valid is None:
            valid = np.ones(A.shape[:2], dtype=bool)
        else:
            valid = np.asarray(valid, dtype=bool)
            if valid.shape != A.shape[:2]:
                raise ValueError("valid mask shape does not match the form")
        if valid.any():
            scale = float(np.max(np.abs(A[valid])))
            mismatch = float(np.max(np.abs(B[valid] - np.conj(A[valid]))))
            if mismatch > FD_TOL * (1.0 + scale):
                raise ValueError(
                    f"B differs from conj(A) by {mismatch:.3g}: the map is not real"
                )
        self.A = A
        self.B = B
        self.valid = valid


@dataclass(frozen=True)
class ResidualReport:
    """Norms of one residual field over the valid points."""

    name: str
    max_norm: float
    l2_norm: float
    grid_h: float
    per_lambda: tuple = ()

    def __post_init__(self):
        if not (self.max_norm >= 0.0 and self.l2_norm >= 0.0):
            raise ValueError("residual norms must be nonnegative and finite")


def _report(name: str, R: np.ndarray, valid: np.ndarray, h: float) -> ResidualReport:
    nrm = np.sqrt(np.sum(np.abs(R) ** 2, axis=-1))
    vals = nrm[valid]
    if vals.size == 0:
        raise GridTooSmall("no valid interior points left for the residual")
    # fsum is an exactly rounded accumulation, deterministic in any order
    l2 = math.sqrt(math.fsum(float(v) * float(v) for v in vals) * h * h)
    return ResidualReport(name, float(np.max(vals)), l2, h)


# ---------------------------------------------------------------------------
# Maurer-Cartan form of a sampled map

def numeric_mc_form(grid: MapGrid, group: GroupSpec) -> FormGrid:
    """Pull the Maurer-Cartan form back through a sampled map.

    Central differences give phi_z and phi_zbar; left translation back to
    the identity is closed form for each supported group.  On the solvable
    family A = (e^{-mu1 phi3} phi1_z, e^{-mu2 phi3} phi2_z, phi3_z); on the
    Heisenberg group the third component picks up the symplectic correction
    (phi2 phi1_z - phi1 phi2_z)/2; on the motion group the translation part
    is rotated back by the angle coordinate.
    """
    phi = np.asarray(grid.points)
    h = grid.h
    pz = d_z(phi, h)
    pzb = d_zbar(phi, h)
    pc = phi[1:-1, 1:-1]

    def translate(d):
        if group.kind == "solv":
            p = group.params
            w1 = np.exp(-p.mu1 * pc[..., 2])
            w2 = np.exp(-p.mu2 * pc[..., 2])
            return np.stack([w1 * d[..., 0], w2 * d[..., 1], d[..., 2]], axis=-1)
        if group.kind == "nil3":
            corr = 0.5 * (pc[..., 1] * d[..., 0] - pc[..., 0] * d[..., 1])
            return np.stack([d[..., 0], d[..., 1], d[..., 2] + corr], axis=-1)
        c = np.cos(pc[..., 2])
        s = np.sin(pc[..., 2])
        return np.stack(
            [c * d[..., 0] + s * d[..., 1], -s * d[..., 0] + c * d[..., 1], d[..., 2]],
            axis=-1,
        )

    if group.kind == "solv":
        alg = solv_algebra(group.params)
    elif group.kind == "nil3":
        alg = nil3_algebra()
    else:
        alg = se2_algebra()
    ok = ~np.asarray(grid.mask, dtype=bool)
    return FormGrid(translate(pz), translate(pzb), h, alg, _shrink(ok))


# ---------------------------------------------------------------------------
# Residuals on forms

def _family_weights(lam: complex, family: str):
    if family == "neutral":
        return 0.5 * (1.0 - 1.0 / lam), 0.5 * (1.0 - lam)
    if family == "torsionfree":
        return 1.0 / lam, lam
    raise ValueError(f"unknown connection family {family!r}")


def _flatness(form: FormGrid, lam: complex, family: str):
    a, b = _family_weights(lam, family)
    A_l = a * form.A
    B_l = b * form.B
    br = _pointwise_bilinear(form.alg.structure, A_l, B_l)[1:-1, 1:-1]
    R = d_z(B_l, form.h) - d_zbar(A_l, form.h) + br
    return R, _shrink(form.valid)


def flatness_residual(form: FormGrid, lam: complex, family: str) -> ResidualReport:
    """Curvature of d + alpha_lambda as the dzbar ^ dz coefficient.

    The neutral family is alpha_lambda = (1 - 1/lambda)/2 alpha' +
    (1 - lambda)/2 alpha''; the torsionfree family is 1/lambda alpha' +
    lambda alpha''.  The residual is d_z B_l - d_zbar A_l + [A_l, B_l],
    which the orientation table at the top of the module assigns to the
    curvature 2-form d alpha_l + [alpha_l ^ alpha_l]/2.
    """
    lam = complex(lam)
    if abs(abs(lam) - 1.0) > 1e-9:
        raise ValueError("the connection family is defined for |lambda| = 1")
    R, valid = _flatness(form, lam, family)
    rep = _report(f"flatness[{family}]", R, valid, form.h)
    return replace(rep, per_lambda=((lam, rep.max_norm),))


def _maurer_cartan(form: FormGrid):
    br = _pointwise_bilinear(form.alg.structure, form.A, form.B)[1:-1, 1:-1]
    R = d_zbar(form.A, form.h) - d_z(form.B, form.h) - br
    return R, _shrink(form.valid)


def maurer_cartan_residual(form: FormGrid) -> ResidualReport:
    """R_mc = d_zbar A - d_z B - [A, B]; zero for any actual pullback."""
    R, valid = _maurer_cartan(form)
    return _report("maurer-cartan", R, valid, form.h)


def _general_harmonicity(form: FormGrid, conn: ConnectionTensor):
    ms = _sym_tensor(conn)
    t = 2.0 * _pointwise_bilinear(ms, form.B, form.A)[1:-1, 1:-1]
    R = d_zbar(form.A, form.h) + d_z(form.B, form.h) + t
    return R, _shrink(form.valid)


def general_harmonicity_residual(form: FormGrid, conn: ConnectionTensor) -> ResidualReport:
    """R_harm = d_zbar A + d_z B + 2 (sym mu)(B, A) for the given connection."""
    R, valid = _general_harmonicity(form, conn)
    return _report("general-harmonicity", R, valid, form.h)


def _pluriharmonic(form: FormGrid, conn: ConnectionTensor):
    br = _pointwise_bilinear(form.alg.structure, form.A, form.B)[1:-1, 1:-1]
    ms = _sym_tensor(conn)
    t = 2.0 * _pointwise_bilinear(ms, form.B, form.A)[1:-1, 1:-1]
    R = 2.0 * d_zbar(form.A, form.h) - br + t
    return R, _shrink(form.valid)


def pluriharmonic_residual(form: FormGrid, conn: ConnectionTensor) -> ResidualReport:
    """R_pluri = 2 d_zbar A - [A, B] + 2 (sym mu)(B, A) = R_mc + R_harm."""
    R, valid = _pluriharmonic(form, conn)
    return _report("pluriharmonic", R, valid, form.h)


def admissibility_residual(form: FormGrid, conn: ConnectionTensor) -> ResidualReport:
    """Norm of the admissibility obstruction (sym mu)(alpha' ^ alpha'').

    sym mu is symmetric, so contracting the wedge against (d/dz, d/dzbar)
    collapses to the single term (sym mu)(A, B); only its norm is reported,
    the orientation sign cannot matter.
    """
    ms = _sym_tensor(conn)
    R = _pointwise_bilinear(ms, form.A, form.B)
    return _report("admissibility", R, form.valid, form.h)


def torsion_free_residual(form: FormGrid, alg: LieAlgebraData) -> ResidualReport:
    """Norm of 2[A, B], the contraction of [alpha' ^ alpha'']."""
    R = 2.0 * _pointwise_bilinear(alg.structure, form.A, form.B)
    return _report("torsion-free", R, form.valid, form.h)


# ---------------------------------------------------------------------------
# Group-specific harmonic map equations, straight from the sampled map

def _solv_neutral(phi: np.ndarray, h: float, params: SolvParams) -> np.ndarray:
    pz = d_z(phi, h)
    pzb = d_zbar(phi, h)
    pzz = d_zzbar(phi, h)
    cross1 = pz[..., 0] * pzb[..., 2] + pzb[..., 0] * pz[..., 2]
    cross2 = pz[..., 1] * pzb[..., 2] + pzb[..., 1] * pz[..., 2]
    r1 = pzz[..., 0] - 0.5 * params.mu1 * cross1
    r2 = pzz[..., 1] - 0.5 * params.mu2 * cross2
    return np.stack([r1, r2, pzz[..., 2]], axis=-1)


def _nil3_neutral(phi: np.ndarray, h: float) -> np.ndarray:
    pz = d_z(phi, h)
    pzb = d_zbar(phi, h)
    pzz = d_zzbar(phi, h)
    combined = phi[..., 2] + 0.5 * phi[..., 0] * phi[..., 1]
    cross = pz[..., 0] * pzb[..., 1] + pzb[..., 0] * pz[..., 1]
    r3 = d_zzbar(combined, h) - 0.5 * cross
    return np.stack([pzz[..., 0], pzz[..., 1], r3], axis=-1)


def _se2_neutral(phi: np.ndarray, h: float) -> np.ndarray:
    pz = d_z(phi, h)
    pzb = d_zbar(phi, h)
    pzz = d_zzbar(phi, h)
    cross1 = pz[..., 1] * pzb[..., 2] + pzb[..., 1] * pz[..., 2]
    cross2 = pz[..., 0] * pzb[..., 2] + pzb[..., 0] * pz[..., 2]
    return np.stack(
        [pzz[..., 0] + 0.5 * cross1, pzz[..., 1] - 0.5 * cross2, pzz[..., 2]],
        axis=-1,
    )


def neutral_harmonicity_residual(grid: MapGrid, group: GroupSpec) -> ResidualReport:
    """Residual of the harmonic map system for the neutral connection.

    Solvable family: phi^k_zzbar - mu_k (phi^k_z phi^3_zbar +
    phi^k_zbar phi^3_z)/2 = 0 for k = 1, 2 and phi^3_zzbar = 0.  Heisenberg:
    phi^1, phi^2 harmonic and (phi^3 + phi^1 phi^2 / 2)_zzbar =
    (phi^1_z phi^2_zbar + phi^1_zbar phi^2_z)/2.  Motion group: the same
    shape with the rotation coordinate coupling into the translations.
    """
    phi = np.asarray(grid.points)
    if group.kind == "solv":
        R = _solv_neutral(phi, grid.h, group.params)
    elif group.kind == "nil3":
        R = _nil3_neutral(phi, grid.h)
    else:
        R = _se2_neutral(phi, grid.h)
    ok = ~np.asarray(grid.mask, dtype=bool)
    return _report(f"neutral-harmonicity[{group.kind}]", R, _shrink(ok), grid.h)


def metric_harmonicity_residual(grid: MapGrid, params: SolvParams) -> ResidualReport:
    """Residual of the harmonic map system for the left-invariant metric.

    phi^k_zzbar - mu_k (phi^k_z phi^3_zbar + phi^k_zbar phi^3_z) = 0 for
    k = 1, 2 and phi^3_zzbar + sum_k mu_k e^{-2 mu_k phi^3} phi^k_z
    phi^k_zbar = 0.  At mu = (0, 0) this coincides with the neutral system.
    """
    phi = np.asarray(grid.points)
    h = grid.h
    pz = d_z(phi, h)
    pzb = d_zbar(phi, h)
    pzz = d_zzbar(phi, h)
    pc = phi[1:-1, 1:-1]
    cross1 = pz[..., 0] * pzb[..., 2] + pzb[..., 0] * pz[..., 2]
    cross2 = pz[..., 1] * pzb[..., 2] + pzb[..., 1] * pz[..., 2]
    r1 = pzz[..., 0] - params.mu1 * cross1
    r2 = pzz[..., 1] - params.mu2 * cross2
    r3 = (
        pzz[..., 2]
        + params.mu1 * np.exp(-2.0 * params.mu1 * pc[..., 2]) * pz[..., 0] * pzb[..., 0]
        + params.mu2 * np.exp(-2.0 * params.mu2 * pc[..., 2]) * pz[..., 1] * pzb[..., 1]
    )
    R = np.stack([r1, r2, r3], axis=-1)
    ok = ~np.asarray(grid.mask, dtype=bool)
    return _report("metric-harmonicity", R, _shrink(ok), grid.h)
