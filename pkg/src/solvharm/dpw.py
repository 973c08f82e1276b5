"""Potential-to-harmonic-map pipeline for the solvable targets.

The route is: holomorphic potential -> closed-form frame (the ODE has a
triangular closed-form solution, so no time stepping) -> Iwasawa split
into a circle-real factor -> extended frame normalized at lambda = 1 ->
map and its lambda-slices. A scalar closed-form route and an RK4 matrix
ODE integrator exist as independent checks, plus the inverse direction:
reading a normalized potential back off a sampled map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import (
    BandOverflow,
    GridTooSmall,
    NonCommuting,
    NonConvergent,
    SingularityTooClose,
    ZeroArgument,
)
from .laurent import (
    EXP_MAX_TERMS,
    EXP_TOL,
    PIPELINE_BAND,
    LaurentLoop,
    loop_eval,
    loop_exp,
    loop_from_terms,
    loop_mul,
    loop_scale,
    negative_part,
    real_part,
)
from .liegroup import (
    LieAlgebraData,
    SolvLoopElement,
    SolvParams,
    SolvPoint,
    matrix_exp3,
    solv_mul,
    solv_point_inv,
    solv_point_mul,
)
from .loopfactor import iwasawa_split

TAIL_TOL = 1e-12
FRAME_TOL = 1e-10
MAX_POLY_DEGREE = 64


def _peval(coeffs: np.ndarray, z):
    """Horner evaluation; z may be scalar or array."""
    acc = np.zeros_like(np.asarray(z), dtype=complex) if np.ndim(z) else 0j
    for c in coeffs[::-1]:
        acc = acc * z + c
    return acc


def _panti(coeffs: np.ndarray) -> np.ndarray:
    out = np.zeros(len(coeffs) + 1, dtype=complex)
    out[1:] = coeffs / (1 + np.arange(len(coeffs)))
    return out


def _pmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.convolve(a, b)


@dataclass(frozen=True)
class HoloPoly:
    """Polynomial p(z) = sum a_m z^m given by coefficients (a_0, ..., a_d)."""

    coeffs: tuple

    def __post_init__(self):
        c = tuple(complex(v) for v in self.coeffs)
        if len(c) == 0:
            c = (0j,)
        if len(c) - 1 > MAX_POLY_DEGREE:
            raise ValueError(f"degree {len(c) - 1} exceeds {MAX_POLY_DEGREE}")
        if not all(np.isfinite(v.real) and np.isfinite(v.imag) for v in c):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    def eval(self, z):
        return _peval(np.asarray(self.coeffs), z)

    def is_zero(self) -> bool:
        return all(v == 0 for v in self.coeffs)

    def antiderivative(self) -> "HoloPoly":
        return HoloPoly(tuple(_panti(np.asarray(self.coeffs))))


def poly_zero() -> HoloPoly:
    return HoloPoly((0j,))


@dataclass(frozen=True)
class PotentialSpec:
    """Datum of a normalized potential: three polynomials and a base point."""

    xi1: HoloPoly
    xi2: HoloPoly
    xi3: HoloPoly
    params: SolvParams
    base_point: complex = 0j
    band: int = PIPELINE_BAND

    def __post_init__(self):
        if self.band < 2:
            raise ValueError("band must be at least 2")
        object.__setattr__(self, "base_point", complex(self.base_point))


def _effective_band(pot: PotentialSpec) -> int:
    # the pipeline never runs below its floor band; user bands only raise it
    return max(pot.band, PIPELINE_BAND)


@dataclass
class MapGrid:
    """Uniform rectangular sample of a map, plus optional lambda-slices."""

    domain: tuple
    n_x: int
    n_y: int
    h: float
    points: np.ndarray  # (n_y, n_x, 3) float
    mask: np.ndarray  # (n_y, n_x) bool, True = failed cell
    lambda_slices: list = field(default_factory=list)

    def __post_init__(self):
        if self.n_x < 5 or self.n_y < 5:
            raise GridTooSmall("stencils need at least a 5x5 grid")

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.domain[0], self.domain[1], self.n_x)

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(self.domain[2], self.domain[3], self.n_y)

    def zs(self) -> np.ndarray:
        return self.xs[None, :] + 1j * self.ys[:, None]


def _grid_axes(domain, n_x, n_y):
    if n_x < 5 or n_y < 5:
        raise GridTooSmall("stencils need at least a 5x5 grid")
    x0, x1, y0, y1 = domain
    hx = (x1 - x0) / (n_x - 1)
    hy = (y1 - y0) / (n_y - 1)
    if abs(hx - hy) > 1e-9 * max(abs(hx), abs(hy)):
        raise ValueError("grid spacing must match in x and y")
    return np.linspace(x0, x1, n_x), np.linspace(y0, y1, n_y), hx


@dataclass
class ExtendedFrame:
    """Per-point extended frames; identity at lambda = 1 is enforced."""

    frames: list  # nested [iy][ix] of SolvLoopElement or None for masked
    def __post_init__(self):
        worst = 0.0
        for row in self.frames:
            for fr in row:
                if fr is None:
                    continue
                vals = fr.eval_at(1.0)
                worst = max(worst, max(abs(v) for v in vals))
        if worst > FRAME_TOL:
            raise ValueError(f"frame not normalized at lambda=1: {worst:.3g}")


@dataclass
class SynthesisResult:
    grid: MapGrid
    frames: ExtendedFrame | None
    diagnostics: dict


def default_lambdas() -> list:
    r = np.sqrt(0.5)
    return [
        1 + 0j,
        complex(r, r),
        1j,
        complex(-r, r),
        -1 + 0j,
        complex(-r, -r),
        -1j,
        complex(r, -r),
    ]


def integrate_Xi(xi3: HoloPoly, z_star: complex, z) -> complex:
    """Integral of xi3 from z_star to z (path-free: exact antiderivative)."""
    anti = _panti(np.asarray(xi3.coeffs))
    return _peval(anti, z) - _peval(anti, z_star)


def _moment_polys(pot: PotentialSpec, band: int):
    """Antiderivative tables A^k_m with a^k_m(z) = A(z) - A(z_*).

    A^k_m integrates xi^k (mu_k Xi)^m / m!; the recurrence multiplies by
    mu_k Xi and divides by m, all exact on coefficients.
    """
    xi_anti = _panti(np.asarray(pot.xi3.coeffs))
    # shift so Xi(z) = integral from z_* (constant term absorbs the base point)
    xi_anti[0] -= _peval(xi_anti, pot.base_point)
    tables = []
    for mu_k, xik in ((pot.params.mu1, pot.xi1), (pot.params.mu2, pot.xi2)):
        t = np.asarray(xik.coeffs)
        antis = [_panti(t)]
        if mu_k == 0.0 or pot.xi3.is_zero():
            zero = np.zeros(1, dtype=complex)
            antis.extend([zero] * (band - 1))
        else:
            mxi = mu_k * xi_anti
            for m in range(1, band):
                t = _pmul(t, mxi) / m
                antis.append(_panti(t))
        tables.append(antis)
    return xi_anti, tables


def _moment_values(pot: PotentialSpec, band: int, z):
    """(Xi(z), a1 (..., band), a2 (..., band)) for scalar or array z."""
    xi_anti, tables = _moment_polys(pot, band)
    Xi = _peval(xi_anti, z)
    outs = []
    for antis in tables:
        cols = [_peval(a, z) - _peval(a, pot.base_point) for a in antis]
        outs.append(np.stack([np.asarray(c) for c in cols], axis=-1))
    return Xi, outs[0], outs[1]


def solve_step1(pot: PotentialSpec, z: complex) -> SolvLoopElement:
    """Holomorphic frame C(z, .) in coordinates; closed form, no stepping.

    x^3 = Xi(z)/lambda and the x^k coefficient at lambda^{-(m+1)} is the
    exact integral of xi^k (mu_k Xi)^m / m!. A non-decayed top
    coefficient means the band cannot represent this frame.
    """
    N = _effective_band(pot)
    Xi, a1, a2 = _moment_values(pot, N, complex(z))
    tail = max(abs(a1[N - 1]), abs(a2[N - 1]))
    if tail > TAIL_TOL:
        raise BandOverflow(
            f"frame coefficients not decayed at band {N}: tail {tail:.3g}"
        )
    entries = []
    for a in (a1, a2):
        c = np.zeros(2 * N + 1, dtype=complex)
        for m in range(N):
            c[N - (m + 1)] = a[m]
        entries.append(LaurentLoop(N, c))
    x3 = np.zeros(2 * N + 1, dtype=complex)
    x3[N - 1] = Xi
    return SolvLoopElement(entries[0], entries[1], LaurentLoop(N, x3), pot.params)


def ode_oracle(pot: PotentialSpec, z: complex, lam: complex, n_steps: int = 256):
    """RK4 on the frame ODE dC = C (xi/lambda) dz along the straight segment.

    Independent of the closed form: used only to cross-check solve_step1.
    """
    if lam == 0:
        raise ZeroArgument("lambda must be nonzero")
    if n_steps < 16:
        raise ValueError("n_steps must be at least 16")
    p = pot.params
    dz = complex(z) - pot.base_point

    def rhs(t):
        w = pot.base_point + t * dz
        x3 = pot.xi3.eval(w)
        m = np.zeros((3, 3), dtype=complex)
        m[0, 0] = p.mu1 * x3
        m[1, 1] = p.mu2 * x3
        m[0, 2] = pot.xi1.eval(w)
        m[1, 2] = pot.xi2.eval(w)
        return (dz / lam) * m

    C = np.eye(3, dtype=complex)
    hs = 1.0 / n_steps
    for i in range(n_steps):
        t = i * hs
        k1 = C @ rhs(t)
        k2 = (C + 0.5 * hs * k1) @ rhs(t + 0.5 * hs)
        k3 = (C + 0.5 * hs * k2) @ rhs(t + 0.5 * hs)
        k4 = (C + hs * k3) @ rhs(t + hs)
        C = C + (hs / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return C


def step2_iwasawa(C: SolvLoopElement):
    """Split the holomorphic frame into circle-real times plus factors."""
    return iwasawa_split(C)


def step3_extended(F: SolvLoopElement) -> SolvLoopElement:
    """Normalize the real factor to the identity at lambda = 1."""
    q = F.eval_at(1.0)
    p = F.params
    qinv = solv_point_inv(p, SolvPoint(q[0], q[1], q[2]))
    const = SolvLoopElement(
        loop_from_terms({0: qinv.x1}),
        loop_from_terms({0: qinv.x2}),
        loop_from_terms({0: qinv.x3}),
        p,
    )
    return solv_mul(F, const)


def _slice_coords(params: SolvParams, frame: SolvLoopElement, lam: complex):
    """phi-hat(., lam) = Fhat(-lam) Fhat(lam)^{-1} evaluated in coordinates."""
    a = frame.eval_at(-lam)
    b = frame.eval_at(lam)
    binv = solv_point_inv(params, SolvPoint(b[0], b[1], b[2]))
    pt = solv_point_mul(params, SolvPoint(a[0], a[1], a[2]), binv)
    return np.array([pt.x1, pt.x2, pt.x3], dtype=complex)


def synthesize(
    pot: PotentialSpec,
    domain,
    n_x: int,
    n_y: int,
    lambdas=None,
    keep_frames: bool = False,
    engine: str = "auto",
) -> SynthesisResult:
    """Run the pipeline over a rectangular grid.

    The map itself is the lambda = 1 slice of phi-hat. Per-point failures
    (band not decayed, twist exponential too deep) mask the cell and the
    run continues; masked coordinates are zeroed.
    """
    xs, ys, h = _grid_axes(domain, n_x, n_y)
    slice_lams = [complex(v) for v in (lambdas if lambdas is not None else default_lambdas())]
    if not any(v == -1 for v in slice_lams):
        slice_lams.append(-1 + 0j)
    kernel_lams = list(slice_lams)
    if not any(v == 1 for v in kernel_lams):
        kernel_lams.append(1 + 0j)
    one_idx = next(i for i, v in enumerate(kernel_lams) if v == 1)

    if keep_frames:
        engine = "object"
    N = _effective_band(pot)
    Z = (xs[None, :] + 1j * ys[:, None]).ravel()
    P = Z.shape[0]
    L = len(kernel_lams)
    out = np.zeros((P, L, 3), dtype=float)
    mask = np.zeros(P, dtype=bool)
    diagnostics = {"band": N, "h": h, "n_points": P, "engine": engine}

    if engine == "object":
        frames = []
        max_imag = 0.0
        for idx in range(P):
            try:
                C = solve_step1(pot, Z[idx])
                F, _ = step2_iwasawa(C)
                Fh = step3_extended(F)
            except (BandOverflow, NonConvergent):
                mask[idx] = True
                frames.append(None)
                continue
            frames.append(Fh)
            for li, lam in enumerate(kernel_lams):
                row = _slice_coords(pot.params, Fh, lam)
                max_imag = max(max_imag, float(np.max(np.abs(row.imag))))
                out[idx, li, :] = row.real
        diagnostics["max_imag"] = max_imag
        frame_grid = ExtendedFrame(
            [frames[iy * n_x : (iy + 1) * n_x] for iy in range(n_y)]
        )
        Xi_vals, a1, a2 = _moment_values(pot, N, Z)
        tails = np.maximum(np.abs(a1[:, N - 1]), np.abs(a2[:, N - 1]))
    else:
        Xi_vals, a1, a2 = _moment_values(pot, N, Z)
        tails = np.maximum(np.abs(a1[:, N - 1]), np.abs(a2[:, N - 1]))
        mu_max = max(abs(pot.params.mu1), abs(pot.params.mu2))
        depth = _kernels.exp_depth(mu_max * np.abs(Xi_vals), EXP_TOL, EXP_MAX_TERMS)
        mask = (tails > TAIL_TOL) | (depth >= EXP_MAX_TERMS)
        ok = ~mask
        if ok.any():
            EX = int(depth[ok].max())
            out[ok] = _kernels.run_engine(
                Xi_vals[ok],
                a1[ok],
                a2[ok],
                pot.params.mu1,
                pot.params.mu2,
                np.asarray(kernel_lams),
                EX,
                engine,
            )
        frame_grid = None

    out[mask] = 0.0
    out3 = out.reshape(n_y, n_x, L, 3)
    mask2 = mask.reshape(n_y, n_x)
    slices = []
    for li, lam in enumerate(kernel_lams):
        if any(lam == v for v in slice_lams):
            slices.append((lam, np.ascontiguousarray(out3[:, :, li, :])))
    points = np.ascontiguousarray(out3[:, :, one_idx, :])
    grid = MapGrid(tuple(domain), n_x, n_y, h, points, mask2, slices)
    diagnostics["n_masked"] = int(mask.sum())
    diagnostics["max_tail"] = float(tails[~mask].max()) if (~mask).any() else 0.0
    return SynthesisResult(grid, frame_grid, diagnostics)


def closed_form_map(pot: PotentialSpec, z: complex) -> SolvPoint:
    """Direct scalar-loop route to the map value at one point.

    Builds g^k = exp(-mu_k xt3) x^k as scalar loops, takes the doubled
    real negative part, and evaluates at lambda = -1 and 1. Shares no
    code with the frame route past the moment integrals.
    """
    N = _effective_band(pot)
    Xi, a1, a2 = _moment_values(pot, N, complex(z))
    tail = max(abs(a1[N - 1]), abs(a2[N - 1]))
    if tail > TAIL_TOL:
        raise BandOverflow(
            f"coefficients not decayed at band {N}: tail {tail:.3g}"
        )
    xt3 = loop_from_terms({-1: Xi, 1: np.conj(Xi)})
    coords = []
    for mu_k, a in ((pot.params.mu1, a1), (pot.params.mu2, a2)):
        xc = loop_from_terms({-(m + 1): a[m] for m in range(N)}, band=N)
        if mu_k == 0.0:
            g = xc
        else:
            g = loop_mul(loop_exp(loop_scale(-mu_k, xt3)), xc)
        ft = loop_scale(2.0, real_part(negative_part(g)))
        val = np.exp(-2.0 * mu_k * Xi.real) * (
            loop_eval(ft, -1.0) - loop_eval(ft, 1.0)
        )
        coords.append(float(np.real(val)))
    return SolvPoint(coords[0], coords[1], -4.0 * Xi.real)


def cauchy_quadrature(values: np.ndarray, nodes: np.ndarray, z: complex, h: float):
    """Midpoint sum of values/(xi - z) dxi^dxibar over cells, singular cell out.

    dxi^dxibar = -2i dx dy, so each kept node contributes
    values * (-2i) h^2 / (node - z); nodes closer than h are skipped.
    """
    d = nodes - z
    keep = np.abs(d) >= h
    return np.sum(values[keep] * (-2j) * h * h / d[keep])


def extract_normalized_potential(
    grid: MapGrid, params: SolvParams, z: complex, derivative_order: int = 2
):
    """Read (xi1, xi2, xi3) off a sampled map at the point z.

    Finite differences on the grid stand in for the z-derivatives on the
    zbar = 0 slice, which is only valid where those derivatives do not
    depend on zbar (mu = (0,0), or potentials with xi3 = 0 so the third
    coordinate vanishes identically). The Cauchy-transform correction is
    evaluated by midpoint quadrature with the singular cell excluded; in
    both valid regimes it carries a vanishing prefactor, so its
    contribution is a numerical zero rather than a modeling assumption.
    """
    if derivative_order not in (2, 4):
        raise ValueError("derivative_order must be 2 or 4")
    xs, ys, h = grid.xs, grid.ys, grid.h
    ix = int(round((z.real - xs[0]) / h))
    iy = int(round((z.imag - ys[0]) / h))
    if ix < 2 or ix > grid.n_x - 3 or iy < 2 or iy > grid.n_y - 3:
        raise SingularityTooClose("need two cells of margin around z")
    phi = grid.points

    def dz_at(comp):
        f = phi[:, :, comp]
        if derivative_order == 2:
            fx = (f[iy, ix + 1] - f[iy, ix - 1]) / (2 * h)
            fy = (f[iy + 1, ix] - f[iy - 1, ix]) / (2 * h)
        else:
            fx = (
                -f[iy, ix + 2] + 8 * f[iy, ix + 1] - 8 * f[iy, ix - 1] + f[iy, ix - 2]
            ) / (12 * h)
            fy = (
                -f[iy + 2, ix] + 8 * f[iy + 1, ix] - 8 * f[iy - 1, ix] + f[iy - 2, ix]
            ) / (12 * h)
        return 0.5 * (fx - 1j * fy)

    phi3_z = dz_at(2)
    phi3_here = phi[iy, ix, 2]
    zc = xs[ix] + 1j * ys[iy]
    out = []
    for comp, mu_k in ((0, params.mu1), (1, params.mu2)):
        val = -0.5 * np.exp(-0.5 * mu_k * phi3_here) * dz_at(comp)
        if mu_k != 0.0:
            f = phi[:, :, comp]
            fx = (f[1:-1, 2:] - f[1:-1, :-2]) / (2 * h)
            fy = (f[2:, 1:-1] - f[:-2, 1:-1]) / (2 * h)
            dzbar = 0.5 * (fx + 1j * fy)
            weights = np.exp(-0.5 * mu_k * phi[1:-1, 1:-1, 2])
            nodes = grid.zs()[1:-1, 1:-1]
            s = cauchy_quadrature(
                (weights * dzbar).ravel(), nodes.ravel(), zc, h
            )
            val += (mu_k * phi3_z) / (8j * np.pi) * s
        out.append(val)
    return out[0], out[1], -0.5 * phi3_z


def torsion_free_map(
    components,
    algebra: LieAlgebraData,
    basis,
    z_star: complex,
    z: complex,
    lam: complex,
    n_check: int = 8,
):
    """Map exp(int Phi / lam + lam int conj(Phi)) for pointwise-commuting Phi.

    components: HoloPoly per algebra coordinate; basis: the matching
    matrices. Mutual commutation of Phi values with conjugated values is
    checked on segment samples before exponentiating.
    """
    if lam == 0:
        raise ZeroArgument("lambda must be nonzero")
    if len(components) != len(basis):
        raise ValueError("one basis matrix per component")
    z_star = complex(z_star)
    z = complex(z)
    ts = np.linspace(0.0, 1.0, n_check)
    samples = [z_star + t * (z - z_star) for t in ts]
    vecs = [np.array([c.eval(w) for c in components]) for w in samples]
    worst = 0.0
    for va in vecs:
        for vb in vecs:
            br = algebra.bracket(va, np.conj(vb))
            worst = max(worst, float(np.max(np.abs(br.astype(complex)))))
    if worst > 1e-10:
        raise NonCommuting(f"[Phi, conj Phi] = {worst:.3g} on samples")
    ints = np.array(
        [
            _peval(_panti(np.asarray(c.coeffs)), z)
            - _peval(_panti(np.asarray(c.coeffs)), z_star)
            for c in components
        ]
    )
    m = np.zeros((3, 3), dtype=complex)
    for v, b in zip(ints, basis):
        # conjugation acts on the coefficient functions; the basis is real
        m += (v / lam + lam * np.conj(v)) * np.asarray(b, dtype=complex)
    return matrix_exp3(m)
