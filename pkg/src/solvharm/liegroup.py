"""Concrete groups and algebras: the solvable family, the Heisenberg group, se(2).

Group coordinates follow the upper-triangular matrix picture throughout:
a point (x1, x2, x3) of the solvable group G(mu1, mu2) is the matrix with
diagonal (e^{mu1 x3}, e^{mu2 x3}, 1) and last column (x1, x2, 1), which
gives the multiplication law

    (x1, x2, x3) . (y1, y2, y3) = (x1 + e^{mu1 x3} y1, x2 + e^{mu2 x3} y2, x3 + y3).

Lie algebras are stored as structure constants c[k, i, j] in a fixed
ordered basis, chosen for the solvable family so that algebra components
line up with group coordinates.  Arithmetic helpers accept either float
or Fraction entries; the exact path is what the torsion identities are
tested with.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParamMismatch, SingularMetric
from .laurent import LaurentLoop, loop_add, loop_eval, loop_exp, loop_mul, loop_scale, loop_zero

JACOBI_TOL = 1e-12


@dataclass(frozen=True)
class SolvParams:
    mu1: float
    mu2: float


@dataclass(frozen=True)
class SolvPoint:
    x1: float
    x2: float
    x3: float

    def as_array(self):
        return np.array([self.x1, self.x2, self.x3], dtype=float)


@dataclass(frozen=True, eq=False)
class SolvLoopElement:
    """A loop in the complexified solvable group, stored coordinatewise."""

    x1: LaurentLoop
    x2: LaurentLoop
    x3: LaurentLoop
    params: SolvParams

    @property
    def band(self) -> int:
        return max(self.x1.band, self.x2.band, self.x3.band)

    def entries(self):
        return (self.x1, self.x2, self.x3)

    def eval_at(self, lam: complex):
        """Coordinate triple (complex) at a fixed loop parameter."""
        return (
            loop_eval(self.x1, lam),
            loop_eval(self.x2, lam),
            loop_eval(self.x3, lam),
        )


def solv_identity(params: SolvParams) -> SolvPoint:
    return SolvPoint(0.0, 0.0, 0.0)


def solv_loop_identity(params: SolvParams, band: int = 0) -> SolvLoopElement:
    z = loop_zero(band)
    return SolvLoopElement(z, z, z, params)


def _check_params(a, b):
    if a.params != b.params:
        raise ParamMismatch(f"group parameters differ: {a.params} vs {b.params}")


def solv_mul(a, b, params: SolvParams | None = None):
    """Group product, for loop elements or (with params) for points."""
    if isinstance(a, SolvPoint) and isinstance(b, SolvPoint):
        if params is None:
            raise ParamMismatch("point multiplication needs explicit params")
        return solv_point_mul(params, a, b)
    _check_params(a, b)
    p = a.params
    if params is not None and params != p:
        raise ParamMismatch(f"explicit params {params} disagree with operands {p}")
    if isinstance(a, SolvLoopElement):
        e1 = loop_exp(loop_scale(p.mu1, a.x3))
        e2 = loop_exp(loop_scale(p.mu2, a.x3))
        return SolvLoopElement(
            loop_add(a.x1, loop_mul(e1, b.x1)),
            loop_add(a.x2, loop_mul(e2, b.x2)),
            loop_add(a.x3, b.x3),
            p,
        )
    raise TypeError(f"unsupported operands {type(a)}, {type(b)}")


def solv_point_mul(params: SolvParams, a: SolvPoint, b: SolvPoint) -> SolvPoint:
    # np.exp so complex coordinates (loop evaluations) work too
    return SolvPoint(
        a.x1 + np.exp(params.mu1 * a.x3) * b.x1,
        a.x2 + np.exp(params.mu2 * a.x3) * b.x2,
        a.x3 + b.x3,
    )


def solv_point_inv(params: SolvParams, a: SolvPoint) -> SolvPoint:
    return SolvPoint(
        -np.exp(-params.mu1 * a.x3) * a.x1,
        -np.exp(-params.mu2 * a.x3) * a.x2,
        -a.x3,
    )


def solv_inv(a, params: SolvParams | None = None):
    """Group inverse: (-e^{-mu1 x3} x1, -e^{-mu2 x3} x2, -x3)."""
    if isinstance(a, SolvPoint):
        if params is None:
            raise ParamMismatch("point inversion needs explicit params")
        return solv_point_inv(params, a)
    p = a.params
    if isinstance(a, SolvLoopElement):
        e1 = loop_exp(loop_scale(-p.mu1, a.x3))
        e2 = loop_exp(loop_scale(-p.mu2, a.x3))
        return SolvLoopElement(
            loop_scale(-1.0, loop_mul(e1, a.x1)),
            loop_scale(-1.0, loop_mul(e2, a.x2)),
            loop_scale(-1.0, a.x3),
            p,
        )
    raise TypeError(f"unsupported operand {type(a)}")


def solv_const_element(params: SolvParams, point: SolvPoint) -> SolvLoopElement:
    """Lift a group point to a constant loop."""
    def const(v):
        return LaurentLoop(0, np.array([v], dtype=np.complex128))

    return SolvLoopElement(const(point.x1), const(point.x2), const(point.x3), params)


def group_exp(params: SolvParams, v) -> SolvPoint:
    """Exponential of the algebra vector v = (a, b, c) in group coordinates.

    Integrating the left-invariant flow gives x3 = c and
    x_k = v_k (e^{mu_k c} - 1)/(mu_k c), valid for mu=(0,0) as well.
    """
    a, b, c = float(v[0]), float(v[1]), float(v[2])
    return SolvPoint(a * _phi1(params.mu1 * c), b * _phi1(params.mu2 * c), c)


def _phi1(x: float) -> float:
    """(e^x - 1)/x, stable near 0."""
    if abs(x) < 1e-8:
        return 1.0 + x / 2.0 + x * x / 6.0
    return math.expm1(x) / x


# ---------------------------------------------------------------------------
# Heisenberg group, exponential coordinates (x1, x2, x3)

def nil_mul(a, b):
    """Multiplication of Nil_{2n+1} in exponential coordinates.

    Takes vectors of odd length 2n+1; the last slot picks up the
    symplectic correction (1/2) sum (a_i b_{n+i} - b_i a_{n+i}).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.shape[0] % 2 == 0:
        raise ValueError("need two equal odd-length coordinate vectors")
    n = a.shape[0] // 2
    out = a + b
    out[-1] += 0.5 * float(np.dot(a[:n], b[n : 2 * n]) - np.dot(b[:n], a[n : 2 * n]))
    return out


def nil3_matrix_from_point(p) -> np.ndarray:
    x1, x2, x3 = float(p[0]), float(p[1]), float(p[2])
    return np.array(
        [[1.0, x1, x3 + 0.5 * x1 * x2], [0.0, 1.0, x2], [0.0, 0.0, 1.0]]
    )


def nil3_point_from_matrix(m: np.ndarray) -> np.ndarray:
    x1 = m[0, 1]
    x2 = m[1, 2]
    return np.array([x1, x2, m[0, 2] - 0.5 * x1 * x2])


def solv_matrix_from_point(params: SolvParams, p: SolvPoint) -> np.ndarray:
    return np.array(
        [
            [math.exp(params.mu1 * p.x3), 0.0, p.x1],
            [0.0, math.exp(params.mu2 * p.x3), p.x2],
            [0.0, 0.0, 1.0],
        ]
    )


def solv_point_from_matrix(params: SolvParams, m: np.ndarray) -> SolvPoint:
    if params.mu1 != 0.0:
        x3 = math.log(m[0, 0].real if np.iscomplexobj(m) else m[0, 0]) / params.mu1
    elif params.mu2 != 0.0:
        x3 = math.log(m[1, 1].real if np.iscomplexobj(m) else m[1, 1]) / params.mu2
    else:
        raise ValueError(
            "mu = (0, 0) has a trivial diagonal; x3 is not recoverable from the matrix"
        )
    return SolvPoint(float(np.real(m[0, 2])), float(np.real(m[1, 2])), x3)


# ---------------------------------------------------------------------------
# Lie algebras by structure constants

class LieAlgebraData:
    """Structure constants c[k, i, j] with [e_i, e_j] = sum_k c^k_{ij} e_k.

    Entries may be floats or Fractions (object dtype); antisymmetry and
    the Jacobi identity are validated eagerly, and failure is a hard
    error because a silent non-algebra would poison every identity
    downstream.
    """

    def __init__(self, structure):
        c = np.asarray(structure)
        if c.ndim != 3 or c.shape[0] != c.shape[1] or c.shape[1] != c.shape[2]:
            raise ValueError("structure constants must be a cubic tensor")
        self.dim = c.shape[0]
        self.structure = c
        cf = c.astype(float)
        if np.max(np.abs(cf + cf.transpose(0, 2, 1))) > JACOBI_TOL:
            raise ValueError("structure constants are not antisymmetric")
        n = self.dim
        worst = 0.0
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    for l in range(n):
                        s = 0.0
                        for m in range(n):
                            s += (
                                cf[m, i, j] * cf[l, m, k]
                                + cf[m, j, k] * cf[l, m, i]
                                + cf[m, k, i] * cf[l, m, j]
                            )
                        worst = max(worst, abs(s))
        if worst > JACOBI_TOL:
            raise ValueError(f"Jacobi identity fails by {worst:.3g}")

    def bracket(self, X, Y):
        """[X, Y] componentwise; exact when inputs and constants are exact."""
        n = self.dim
        out = [0] * n
        for k in range(n):
            acc = 0
            for i in range(n):
                for j in range(n):
                    cij = self.structure[k, i, j]
                    if cij != 0:
                        acc = acc + cij * X[i] * Y[j]
            out[k] = acc
        # dtype inferred so Fraction inputs stay exact and complex stays complex
        return np.array(out)


@dataclass(frozen=True, eq=False)
class ConnectionTensor:
    """Bilinear map mu(e_i, e_j) = sum_k m[k, i, j] e_k over an algebra."""

    mu: np.ndarray
    algebra: LieAlgebraData

    def apply(self, X, Y):
        n = self.algebra.dim
        out = [0] * n
        for k in range(n):
            acc = 0
            for i in range(n):
                for j in range(n):
                    m = self.mu[k, i, j]
                    if m != 0:
                        acc = acc + m * X[i] * Y[j]
            out[k] = acc
        return np.array(out)


@dataclass(frozen=True, eq=False)
class MetricTensor:
    g: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError("metric must be square")
        if np.max(np.abs(g - g.T)) > 1e-12:
            raise ValueError("metric must be symmetric")
        if abs(np.linalg.det(g)) <= 1e-12:
            raise SingularMetric("metric determinant below tolerance")
        object.__setattr__(self, "g", g)


def torsion(conn: ConnectionTensor, X, Y):
    """T(X, Y) = -[X, Y] + mu(X, Y) - mu(Y, X)."""
    return -conn.algebra.bracket(X, Y) + conn.apply(X, Y) - conn.apply(Y, X)


def family_mu(alg: LieAlgebraData, t) -> ConnectionTensor:
    """The one-parameter family mu_t(X, Y) = (1 + t)/2 [X, Y].

    t = -1, 0, 1 give the canonical, neutral and anti-canonical
    connections; division by the integer 2 keeps Fraction entries exact.
    """
    m = alg.structure * (1 + t) / 2
    return ConnectionTensor(m, alg)


def sym_skew_parts(conn: ConnectionTensor):
    """(symmetric, skew) parts; they sum back to the tensor."""
    m = conn.mu
    mt = m.transpose(0, 2, 1)
    return (
        ConnectionTensor((m + mt) / 2, conn.algebra),
        ConnectionTensor((m - mt) / 2, conn.algebra),
    )


def levi_civita(alg: LieAlgebraData, metric: MetricTensor) -> ConnectionTensor:
    """Left-invariant Levi-Civita connection via the Koszul formula.

    2 <nabla_{e_i} e_j, e_l> = <[e_i,e_j], e_l> - <[e_j,e_l], e_i> + <[e_l,e_i], e_j>
    """
    c = alg.structure.astype(float)
    g = metric.g
    cg = np.einsum("mij,ml->ijl", c, g)  # <[e_i, e_j], e_l>
    # term order mirrors the formula: cg[j,l,i] and cg[l,i,j] as transposes
    k = 0.5 * (cg - cg.transpose(2, 0, 1) + cg.transpose(1, 2, 0))
    # k[i, j, l] = <nabla_{e_i} e_j, e_l>; raise the last index
    ginv = np.linalg.inv(g)
    m = np.einsum("ijl,lk->kij", k, ginv)
    return ConnectionTensor(m, alg)


def solv_algebra(params: SolvParams) -> LieAlgebraData:
    """Algebra of the solvable group in the basis aligned with coordinates.

    Basis (e1, e2, e3) = (E13, E23, mu1 E11 + mu2 E22):
    [e3, e1] = mu1 e1, [e3, e2] = mu2 e2, [e1, e2] = 0.
    """
    c = np.zeros((3, 3, 3))
    c[0, 2, 0] = params.mu1
    c[0, 0, 2] = -params.mu1
    c[1, 2, 1] = params.mu2
    c[1, 1, 2] = -params.mu2
    return LieAlgebraData(c)


def nil3_algebra() -> LieAlgebraData:
    """Heisenberg algebra: [e1, e2] = e3, e3 central."""
    c = np.zeros((3, 3, 3))
    c[2, 0, 1] = 1.0
    c[2, 1, 0] = -1.0
    return LieAlgebraData(c)


def se2_algebra() -> LieAlgebraData:
    """Euclidean motion algebra: [e3, e1] = e2, [e3, e2] = -e1."""
    c = np.zeros((3, 3, 3))
    c[1, 2, 0] = 1.0
    c[1, 0, 2] = -1.0
    c[0, 2, 1] = -1.0
    c[0, 1, 2] = 1.0
    return LieAlgebraData(c)


def solv_matrix_basis(params: SolvParams):
    e1 = np.zeros((3, 3), dtype=complex)
    e1[0, 2] = 1.0
    e2 = np.zeros((3, 3), dtype=complex)
    e2[1, 2] = 1.0
    e3 = np.zeros((3, 3), dtype=complex)
    e3[0, 0] = params.mu1
    e3[1, 1] = params.mu2
    return [e1, e2, e3]


def nil3_matrix_basis():
    e1 = np.zeros((3, 3), dtype=complex)
    e1[0, 1] = 1.0
    e2 = np.zeros((3, 3), dtype=complex)
    e2[1, 2] = 1.0
    e3 = np.zeros((3, 3), dtype=complex)
    e3[0, 2] = 1.0
    return [e1, e2, e3]


def se2_matrix_basis():
    """Translations E13, E23 and the rotation generator."""
    e1 = np.zeros((3, 3), dtype=complex)
    e1[0, 2] = 1.0
    e2 = np.zeros((3, 3), dtype=complex)
    e2[1, 2] = 1.0
    e3 = np.zeros((3, 3), dtype=complex)
    e3[0, 1] = -1.0
    e3[1, 0] = 1.0
    return [e1, e2, e3]


@dataclass(frozen=True)
class GroupSpec:
    """Which target group a sampled map lives in."""

    kind: str  # "solv" | "nil3" | "se2"
    params: SolvParams | None = None

    def __post_init__(self):
        if self.kind not in ("solv", "nil3", "se2"):
            raise ValueError(f"unknown group kind {self.kind!r}")
        if self.kind == "solv" and self.params is None:
            raise ValueError("solv groups need params")


# ---------------------------------------------------------------------------
# Small matrix exponential

_TAYLOR_TERMS = 18


def matrix_exp3(a: np.ndarray) -> np.ndarray:
    """Matrix exponential for the small matrices used here.

    Strictly upper-triangular input is summed exactly (nilpotent); the
    triangular pattern of the solvable algebra gets its closed form; the
    general path is scaling and squaring with a Taylor sum at scaled
    norm <= 0.5.
    """
    a = np.asarray(a, dtype=complex)
    if a.shape != (3, 3):
        raise ValueError("matrix_exp3 works on 3x3 matrices")
    lower = abs(a[1, 0]) + abs(a[2, 0]) + abs(a[2, 1])
    diag = abs(a[0, 0]) + abs(a[1, 1]) + abs(a[2, 2])
    if lower == 0.0 and diag == 0.0:
        return np.eye(3, dtype=complex) + a + (a @ a) / 2.0
    if lower == 0.0 and a[0, 1] == 0.0 and a[2, 2] == 0.0:
        out = np.eye(3, dtype=complex)
        out[0, 0] = np.exp(a[0, 0])
        out[1, 1] = np.exp(a[1, 1])
        out[0, 2] = a[0, 2] * _phi1_c(a[0, 0])
        out[1, 2] = a[1, 2] * _phi1_c(a[1, 1])
        return out
    norm = np.linalg.norm(a, ord=np.inf)
    s = max(0, int(np.ceil(np.log2(norm / 0.5))) if norm > 0.5 else 0)
    b = a / (2**s)
    term = np.eye(3, dtype=complex)
    acc = np.eye(3, dtype=complex)
    for m in range(1, _TAYLOR_TERMS + 1):
        term = term @ b / m
        acc = acc + term
    for _ in range(s):
        acc = acc @ acc
    return acc


def _phi1_c(x: complex) -> complex:
    if abs(x) < 1e-8:
        return 1.0 + x / 2.0 + x * x / 6.0
    return (np.exp(x) - 1.0) / x
