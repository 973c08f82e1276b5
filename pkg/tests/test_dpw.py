"""Tests for the potential-to-map pipeline."""

import numpy as np
import pytest

from solvharm.dpw import (
    HoloPoly,
    MapGrid,
    PotentialSpec,
    cauchy_quadrature,
    closed_form_map,
    default_lambdas,
    extract_normalized_potential,
    integrate_Xi,
    ode_oracle,
    poly_zero,
    solve_step1,
    step2_iwasawa,
    step3_extended,
    synthesize,
    torsion_free_map,
)
from solvharm.errors import (
    BandOverflow,
    GridTooSmall,
    NonCommuting,
    SingularityTooClose,
    ZeroArgument,
)
from solvharm.laurent import loop_from_terms, max_coeff_diff
from solvharm.liegroup import (
    SolvParams,
    nil3_algebra,
    nil3_matrix_basis,
    nil3_point_from_matrix,
)
from solvharm.loopfactor import check_reality

PLANE = PotentialSpec(
    HoloPoly((-0.25,)), HoloPoly((0.25j,)), poly_zero(), SolvParams(1.0, 1.0)
)


def random_potential(rng, params, degree=2, scale=0.5, band=16):
    def poly():
        c = scale * (
            rng.uniform(-1, 1, degree + 1) + 1j * rng.uniform(-1, 1, degree + 1)
        )
        return HoloPoly(tuple(c))

    return PotentialSpec(poly(), poly(), poly(), params, band=band)


def frame_matrix(params, vals):
    m = np.eye(3, dtype=complex)
    m[0, 0] = np.exp(params.mu1 * vals[2])
    m[1, 1] = np.exp(params.mu2 * vals[2])
    m[0, 2] = vals[0]
    m[1, 2] = vals[1]
    return m


class TestPolys:
    def test_integrate_xi_cases(self):
        assert integrate_Xi(poly_zero(), 0, 1.7) == 0
        assert integrate_Xi(HoloPoly((2.5,)), 0, 1j) == pytest.approx(2.5j)
        assert integrate_Xi(HoloPoly((0, 1)), 0, 2.0) == pytest.approx(2.0)

    def test_degree_cap(self):
        HoloPoly(tuple(np.ones(65)))
        with pytest.raises(ValueError):
            HoloPoly(tuple(np.ones(66)))

    def test_band_floor(self):
        with pytest.raises(ValueError):
            PotentialSpec(poly_zero(), poly_zero(), poly_zero(), SolvParams(1, 1), band=1)


class TestStep1:
    def test_plane_frame(self):
        z = 0.7 - 0.3j
        C = solve_step1(PLANE, z)
        assert max_coeff_diff(C.x1, loop_from_terms({-1: -z / 4})) < 1e-15
        assert max_coeff_diff(C.x2, loop_from_terms({-1: 1j * z / 4})) < 1e-15
        assert C.x3.is_zero()

    def test_zero_potential(self):
        pot = PotentialSpec(poly_zero(), poly_zero(), poly_zero(), SolvParams(1, -1))
        C = solve_step1(pot, 0.5 + 0.5j)
        for f in C.entries():
            assert f.is_zero()

    def test_coefficients_against_quadrature(self):
        import mpmath as mp

        mp.mp.dps = 30
        p = SolvParams(1.0, 0.5)
        pot = PotentialSpec(
            HoloPoly((0.2, -0.1j, 0.15)),
            HoloPoly((0.1j, 0.05)),
            HoloPoly((0.3, 0.2j)),
            p,
            band=16,
        )
        z = 0.8 + 0.4j
        C = solve_step1(pot, z)

        def xi(poly, w):
            return sum(c * w**m for m, c in enumerate(poly.coeffs))

        def Xi(w):
            return mp.quad(lambda s: xi(pot.xi3, w * s) * w, [0, 1])

        for mu_k, xik, loop in ((p.mu1, pot.xi1, C.x1), (p.mu2, pot.xi2, C.x2)):
            for m in range(4):
                want = mp.quad(
                    lambda s: xi(xik, z * s)
                    * (mu_k * Xi(z * s)) ** m
                    / mp.factorial(m)
                    * z,
                    [0, 1],
                )
                got = loop.coeff(-(m + 1))
                assert abs(got - complex(want)) < 1e-12

    def test_no_positive_coefficients(self):
        rng = np.random.default_rng(5)
        C = solve_step1(random_potential(rng, SolvParams(1, -1)), 0.9 + 0.9j)
        for f in C.entries():
            for j in range(1, f.band + 1):
                assert f.coeff(j) == 0

    def test_band_overflow_when_not_decayed(self):
        rng = np.random.default_rng(6)
        pot = random_potential(rng, SolvParams(1, -1), band=12)
        with pytest.raises(BandOverflow):
            solve_step1(pot, 1.0 + 1.0j)
        pot16 = PotentialSpec(pot.xi1, pot.xi2, pot.xi3, pot.params, band=16)
        solve_step1(pot16, 1.0 + 1.0j)


class TestOdeOracle:
    def test_zero_potential_identity(self):
        pot = PotentialSpec(poly_zero(), poly_zero(), poly_zero(), SolvParams(1, 1))
        assert np.allclose(ode_oracle(pot, 1 + 1j, -1.0), np.eye(3))

    def test_argument_guards(self):
        with pytest.raises(ZeroArgument):
            ode_oracle(PLANE, 1.0, 0.0)
        with pytest.raises(ValueError):
            ode_oracle(PLANE, 1.0, 1.0, n_steps=8)

    def test_matches_closed_form(self):
        rng = np.random.default_rng(7)
        p = SolvParams(1.0, -1.0)
        pot = random_potential(rng, p)
        z = 0.8 - 0.5j
        C = solve_step1(pot, z)
        for lam in (1.0, -1.0, 1j, -1j):
            M = ode_oracle(pot, z, lam, 512)
            want = frame_matrix(p, C.eval_at(lam))
            rel = np.max(np.abs(M - want)) / max(1.0, np.max(np.abs(want)))
            assert rel < 1e-8

    def test_fourth_order_convergence(self):
        rng = np.random.default_rng(8)
        p = SolvParams(1.0, 0.5)
        pot = random_potential(rng, p)
        z = 1.0 + 0.5j
        ref = frame_matrix(p, solve_step1(pot, z).eval_at(1j))
        errs = [
            np.max(np.abs(ode_oracle(pot, z, 1j, n) - ref)) for n in (16, 32, 64)
        ]
        slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(np.abs(slopes - 4.0) < 0.5)


class TestSteps23:
    def test_plane_real_factor(self):
        z = 0.6 + 0.2j
        C = solve_step1(PLANE, z)
        F, W = step2_iwasawa(C)
        assert max_coeff_diff(
            F.x1, loop_from_terms({-1: -z / 4, 1: np.conj(-z / 4)})
        ) < 1e-15
        ok, _ = check_reality(F)
        assert ok

    def test_extended_frame_normalized(self):
        rng = np.random.default_rng(9)
        pot = random_potential(rng, SolvParams(1.0, -1.0))
        C = solve_step1(pot, 0.5 - 0.7j)
        F, _ = step2_iwasawa(C)
        Fh = step3_extended(F)
        assert max(abs(v) for v in Fh.eval_at(1.0)) < 1e-12

    def test_plane_extended_frame_map(self):
        z = 0.9 - 0.4j
        C = solve_step1(PLANE, z)
        F, _ = step2_iwasawa(C)
        Fh = step3_extended(F)
        vals = Fh.eval_at(-1.0)
        assert abs(vals[0] - z.real) < 1e-14
        assert abs(vals[1] - z.imag) < 1e-14
        assert abs(vals[2]) < 1e-14


class TestSynthesize:
    def test_plane_is_exact(self):
        res = synthesize(PLANE, (-1, 1, -1, 1), 9, 9)
        g = res.grid
        X, Y = np.meshgrid(g.xs, g.ys)
        want = np.stack([X, Y, np.zeros_like(X)], axis=-1)
        assert np.max(np.abs(g.points - want)) < 1e-12
        assert res.diagnostics["n_masked"] == 0

    def test_zero_potential_constant_map(self):
        pot = PotentialSpec(poly_zero(), poly_zero(), poly_zero(), SolvParams(1, 1))
        res = synthesize(pot, (-1, 1, -1, 1), 5, 5)
        assert np.max(np.abs(res.grid.points)) == 0.0

    def test_lambda_slices(self):
        res = synthesize(PLANE, (-1, 1, -1, 1), 5, 5)
        lams = [l for l, _ in res.grid.lambda_slices]
        assert any(l == -1 for l in lams)
        assert len(lams) == len(default_lambdas())
        one = next(s for l, s in res.grid.lambda_slices if l == 1)
        assert np.array_equal(one, res.grid.points)

    def test_slices_are_rigid_motions_of_plane(self):
        # every lambda slice of the plane is again a plane through 0
        res = synthesize(PLANE, (-1, 1, -1, 1), 5, 5)
        for lam, s in res.grid.lambda_slices:
            assert np.max(np.abs(s[:, :, 2])) < 1e-14

    def test_masking_keeps_running(self):
        pot = PotentialSpec(
            HoloPoly((1.0,)), poly_zero(), HoloPoly((2.0,)), SolvParams(1.0, 1.0)
        )
        res = synthesize(pot, (-1, 1, -1, 1), 9, 9)
        n = res.diagnostics["n_masked"]
        assert 0 < n < 81
        assert np.all(res.grid.points[res.grid.mask] == 0.0)

    def test_grid_guards(self):
        with pytest.raises(GridTooSmall):
            synthesize(PLANE, (-1, 1, -1, 1), 4, 9)
        with pytest.raises(ValueError):
            synthesize(PLANE, (-1, 1, -2, 2), 9, 9)

    def test_keep_frames(self):
        res = synthesize(PLANE, (-1, 1, -1, 1), 5, 5, keep_frames=True)
        assert res.frames is not None
        fr = res.frames.frames[2][3]
        assert max(abs(v) for v in fr.eval_at(1.0)) < 1e-10


class TestClosedForm:
    def test_plane(self):
        pt = closed_form_map(PLANE, 0.25 - 0.75j)
        assert abs(pt.x1 - 0.25) < 1e-14
        assert abs(pt.x2 + 0.75) < 1e-14
        assert pt.x3 == 0.0

    def test_flat_parameters_reduce_to_harmonic_functions(self):
        rng = np.random.default_rng(10)
        pot = random_potential(rng, SolvParams(0.0, 0.0))
        for z in (0.3 + 0.1j, -0.5 - 0.5j, 0.9j):
            pt = closed_form_map(pot, z)
            w1 = -4 * np.real(integrate_Xi(pot.xi1, 0, z))
            w2 = -4 * np.real(integrate_Xi(pot.xi2, 0, z))
            w3 = -4 * np.real(integrate_Xi(pot.xi3, 0, z))
            assert abs(pt.x1 - w1) < 1e-12
            assert abs(pt.x2 - w2) < 1e-12
            assert abs(pt.x3 - w3) < 1e-12

    def test_agrees_with_frame_route(self):
        rng = np.random.default_rng(11)
        for mus in [(1.0, 1.0), (1.0, -1.0), (0.0, 1.0), (0.0, 0.0)]:
            pot = random_potential(rng, SolvParams(*mus), scale=0.35)
            res = synthesize(pot, (-1, 1, -1, 1), 5, 5)
            g = res.grid
            for iy, ix in ((0, 0), (2, 3), (4, 4)):
                z = g.xs[ix] + 1j * g.ys[iy]
                cf = closed_form_map(pot, z)
                got = g.points[iy, ix]
                assert np.max(np.abs(got - [cf.x1, cf.x2, cf.x3])) < 1e-10


class TestExtraction:
    def test_plane_recovers_potential(self):
        res = synthesize(PLANE, (-1, 1, -1, 1), 17, 17)
        xi1, xi2, xi3 = extract_normalized_potential(
            res.grid, PLANE.params, 0.25 + 0.25j
        )
        assert abs(xi1 - (-0.25)) < 1e-13
        assert abs(xi2 - 0.25j) < 1e-13
        assert abs(xi3) < 1e-13

    def test_boundary_guard(self):
        res = synthesize(PLANE, (-1, 1, -1, 1), 9, 9)
        with pytest.raises(SingularityTooClose):
            extract_normalized_potential(res.grid, PLANE.params, 1.0 + 0j)
        with pytest.raises(ValueError):
            extract_normalized_potential(res.grid, PLANE.params, 0j, derivative_order=3)

    def test_cauchy_quadrature_against_disk_transform(self):
        # over a disk, integral of 1/(xi - z) dxi^dxibar = 2i pi conj(z):
        # the area integral of 1/(z - xi) is pi conj(z), and the wedge
        # measure contributes the factor -2i together with the sign flip
        z = 0.2 + 0.1j
        errs = []
        for n in (101, 201):
            xs = np.linspace(-1, 1, n)
            h = xs[1] - xs[0]
            nodes = (xs[None, :] + 1j * xs[:, None]).ravel()
            inside = np.abs(nodes) < 0.8
            vals = np.ones(inside.sum(), dtype=complex)
            got = cauchy_quadrature(vals, nodes[inside], z, h)
            errs.append(abs(got - 2j * np.pi * np.conj(z)))
        # staircase boundary of the disk keeps this first order
        assert errs[1] < errs[0] / 1.5
        assert errs[1] < 5e-2

    def test_round_trip_no_third_component(self):
        rng = np.random.default_rng(12)
        c1 = 0.3 * (rng.uniform(-1, 1, 3) + 1j * rng.uniform(-1, 1, 3))
        c2 = 0.3 * (rng.uniform(-1, 1, 3) + 1j * rng.uniform(-1, 1, 3))
        pot = PotentialSpec(
            HoloPoly(tuple(c1)), HoloPoly(tuple(c2)), poly_zero(), SolvParams(1.0, -1.0)
        )
        res = synthesize(pot, (-1, 1, -1, 1), 65, 65, lambdas=[1.0])
        z = 0.25 + 0.125j
        xi1, xi2, xi3 = extract_normalized_potential(
            res.grid, pot.params, z, derivative_order=4
        )
        assert abs(xi1 - pot.xi1.eval(z)) < 1e-6
        assert abs(xi2 - pot.xi2.eval(z)) < 1e-6
        assert abs(xi3) < 1e-10

    def test_round_trip_flat_parameters(self):
        rng = np.random.default_rng(13)
        pot = random_potential(rng, SolvParams(0.0, 0.0), scale=0.25)
        res = synthesize(pot, (-1, 1, -1, 1), 65, 65, lambdas=[1.0])
        z = -0.25 + 0.25j
        xi1, xi2, xi3 = extract_normalized_potential(
            res.grid, pot.params, z, derivative_order=4
        )
        assert abs(xi1 - pot.xi1.eval(z)) < 1e-4
        assert abs(xi2 - pot.xi2.eval(z)) < 1e-4
        assert abs(xi3 - pot.xi3.eval(z)) < 1e-4


class TestTorsionFreeMap:
    def test_zero_components(self):
        alg = nil3_algebra()
        basis = nil3_matrix_basis()
        m = torsion_free_map([poly_zero()] * 3, alg, basis, 0, 1 + 1j, 1.0)
        assert np.allclose(m, np.eye(3))

    def test_vertical_plane(self):
        alg = nil3_algebra()
        basis = nil3_matrix_basis()
        comps = [HoloPoly((0.5,)), poly_zero(), HoloPoly((-0.5j,))]
        for z in (0.3 + 0.7j, -1.1 + 0.4j, 2.0 - 1.0j):
            m = torsion_free_map(comps, alg, basis, 0, z, 1.0)
            pt = nil3_point_from_matrix(m)
            assert abs(pt[0] - z.real) < 1e-12
            assert abs(pt[1]) < 1e-14
            assert abs(pt[2] - z.imag) < 1e-12

    def test_noncommuting_rejected(self):
        alg = nil3_algebra()
        basis = nil3_matrix_basis()
        comps = [HoloPoly((1.0,)), HoloPoly((0, 1.0)), poly_zero()]
        with pytest.raises(NonCommuting):
            torsion_free_map(comps, alg, basis, 0, 1.0, 1.0)

    def test_abelian_linear_immersion(self):
        from solvharm.liegroup import LieAlgebraData

        alg = LieAlgebraData(np.zeros((2, 2, 2)))
        e13 = np.zeros((3, 3))
        e13[0, 2] = 1
        e23 = np.zeros((3, 3))
        e23[1, 2] = 1
        a, b = 0.4 - 0.2j, 0.1 + 0.9j
        z = 1.2 - 0.7j
        m = torsion_free_map(
            [HoloPoly((a,)), HoloPoly((b,))], alg, [e13, e23], 0, z, 1.0
        )
        assert abs(m[0, 2] - 2 * np.real(z * a)) < 1e-12
        assert abs(m[1, 2] - 2 * np.real(z * b)) < 1e-12

    def test_zero_lambda(self):
        with pytest.raises(ZeroArgument):
            torsion_free_map(
                [poly_zero()] * 3, nil3_algebra(), nil3_matrix_basis(), 0, 1.0, 0.0
            )
