"""Tests for the truncated Laurent arithmetic."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from solvharm.errors import BandOverflow, NonConvergent, ZeroArgument
from solvharm.laurent import (
    LaurentLoop,
    conj_reflect,
    loop_add,
    loop_eval,
    loop_exp,
    loop_from_terms,
    loop_mul,
    loop_one,
    loop_scale,
    loop_zero,
    max_coeff_diff,
    negative_part,
    nonnegative_part,
    project_band,
    real_part,
)

# I_j(2), frozen from mpmath.besseli(j, 2) at 30 digits.  These are the
# Laurent coefficients of exp(lam + 1/lam) on the unit circle.
BESSEL_I2 = [
    2.2795853023360672674,
    1.5906368546373290634,
    0.68894844769873820405,
    0.21273995923985265527,
    0.050728569979180238238,
]


def dft_project(fn, band, n=256):
    """Recover Laurent coefficients of a circle function by Fourier projection."""
    k = np.arange(n)
    lam = np.exp(2j * np.pi * k / n)
    vals = np.array([fn(l) for l in lam])
    coeffs = []
    for j in range(-band, band + 1):
        coeffs.append(np.mean(vals * np.exp(-2j * np.pi * j * k / n)))
    return np.array(coeffs)


def random_loop(rng, band, scale=1.0):
    c = scale * (rng.uniform(-1, 1, 2 * band + 1) + 1j * rng.uniform(-1, 1, 2 * band + 1))
    return LaurentLoop(band, c)


class TestAdd:
    def test_disjoint_support(self):
        f = loop_from_terms({-1: 1.0})
        g = loop_from_terms({1: 1.0})
        s = loop_add(f, g)
        assert s.coeff(-1) == 1.0 and s.coeff(1) == 1.0 and s.coeff(0) == 0.0

    def test_identity_element(self):
        rng = np.random.default_rng(7)
        f = random_loop(rng, 3)
        assert max_coeff_diff(loop_add(f, loop_zero(3)), f) == 0.0

    def test_cancellation(self):
        f = loop_from_terms({0: 1.0, 1: 1.0})
        g = loop_from_terms({0: 1.0, 1: -1.0})
        s = loop_add(f, g)
        assert s.coeff(0) == 2.0 and s.coeff(1) == 0.0


class TestMul:
    def test_inverse_powers(self):
        f = loop_from_terms({-1: 1.0})
        g = loop_from_terms({1: 1.0})
        p = loop_mul(f, g)
        assert max_coeff_diff(p, loop_one(0)) == 0.0

    def test_square(self):
        f = loop_from_terms({0: 1.0, 1: 1.0})
        p = loop_mul(f, f, out_band=2)
        assert max_coeff_diff(p, loop_from_terms({0: 1.0, 1: 2.0, 2: 1.0})) == 0.0

    def test_truncation_reports_discarded_mass(self):
        f = loop_from_terms({-1: 1.0, 1: 1.0})
        p = loop_mul(f, f, out_band=1)
        # (lam^-1 + lam)^2 = lam^-2 + 2 + lam^2; the lam^{+-2} terms drop
        assert max_coeff_diff(p, loop_from_terms({0: 2.0}, band=1)) == 0.0
        assert p.discarded == pytest.approx(2.0)

    def test_band_cap(self):
        f = loop_zero(600)
        with pytest.raises(BandOverflow):
            loop_mul(f, f)


class TestExp:
    def test_exp_zero(self):
        assert max_coeff_diff(loop_exp(loop_zero(2)), loop_one(0)) == 0.0

    def test_one_sided_exact(self):
        a = 0.3 - 0.4j
        e = loop_exp(loop_from_terms({-1: a}), out_band=3)
        want = loop_from_terms({0: 1.0, -1: a, -2: a**2 / 2, -3: a**3 / 6})
        assert max_coeff_diff(e, want) < 1e-15

    def test_two_sided_bessel(self):
        # exp(lam + 1/lam): coefficient at lam^j is I_j(2)
        f = loop_from_terms({-1: 1.0, 1: 1.0})
        e = loop_exp(f, out_band=4)
        for j in range(-4, 5):
            assert abs(e.coeff(j) - BESSEL_I2[abs(j)]) < 1e-13
        # and the same through the Fourier-projection oracle
        oracle = dft_project(lambda l: np.exp(l + 1 / l), 4)
        for j in range(-4, 5):
            assert abs(e.coeff(j) - oracle[j + 4]) < 1e-13

    def test_exp_inverse_pair(self):
        f = loop_from_terms({-1: 0.7j, -2: 0.2})
        p = loop_mul(loop_exp(f), loop_exp(loop_scale(-1.0, f)))
        assert max_coeff_diff(p, loop_one(0)) < 1e-13

    def test_nonconvergent(self):
        f = loop_from_terms({-1: 3.0, 1: 3.0})
        with pytest.raises(NonConvergent):
            loop_exp(f, max_terms=4)


class TestConjReflect:
    def test_swaps_powers(self):
        f = loop_from_terms({-1: 1.0})
        assert max_coeff_diff(conj_reflect(f), loop_from_terms({1: 1.0})) == 0.0

    def test_conjugates_constants(self):
        f = loop_from_terms({0: 1j})
        assert conj_reflect(f).coeff(0) == -1j

    def test_involution(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            f = random_loop(rng, 4)
            assert max_coeff_diff(conj_reflect(conj_reflect(f)), f) == 0.0

    def test_pointwise_conjugation_on_circle(self):
        rng = np.random.default_rng(12)
        f = random_loop(rng, 4)
        g = conj_reflect(f)
        for k in range(16):
            lam = np.exp(2j * np.pi * k / 16)
            assert abs(loop_eval(g, lam) - np.conj(loop_eval(f, lam))) < 1e-13


class TestRealPart:
    def test_constant_loop(self):
        z = 2.0 + 3.0j
        r = real_part(loop_from_terms({-1: z}))
        assert r.coeff(-1) == pytest.approx(z / 2)
        assert r.coeff(1) == pytest.approx(np.conj(z) / 2)

    def test_eval_at_minus_one(self):
        xi = 0.8 - 0.3j
        r = real_part(loop_from_terms({-1: 2 * xi}))
        # 2 Re(lam^-1 xi) at lam=-1 is -2 Re(xi)
        assert loop_eval(r, -1.0) == pytest.approx(-2 * xi.real)

    def test_pointwise_real_part(self):
        rng = np.random.default_rng(13)
        f = random_loop(rng, 5)
        r = real_part(f)
        for k in range(64):
            lam = np.exp(2j * np.pi * k / 64)
            fv = loop_eval(f, lam)
            assert abs(loop_eval(r, lam) - 0.5 * (fv + np.conj(fv))) < 1e-12

    def test_idempotent_and_real_on_circle(self):
        rng = np.random.default_rng(14)
        f = random_loop(rng, 4)
        r = real_part(f)
        assert max_coeff_diff(real_part(r), r) < 1e-15
        for k in range(32):
            lam = np.exp(2j * np.pi * k / 32)
            assert abs(loop_eval(r, lam).imag) < 1e-12


class TestProject:
    def test_keep_upper(self):
        f = loop_from_terms({-1: 1.0, 0: 1.0, 1: 1.0})
        p = project_band(f, 0, 10)
        assert p.coeff(-1) == 0.0 and p.coeff(0) == 1.0 and p.coeff(1) == 1.0

    def test_full_band_is_identity(self):
        rng = np.random.default_rng(15)
        f = random_loop(rng, 3)
        assert max_coeff_diff(project_band(f, -3, 3), f) == 0.0

    def test_partition_of_support(self):
        rng = np.random.default_rng(16)
        f = random_loop(rng, 4)
        assert max_coeff_diff(loop_add(negative_part(f), nonnegative_part(f)), f) == 0.0


class TestEval:
    def test_symmetric_at_one(self):
        f = loop_from_terms({-1: 1.0, 1: 1.0})
        assert loop_eval(f, 1.0) == pytest.approx(2.0)
        assert loop_eval(f, -1.0) == pytest.approx(-2.0)

    def test_zero_argument(self):
        with pytest.raises(ZeroArgument):
            loop_eval(loop_one(1), 0.0)

    def test_against_naive_extended_precision(self):
        import mpmath as mp

        mp.mp.dps = 40
        rng = np.random.default_rng(17)
        f = random_loop(rng, 6)
        for lam in (1j, np.exp(0.7j), np.exp(-2.1j)):
            want = mp.mpc(0)
            ml = mp.mpc(lam)
            for j in range(-6, 7):
                c = f.coeff(j)
                want += mp.mpc(c) * ml**j
            got = loop_eval(f, lam)
            assert abs(got - complex(want)) < 1e-13


small_coeff = st.complex_numbers(
    max_magnitude=1.0, allow_nan=False, allow_infinity=False, allow_subnormal=False
)


@st.composite
def band2_loop(draw):
    cs = draw(st.lists(small_coeff, min_size=5, max_size=5))
    return LaurentLoop(2, np.array(cs))


@settings(max_examples=50, deadline=None)
@given(band2_loop(), band2_loop(), band2_loop())
def test_ring_axioms(f, g, h):
    lhs = loop_mul(loop_mul(f, g), h)
    rhs = loop_mul(f, loop_mul(g, h))
    assert max_coeff_diff(lhs, rhs) < 1e-12
    lhs = loop_mul(f, loop_add(g, h))
    rhs = loop_add(loop_mul(f, g), loop_mul(f, h))
    assert max_coeff_diff(lhs, rhs) < 1e-12


@settings(max_examples=50, deadline=None)
@given(band2_loop(), band2_loop())
def test_conj_reflect_multiplicative(f, g):
    lhs = conj_reflect(loop_mul(f, g))
    rhs = loop_mul(conj_reflect(f), conj_reflect(g))
    assert max_coeff_diff(lhs, rhs) < 1e-12


@settings(max_examples=50, deadline=None)
@given(band2_loop())
def test_real_part_fixed_by_conj_reflect(f):
    r = real_part(f)
    assert max_coeff_diff(conj_reflect(r), r) < 1e-14
