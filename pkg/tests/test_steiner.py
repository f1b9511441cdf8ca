import math
from fractions import Fraction

import numpy as np
import pytest

from persivol.errors import ConfigurationError
from persivol.persistence import Bar, PersistenceDiagram, count_bars
from persivol.steiner import (
    ChiProfile,
    PolynomialR,
    chi_profile,
    error_constant,
    extraction_matrix,
    integrate_chi_poly,
    legendre_basis,
    project_and_extract,
    theoretical_bound,
    unit_ball_volume,
)

INF = math.inf


def diag(*bars):
    return PersistenceDiagram(tuple(Bar(*b) for b in bars))


class TestChiProfile:
    def test_empty_diagram_is_zero(self):
        p = chi_profile(diag(), 1.0)
        assert p.breakpoints == ()
        assert p.values == (0,)

    def test_single_essential_bar(self):
        p = chi_profile(diag((0, 0.0, INF)), 1.0)
        assert p.values == (1,)

    def test_degree_one_bar_flips_sign(self):
        p = chi_profile(diag((0, 0.0, INF), (1, 0.25, 0.75)), 1.0)
        assert p.breakpoints == (0.25, 0.75)
        assert p.values == (1, 0, 1)

    def test_bars_outside_window_ignored(self):
        p = chi_profile(diag((0, 1.5, 2.0)), 1.0)
        assert p.values == (0,)

    def test_requires_positive_r(self):
        with pytest.raises(ConfigurationError):
            chi_profile(diag(), 0.0)

    def test_evaluation_is_right_continuous(self):
        p = chi_profile(diag((0, 0.5, INF)), 1.0)
        assert p(0.5) == 1
        assert p(0.49) == 0


class TestIntegration:
    def test_constant_profile_unit_poly(self):
        p = ChiProfile((), (1,), 1.0)
        assert integrate_chi_poly(p, PolynomialR((1.0,))) == pytest.approx(1.0)

    def test_half_bar(self):
        p = chi_profile(diag((0, 0.0, 0.5)), 1.0)
        assert integrate_chi_poly(p, PolynomialR((1.0,))) == pytest.approx(0.5)

    def test_linear_weight(self):
        p = ChiProfile((), (1,), 1.0)
        assert integrate_chi_poly(p, PolynomialR((0.0, 2.0))) == pytest.approx(1.0)

    def test_signed_pieces(self):
        p = ChiProfile((0.5,), (1, -2), 1.0)
        assert integrate_chi_poly(p, PolynomialR((1.0,))) == pytest.approx(0.5 - 1.0)


class TestLegendreBasis:
    def test_degree_zero_is_normalized_constant(self):
        (p0,) = legendre_basis(0, 1.0)
        assert p0.coeffs == (1.0,)

    def test_degree_one_shifted(self):
        p1 = legendre_basis(1, 1.0)[1]
        s3 = math.sqrt(3.0)
        assert p1.coeffs == pytest.approx((-s3, 2 * s3))

    def test_coefficient_magnitudes(self):
        # |c_i| = R^-(i+1/2) * sqrt(2j+1) * C(j,i) * C(i+j,i)
        for R in (0.5, 1.0, 2.0):
            basis = legendre_basis(5, R)
            for j in range(6):
                for i in range(j + 1):
                    expected = (
                        math.sqrt(2 * j + 1)
                        * math.comb(j, i)
                        * math.comb(i + j, i)
                        / R ** (i + 0.5)
                    )
                    assert abs(basis[j].coeffs[i]) == pytest.approx(expected, rel=1e-12)

    def test_orthonormality(self):
        for R in (0.5, 1.0, 2.5):
            for d in (1, 2, 3):
                basis = legendre_basis(d, R)
                for j, pj in enumerate(basis):
                    for k, pk in enumerate(basis):
                        ip = pj.inner_product(pk, R)
                        assert ip == pytest.approx(1.0 if j == k else 0.0, abs=1e-10)

    def test_orthonormality_high_degree(self):
        # Beyond the ambient degrees cancellation grows; still tiny at 6.
        basis = legendre_basis(6, 1.0)
        for j, pj in enumerate(basis):
            for k, pk in enumerate(basis):
                ip = pj.inner_product(pk, 1.0)
                assert ip == pytest.approx(1.0 if j == k else 0.0, abs=5e-9)

    def test_degree_guard(self):
        with pytest.raises(ConfigurationError):
            legendre_basis(11, 1.0)


class TestExtraction:
    def test_disk_steiner_polynomial(self):
        # Q(r) = pi + 2*pi*r + pi*r^2 for the unit disk.
        R, d = 1.0, 2
        q = PolynomialR((math.pi, 2 * math.pi, math.pi))
        basis = legendre_basis(d, R)
        a = [q.inner_product(p, R) for p in basis]
        vols = project_and_extract(a, R, d)
        assert vols == pytest.approx((1.0, math.pi, math.pi), rel=1e-10)

    def test_constant_function(self):
        # A constant c has monomial coefficients (c, 0, 0), i.e. only the
        # r^0 slot, which carries omega_0 * V_d.
        R, d = 1.0, 2
        basis = legendre_basis(d, R)
        a = [PolynomialR((math.pi, 0.0, 0.0)).inner_product(p, R) for p in basis]
        vols = project_and_extract(a, R, d)
        assert vols == pytest.approx((0.0, 0.0, math.pi), abs=1e-10)

    def test_zero_inner_products(self):
        assert project_and_extract([0.0, 0.0, 0.0], 1.0, 2) == (0.0, 0.0, 0.0)

    def test_projection_idempotent_on_polynomials(self):
        rng = np.random.default_rng(41)
        for d in (1, 2, 3):
            for R in (0.5, 1.0, 2.0):
                basis = legendre_basis(d, R)
                for _ in range(5):
                    vols_in = rng.random(d + 1) * 4 + 0.5
                    coeffs = [
                        unit_ball_volume(i) * vols_in[d - i] for i in range(d + 1)
                    ]
                    q = PolynomialR(tuple(coeffs))
                    a = [q.inner_product(p, R) for p in basis]
                    vols_out = project_and_extract(a, R, d)
                    assert vols_out == pytest.approx(tuple(vols_in), rel=1e-10)

    def test_arity_check(self):
        with pytest.raises(ConfigurationError):
            project_and_extract([1.0, 2.0], 1.0, 2)


class TestConstants:
    def test_unit_ball_volumes(self):
        assert unit_ball_volume(0) == pytest.approx(1.0)
        assert unit_ball_volume(1) == pytest.approx(2.0)
        assert unit_ball_volume(2) == pytest.approx(math.pi)
        assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)
        assert unit_ball_volume(4) == pytest.approx(math.pi**2 / 2)

    def test_error_constants(self):
        assert error_constant(0, 1) == pytest.approx(8.0)
        assert error_constant(1, 2) == pytest.approx(72.0)
        assert error_constant(0, 0) == pytest.approx(4.0)

    def test_error_constant_matches_rational_sum(self):
        for d in range(4):
            for i in range(d + 1):
                total = sum(
                    Fraction(2 * j + 1) * math.comb(j, i) * math.comb(i + j, i)
                    for j in range(i, d + 1)
                )
                assert error_constant(i, d) == float(4 * total) / unit_ball_volume(d - i)

    def test_error_constant_range_check(self):
        with pytest.raises(ConfigurationError):
            error_constant(3, 2)

    def test_theoretical_bound(self):
        assert theoretical_bound(0, 1, 0.0, 1.0, 1.0, 1.0, 1.0) == 0.0
        assert theoretical_bound(0, 1, 0.1, 1.0, 1.0, 0.5, 0.5) == pytest.approx(0.8)
        one = theoretical_bound(1, 2, 0.05, 0.5, 1.0, 2.0, 3.0)
        two = theoretical_bound(1, 2, 0.10, 0.5, 1.0, 2.0, 3.0)
        assert two == pytest.approx(2 * one)
        with pytest.raises(ConfigurationError):
            theoretical_bound(0, 1, 0.1, 0.0, 1.0, 1.0, 1.0)
        with pytest.raises(ConfigurationError):
            theoretical_bound(0, 1, 0.1, 1.0, 0.0, 1.0, 1.0)


def _extract_from_profile(profile, R, d):
    basis = legendre_basis(d, R)
    a = [integrate_chi_poly(profile, p) for p in basis]
    return np.asarray(project_and_extract(a, R, d))


class TestPerturbationControl:
    def test_step_perturbation_bound(self):
        # Adding a unit-height step of length L moves V_i by at most
        # (omega_i / omega_{d-i}) * P(d-i, d) * L / (4 R^(d-i+1)): V_i reads
        # the monomial coefficient of degree d-i, so the tight constant is
        # the index-flipped one.
        rng = np.random.default_rng(42)
        for R in (0.5, 1.0):
            for d in (1, 2, 3):
                for _ in range(20):
                    k = int(rng.integers(0, 4))
                    cuts = np.sort(rng.random(k) * R)
                    vals = rng.integers(-2, 3, size=k + 1)
                    base = ChiProfile(
                        tuple(float(c) for c in cuts), tuple(int(v) for v in vals), R
                    )
                    u = float(rng.random() * 0.9 * R)
                    length = float(rng.random() * (R - u))
                    if length <= 0:
                        continue
                    bumped = _add_step(base, u, u + length, R)
                    dv = np.abs(
                        _extract_from_profile(bumped, R, d)
                        - _extract_from_profile(base, R, d)
                    )
                    for i in range(d + 1):
                        bound = (
                            unit_ball_volume(i)
                            / unit_ball_volume(d - i)
                            * error_constant(d - i, d)
                            * length
                            / (4 * R ** (d - i + 1))
                        )
                        assert dv[i] <= bound + 1e-9

    def test_chi_averaging_inequality(self):
        # Diagrams within bottleneck delta of each other have profiles whose
        # absolute difference integrates to at most 2*delta*(N + N').
        rng = np.random.default_rng(43)
        R = 1.0
        for _ in range(30):
            bars = []
            for _ in range(int(rng.integers(1, 7))):
                b = float(rng.random() * R)
                length = float(rng.random() * 0.8)
                bars.append((int(rng.integers(0, 2)), b, b + length + 1e-6))
            d1 = diag(*bars)
            delta = float(rng.random() * 0.15)
            moved = []
            for dim, b, dth in bars:
                if (dth - b) / 2 <= delta and rng.random() < 0.5:
                    continue  # absorbed into the diagonal
                nb = b + float(rng.uniform(-delta, delta))
                nd = dth + float(rng.uniform(-delta, delta))
                if nd <= nb:
                    nb, nd = nd, nb
                if nd > nb:
                    moved.append((dim, nb, nd))
            d2 = diag(*moved)
            total = _l1_profile_distance(
                chi_profile(d1, R), chi_profile(d2, R)
            )
            n1 = count_bars(d1, 0.0, R) if d1.bars else 0
            n2 = count_bars(d2, 0.0, R) if d2.bars else 0
            assert total <= 2 * delta * (n1 + n2) + 1e-9


def _add_step(profile, lo, hi, R):
    events = {}
    edges = profile.edges()
    for k, v in enumerate(profile.values):
        events[edges[k]] = events.get(edges[k], 0) + v
        events[edges[k + 1]] = events.get(edges[k + 1], 0) - v
    events[lo] = events.get(lo, 0) + 1
    events[hi] = events.get(hi, 0) - 1
    breaks, vals, cur = [], [], 0
    items = sorted(events.items())
    for pos, delta in items:
        cur += delta
        if 0.0 < pos < R:
            breaks.append(pos)
            vals.append(cur)
    start = sum(delta for pos, delta in items if pos <= 0.0)
    out_vals = [start]
    cur = start
    merged_breaks = []
    for pos, v in zip(breaks, vals):
        if v != cur:
            merged_breaks.append(pos)
            out_vals.append(v)
            cur = v
    return ChiProfile(tuple(merged_breaks), tuple(out_vals), R)


def _l1_profile_distance(p1, p2):
    cuts = sorted(set(p1.edges()) | set(p2.edges()))
    total = 0.0
    for lo, hi in zip(cuts, cuts[1:]):
        mid = (lo + hi) / 2
        total += abs(p1(mid) - p2(mid)) * (hi - lo)
    return total
