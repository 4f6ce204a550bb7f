import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specheck.errors import InvalidInput
from specheck.inequalities import (
    InequalityCase,
    VerificationRecord,
    ag_mean_check,
    bhatia_kittaneh_check,
    corollary2_check,
    drury_check,
    is_proven,
    make_record,
    mean_comparison_check,
    monotonicity_trace,
    proposition4_check,
    zhan_norm_check,
    zhan_singular_value_check,
)
from specheck.linalg import random_complex, random_psd

I2 = np.eye(2)


def psd_pair(n, rng, spectrum="uniform"):
    return random_psd(n, spectrum, rng), random_psd(n, spectrum, rng)


def test_record_policy():
    rec = make_record("x", [1.0, 2.0], [1.0, 2.0 - 1e-10])
    assert rec.passed and rec.tol == pytest.approx(1e-9 * 2.0, rel=1e-6)
    rec = make_record("x", [1.0], [1.0 - 1e-8])
    assert not rec.passed


def test_record_json_round_trip():
    rec = zhan_singular_value_check(np.diag([2.0, 1.0]), I2, 1.0, 2.0, seed=5)
    obj = rec.to_json()
    assert set(obj) >= {"check", "n", "r", "t", "k", "margins", "pass", "proven", "tol", "seed"}
    back = VerificationRecord.from_json(obj)
    np.testing.assert_array_equal(back.margins, rec.margins)
    assert back.seed == 5 and back.passed


@pytest.mark.parametrize("r", [0.0, 0.5, 1.0, 1.5, 2.0])
@pytest.mark.parametrize("t", [-1.9, 0.0, 2.0])
def test_zhan_identity_equality(r, t):
    rec = zhan_singular_value_check(np.eye(3), np.eye(3), r, t)
    np.testing.assert_allclose(rec.lhs, 2 * (2 + t), rtol=1e-14)
    np.testing.assert_allclose(rec.margins, 0, atol=1e-12)
    assert rec.passed


def test_zhan_diagonal_example():
    rec = zhan_singular_value_check(np.diag([2.0, 1.0]), I2, 1.0, 2.0)
    np.testing.assert_allclose(rec.lhs, [16, 8], rtol=1e-14)
    np.testing.assert_allclose(rec.rhs, [18, 8], rtol=1e-14)
    np.testing.assert_allclose(rec.margins, [2, 0], atol=1e-13)
    assert rec.passed


def test_zhan_two_by_two_against_high_precision_oracle():
    # 50-digit closed-form 2x2 square roots and singular values, computed offline.
    lhs = [7.532878961701864132766068, 1.501910299701498604820221]
    rhs = [11.06225774829854965236661, 5.062257748298549652366613]
    rec = zhan_singular_value_check([[2, 1], [1, 1]], np.diag([1.0, 2.0]), 0.5, -1.0)
    np.testing.assert_allclose(rec.lhs, lhs, rtol=1e-13)
    np.testing.assert_allclose(rec.rhs, rhs, rtol=1e-13)
    assert rec.passed and rec.min_margin > 0


def test_zhan_rejects_t_at_minus_two():
    with pytest.raises(InvalidInput, match="exceed -2"):
        zhan_singular_value_check(I2, I2, 1.0, -2.0)
    with pytest.raises(InvalidInput):
        zhan_singular_value_check(I2, I2, 2.5, 0.0)


def test_proven_marker():
    assert is_proven(0.5, 1.3) and is_proven(1.0, -1.9) and is_proven(1.5, 2.0)
    assert is_proven(0.3, 0.0) and is_proven(1.8, 0.0)
    assert not is_proven(0.75, 1.0)
    assert not zhan_singular_value_check(I2, I2, 1.25, 1.0).proven


def test_zhan_scale_covariance():
    rng = np.random.default_rng(0)
    a, b = psd_pair(4, rng)
    base = zhan_singular_value_check(a, b, 0.5, 0.7)
    for c in (0.25, 3.0):
        scaled = zhan_singular_value_check(c * a.data, c * b.data, 0.5, 0.7)
        np.testing.assert_allclose(scaled.lhs, c ** 2 * base.lhs, rtol=1e-12)
        np.testing.assert_allclose(scaled.rhs, c ** 2 * base.rhs, rtol=1e-12)


def test_zhan_symmetry_in_a_b():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a, b = psd_pair(5, rng)
        r, t = float(rng.choice([0.5, 1.0, 1.5])), float(rng.uniform(-1.9, 2))
        x, y = zhan_singular_value_check(a, b, r, t), zhan_singular_value_check(b, a, r, t)
        np.testing.assert_allclose(x.lhs, y.lhs, atol=1e-10)
        np.testing.assert_allclose(x.rhs, y.rhs, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(2, 6),
       r=st.sampled_from([0.5, 1.0, 1.5]), t=st.floats(-1.99, 2.0))
def test_zhan_holds_in_proven_region(seed, n, r, t):
    a, b = psd_pair(n, np.random.default_rng(seed), "lognormal")
    assert zhan_singular_value_check(a, b, r, t).passed


def test_proposition4_equivalent_to_zhan_at_r1():
    rng = np.random.default_rng(2)
    a, b = psd_pair(4, rng)
    p4 = proposition4_check(a, b, -0.5)
    z = zhan_singular_value_check(a, b, 1.0, -0.5)
    np.testing.assert_allclose(2 * p4.lhs, z.lhs, rtol=1e-12)
    np.testing.assert_allclose(2 * p4.rhs, z.rhs, rtol=1e-12)
    assert p4.passed


def test_commuting_case_matches_scalar_formulas():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a, b = rng.uniform(0, 2, 4), rng.uniform(0, 2, 4)
        r, t = 0.5, float(rng.uniform(-1.9, 2))
        A, B = np.diag(a), np.diag(b)
        desc = lambda v: np.sort(np.abs(v))[::-1]
        rec = zhan_singular_value_check(A, B, r, t)
        np.testing.assert_allclose(rec.lhs, (2 + t) * desc(a ** r * b ** (2 - r) + a ** (2 - r) * b ** r), atol=1e-12)
        np.testing.assert_allclose(rec.rhs, 2 * desc(a * a + t * a * b + b * b), atol=1e-12)
        rec = drury_check(A, B)
        np.testing.assert_allclose(rec.lhs, 4 * desc(a * b), atol=1e-12)
        np.testing.assert_allclose(rec.rhs, desc((a + b) ** 2), atol=1e-12)


def test_norm_check_examples():
    rec = zhan_norm_check(np.eye(3), np.eye(3), np.eye(3), 1.0, 0.5)
    np.testing.assert_allclose(rec.margins, 0, atol=1e-12)
    a, b, x = np.array([1.0, 2.0]), np.array([0.5, 1.5]), np.array([1.0, -3.0])
    r, t = 0.5, 1.0
    rec = zhan_norm_check(np.diag(a), np.diag(b), np.diag(x), r, t, k=2)
    lhs = (2 + t) * np.sum(np.abs(a ** r * x * b ** (2 - r) + a ** (2 - r) * x * b ** r))
    rhs = 2 * np.sum(np.abs(a * a * x + t * a * x * b + x * b * b))
    assert rec.lhs[0] == pytest.approx(lhs, rel=1e-13)
    assert rec.rhs[0] == pytest.approx(rhs, rel=1e-13)
    assert rec.k == 2


def test_norm_check_random_all_orders():
    rng = np.random.default_rng(4)
    for _ in range(10):
        a, b = psd_pair(5, rng)
        x = random_complex(5, rng)
        for t in (-1.5, 0.0, 1.0, 2.0):
            for r in (0.5, 1.0, 1.5):
                rec = zhan_norm_check(a, b, x, r, t)
                assert rec.passed and rec.lhs.shape == (5,)


def test_norm_check_hypothesis_range():
    with pytest.raises(InvalidInput):
        zhan_norm_check(I2, I2, I2, 0.25, 0.0)
    assert not zhan_norm_check(I2, I2, I2, 0.25, 0.0, allow_unproven=True).proven
    with pytest.raises(InvalidInput):
        zhan_norm_check(I2, I2, I2, 1.0, 0.0, k=3)


def test_ag_mean_examples():
    a = random_complex(4, np.random.default_rng(5))
    rec = ag_mean_check(a, a)
    np.testing.assert_allclose(rec.margins, 0, atol=1e-12)
    rec = ag_mean_check(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))
    np.testing.assert_allclose(rec.lhs, [0, 0])
    np.testing.assert_allclose(rec.rhs, [1, 1])
    with pytest.raises(InvalidInput):
        ag_mean_check(np.eye(2), np.eye(3))


def test_ag_mean_random():
    rng = np.random.default_rng(6)
    for _ in range(100):
        assert ag_mean_check(random_complex(6, rng), random_complex(6, rng)).passed


def test_bhatia_kittaneh_examples():
    rec = bhatia_kittaneh_check(I2, I2)
    np.testing.assert_allclose(rec.lhs, [4, 4])
    np.testing.assert_allclose(rec.margins, 0, atol=1e-12)
    rec = bhatia_kittaneh_check(I2, np.zeros((2, 2)))
    np.testing.assert_allclose(rec.lhs, [0, 0], atol=1e-15)
    np.testing.assert_allclose(rec.rhs, [1, 1])


def test_drury_examples():
    np.testing.assert_allclose(drury_check(I2, I2).margins, 0, atol=1e-12)
    rec = drury_check(np.diag([4.0, 1.0]), I2)
    np.testing.assert_allclose(rec.lhs, [16, 4])
    np.testing.assert_allclose(rec.rhs, [25, 4])
    assert rec.passed and rec.margins[1] == pytest.approx(0, abs=1e-13)


def test_supporting_checks_random():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(2, 9))
        a, b = psd_pair(n, rng, "lognormal")
        assert bhatia_kittaneh_check(a, b).passed
        assert drury_check(a, b).passed


def test_mean_comparison():
    r1, r2 = mean_comparison_check(I2, I2, 0.3)
    np.testing.assert_allclose(r1.margins, 0, atol=1e-12)
    np.testing.assert_allclose(r2.margins, 0, atol=1e-12)
    r1, _ = mean_comparison_check(np.diag([2.0, 0.5]), np.diag([0.1, 1.0]), -1.0)
    np.testing.assert_allclose(r1.margins, 0, atol=1e-13)
    a, b = psd_pair(5, np.random.default_rng(8))
    assert all(rec.passed for rec in mean_comparison_check(a, b, -1.9))
    with pytest.raises(InvalidInput):
        mean_comparison_check(a, b, 2.5)


def test_corollary2():
    a, b = psd_pair(4, np.random.default_rng(9))
    _, r2 = corollary2_check(a, b, 2.0)
    assert np.max(np.abs(r2.margins)) <= 1e-9
    r1, r2 = corollary2_check(I2, I2, -1.9)
    np.testing.assert_allclose(r1.rhs, [0.1, 0.1])
    np.testing.assert_allclose(r2.margins, 0, atol=1e-12)
    assert all(rec.passed for rec in corollary2_check(a, b, -1.9))
    with pytest.raises(InvalidInput):
        corollary2_check(a, b, -2.0)


def test_monotonicity_equal_matrices_constant():
    a = random_psd(3, "uniform", 10)
    trace = monotonicity_trace(a, a, np.linspace(-1.9, 4, 30))
    expected = np.linalg.eigvalsh(a.data @ a.data)[::-1]
    np.testing.assert_allclose(np.sort(trace.f_values, axis=1)[:, ::-1], np.tile(expected, (30, 1)), atol=1e-12)
    assert trace.passed


def test_monotonicity_b_zero_strictly_decreasing():
    a = random_psd(3, [3.0, 2.0, 1.0], 11)
    grid = np.linspace(-1.9, 4, 30)
    trace = monotonicity_trace(a, np.zeros((3, 3)), grid)
    lam = np.array([9.0, 4.0, 1.0])
    np.testing.assert_allclose(np.sort(trace.f_values, axis=1)[:, ::-1], lam / (2 + grid)[:, None], rtol=1e-12)
    assert np.all(np.diff(trace.f_values, axis=0) < 0) and trace.passed


def test_monotonicity_fixed_example():
    a = np.diag([2.0, 1.0])
    b = np.array([[1.0, 1.0], [1.0, 1.0]])
    grid = np.linspace(-1.9, 4, 60)
    trace = monotonicity_trace(a, b, grid)
    assert trace.passed and not trace.violations
    # direct evaluation of the sorted eigenvalue functions
    for t_lo, t_hi in zip(grid[:-1], grid[1:]):
        f = lambda t: np.linalg.eigvalsh(a @ a + b @ b + t / 2 * (a @ b + b @ a))[::-1] / (2 + t)
        assert np.all(f(t_hi) <= f(t_lo) + 1e-12)


def test_monotonicity_rejects_grid_below_minus_two():
    with pytest.raises(InvalidInput):
        monotonicity_trace(I2, I2, [-2.0, 0.0])


def test_inequality_case_validation():
    with pytest.raises(InvalidInput):
        InequalityCase(I2, np.eye(3))
    with pytest.raises(InvalidInput):
        InequalityCase(I2, I2, t=-2.0)
    with pytest.raises(InvalidInput):
        InequalityCase(I2, -I2)
    c = InequalityCase(I2, I2, 0.5, 10.0)
    assert c.t == 10.0


def test_near_violation_triggers_tight_recheck():
    from specheck.inequalities import _run
    from specheck.linalg import JACOBI_TOL_TIGHT

    calls = []

    def evaluate(jtol):
        calls.append(jtol)
        if jtol == JACOBI_TOL_TIGHT:
            return np.array([1.0]), np.array([1.0])
        return np.array([1.0 + 1e-12]), np.array([1.0])

    rec = _run("probe", evaluate, 1e-9)
    assert calls[-1] == JACOBI_TOL_TIGHT and rec.rechecked
    assert rec.margins[0] == 0.0

    calls.clear()
    rec = _run("probe", lambda jtol: (calls.append(jtol) or np.array([0.5]), np.array([1.0])), 1e-9)
    assert len(calls) == 1 and not rec.rechecked
