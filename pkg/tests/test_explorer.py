import json

import mpmath
import numpy as np
import pytest

from specheck.errors import InvalidInput
from specheck.explorer import (
    CampaignReport,
    CampaignSpec,
    Violation,
    aggregate_report,
    draw_case,
    run_campaign,
    shrink_counterexample,
    trial_seed,
)
from specheck.hiprec import charpoly, hp_evaluate, hp_min_margin, hp_singular_values
from specheck.inequalities import zhan_singular_value_check
from specheck.linalg import eigh


def small_spec(**kw):
    base = dict(dims=[2, 3], r_grid=[0.5, 1.0], t_grid=[-1.0, 2.0], trials=8, seed=3)
    base.update(kw)
    return CampaignSpec(**base)


def test_empty_grid():
    rep = run_campaign(small_spec(t_grid=[]))
    assert rep.cells == [] and rep.total_trials == 0 and rep.violations == []


def test_campaign_deterministic():
    a = run_campaign(small_spec())
    b = run_campaign(small_spec())
    assert a.dumps(include_wall_time=False) == b.dumps(include_wall_time=False)


def test_campaign_threaded_matches_serial():
    a = run_campaign(small_spec(), workers=1)
    b = run_campaign(small_spec(), workers=3)
    assert a.content_hash() == b.content_hash()


def test_campaign_counts_conserved():
    spec = small_spec()
    rep = run_campaign(spec)
    assert len(rep.cells) == 2 * 2 * 2
    assert rep.total_trials + sum(c["failures"] for c in rep.cells) == spec.trials * len(rep.cells)
    assert not rep.violations and all(c["proven"] for c in rep.cells)


def test_campaign_rejects_bad_grids():
    with pytest.raises(InvalidInput, match="exceed -2"):
        run_campaign(small_spec(t_grid=[-2.0]))
    with pytest.raises(InvalidInput):
        run_campaign(small_spec(r_grid=[2.5]))
    with pytest.raises(InvalidInput):
        run_campaign(small_spec(check="nope"))
    with pytest.raises(InvalidInput):
        run_campaign(small_spec(families=["weird"]))


def test_checks_without_parameters_have_one_cell_per_dimension():
    rep = run_campaign(small_spec(check="drury"))
    assert [(c["n"], c["r"], c["t"]) for c in rep.cells] == [(2, None, None), (3, None, None)]


def test_trial_seed_independent_of_order():
    assert trial_seed(5, 2, 7) == trial_seed(5, 2, 7)
    assert len({trial_seed(5, c, k) for c in range(4) for k in range(4)}) == 16


@pytest.mark.parametrize("family", ["generic", "diagonal", "rank_deficient", "near_commuting"])
def test_families_are_psd(family):
    for n in (1, 2, 5):
        a, b, x = draw_case(n, family, 11)
        assert a.spectrum.values[-1] >= 0 and b.spectrum.values[-1] >= 0
        assert x.shape == (n, n)
    if family == "diagonal":
        assert np.count_nonzero(a.data - np.diag(np.diagonal(a.data))) == 0
    if family == "rank_deficient":
        a, b, _ = draw_case(4, family, 12)
        assert a.spectrum.values[-1] == 0.0 and b.spectrum.values[-1] == 0.0


def test_report_json_round_trip_and_csv():
    rep = run_campaign(small_spec())
    back = CampaignReport.from_json(json.loads(rep.dumps()))
    assert back.dumps() == rep.dumps()
    lines = rep.to_csv().splitlines()
    assert lines[0] == "check,n,r,t,trials,min_margin,violations"
    assert len(lines) == 1 + len(rep.cells)


def test_unproven_region_is_labelled():
    rep = run_campaign(small_spec(r_grid=[0.75], t_grid=[1.0], trials=4))
    assert all(not c["proven"] for c in rep.cells)
    assert rep.to_json()["evidence_only"] is True


def test_aggregate_identity_and_disjoint():
    a = run_campaign(small_spec(dims=[2]))
    assert aggregate_report([a]) is a
    b = run_campaign(small_spec(dims=[3]))
    m = aggregate_report([a, b])
    assert len(m.cells) == len(a.cells) + len(b.cells)
    assert m.total_trials == a.total_trials + b.total_trials
    assert not any(c["overlapping"] for c in m.cells)


def test_aggregate_duplicate_doubles_and_flags():
    a = run_campaign(small_spec(dims=[2]))
    m = aggregate_report([a, a])
    assert [c["trials"] for c in m.cells] == [2 * c["trials"] for c in a.cells]
    assert all(c["overlapping"] for c in m.cells)
    assert [c["min_margin"] for c in m.cells] == [c["min_margin"] for c in a.cells]


def test_aggregate_rejects_mixed_checks():
    a = run_campaign(small_spec(dims=[2]))
    b = run_campaign(small_spec(dims=[2], check="drury"))
    with pytest.raises(InvalidInput):
        aggregate_report([a, b])


def _violation(a, b, r, t, margins=(0.0,)):
    return Violation("zhan", a.shape[0], r, t, "diagonal", 1, a, b, None, list(margins), 1e-9)


def test_shrink_noop_on_passing_case():
    v = _violation(np.diag([2.0, 1.0]), np.eye(2), 1.0, 2.0)
    out = shrink_counterexample(v)
    assert out.shrink == "noop" and np.array_equal(out.A, v.A)


def test_shrink_synthetic_predicate():
    v = _violation(np.diag([2.0, 1.0]), np.eye(2), 1.0, 2.0, margins=(2.0, 0.0))

    def predicate(case):
        return zhan_singular_value_check(case.A, case.B, case.r, case.t).min_margin < 0.5

    out = shrink_counterexample(v, predicate)
    assert out.n == 1 and out.shrink == "shrunk"
    assert out.A[0, 0] == pytest.approx(1.0) and out.B[0, 0] == pytest.approx(1.0)
    assert out.min_margin == pytest.approx(0.0, abs=1e-12)
    again = shrink_counterexample(out, predicate)
    assert again.n == out.n and np.array_equal(again.A, out.A) and np.array_equal(again.B, out.B)
    assert (again.r, again.t) == (out.r, out.t)


def test_shrink_real_counterexample_outside_hypothesis():
    # r = 0.25 lies outside 1 <= 2r <= 3; scalar cases already fail there at t = 2.
    rng = np.random.default_rng(0)
    q = np.linalg.qr(rng.standard_normal((3, 3)))[0]
    a = (q * [1.0, 0.7, 0.2]) @ q.T
    b = (q * [1.13, 0.3, 0.9]) @ q.T
    rec = zhan_singular_value_check(a, b, 0.25, 2.0)
    assert not rec.passed
    v = _violation(a.astype(complex), b.astype(complex), 0.25, 2.0, rec.margins)
    out = shrink_counterexample(v)
    assert out.shrink == "shrunk" and out.n == 1 and out.min_margin < -out.tol
    again = shrink_counterexample(out)
    assert np.array_equal(again.A, out.A) and np.array_equal(again.B, out.B)


def test_violation_json_round_trip():
    v = _violation(np.diag([2.0, 1.0]).astype(complex), np.eye(2, dtype=complex), 1.0, 2.0)
    back = Violation.from_json(json.loads(json.dumps(v.to_json())))
    assert np.array_equal(back.A, v.A) and back.r == v.r and back.status == v.status


def test_charpoly_matches_eigenvalues():
    m = np.array([[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]])
    with mpmath.workdps(30):
        coeffs = charpoly(mpmath.matrix(m.tolist()))
        roots = sorted(float(mpmath.re(z)) for z in mpmath.polyroots(coeffs, maxsteps=200, extraprec=100))
    np.testing.assert_allclose(roots, np.sort(eigh(m).values), rtol=1e-13)


def test_hp_singular_values_rank_deficient():
    with mpmath.workdps(50):
        s = hp_singular_values(mpmath.matrix([[1, 2], [2, 4]]))
    assert float(s[0]) == pytest.approx(5.0, rel=1e-15)
    assert abs(float(s[1])) < 1e-20


def test_hp_agrees_with_fast_path():
    rng = np.random.default_rng(1)
    a, b, _ = draw_case(3, "generic", 5)
    rec = zhan_singular_value_check(a, b, 0.5, 1.0)
    (lhs, rhs), = hp_evaluate("zhan", a.data, b.data, 0.5, 1.0)
    np.testing.assert_allclose([float(x) for x in lhs], rec.lhs, rtol=1e-12)
    np.testing.assert_allclose([float(x) for x in rhs], rec.rhs, rtol=1e-12)
    margin, violated = hp_min_margin("zhan", a.data, b.data, 0.5, 1.0)
    assert not violated and margin == pytest.approx(rec.min_margin, abs=1e-12)
    for check in ("zhan_norm", "prop4", "drury", "bhatia_kittaneh", "ag_mean", "mean_comparison", "corollary2"):
        _, violated = hp_min_margin(check, a.data, b.data, 1.0, 0.5)
        assert not violated


def test_hp_confirms_scalar_counterexample():
    _, violated = hp_min_margin("zhan", np.array([[1.0]]), np.array([[1.1]]), 0.25, 2.0)
    assert violated
