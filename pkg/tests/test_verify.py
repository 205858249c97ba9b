import json

import numpy as np
import pytest

from erwg.errors import MemoryNotOne, NotStronglyConnected, RegimeMismatch
from erwg.graph import make_config, memory_matrix, two_elephants
from erwg.limits import sigma1
from erwg.verify import (DEFAULT_TOLS, CheckRecord, VerificationReport, clt_covariance_check,
                         closed_form_mean_check, critical_clt_check, ks_projection_pvalues,
                         lil_envelope_diagnostic, mechanism_equivalence_check, moment_slope_check,
                         oracle_check, rel_frobenius, run_suite, slln_check,
                         superdiffusive_limit_check, synchronization_check,
                         eta_one_limit_check)

P6 = two_elephants(0.6)


def test_oracle_check_small_grid():
    rec = oracle_check([two_elephants(0.6, 1.0, 0.0), make_config(1, [(1, 1)], 0.9, 0.3)], n_max=5)
    assert rec.passed and rec.statistic < 1e-12


def test_closed_form_coefficients():
    assert closed_form_mean_check(n_max=200).passed
    printed = closed_form_mean_check(n_max=200, coefficient="printed")
    assert not printed.passed and printed.statistic > 0.1


def test_clt_check_passes_and_catches_wrong_target():
    S = sigma1(memory_matrix(P6))
    ok = clt_covariance_check(P6, "sqrt(n)", S, 1000, 4000, 0.1)
    assert ok.passed, ok.details
    bad = clt_covariance_check(P6, "sqrt(n)", 1.3 * S, 1000, 4000, 0.1)
    assert not bad.passed
    with pytest.raises(RegimeMismatch):
        clt_covariance_check(P6, "sqrt(n log n)", S, 1000, 100)


def test_ks_detects_non_normal():
    rng = np.random.default_rng(0)
    S = rng.choice([-30, 30], size=(2000, 2))
    assert min(ks_projection_pvalues(S, np.eye(2), 1)) < 1e-6


def test_critical_check_small():
    rec = critical_clt_check(two_elephants(0.75), 2000, 4000)
    assert rec.details["gap_log_slope"] < 0
    assert rec.statistic < 0.1
    with pytest.raises(RegimeMismatch):
        critical_clt_check(P6, 100, 10)


def test_slln_both_branches():
    assert slln_check(P6, 10_000, 500).passed
    sup = slln_check(two_elephants(0.9, 1.0, 1.0), 20_000, 400)
    assert sup.name == "slln_superdiffusive" and sup.passed, sup.details


def test_superdiffusive_small_run_is_coherent():
    rec = superdiffusive_limit_check(two_elephants(0.9, 1.0, 1.0), 20_000, 3000)
    d = rec.details
    assert d["limit_mean_ok"] and d["limit_var_ok"] and d["cauchy_ok"]
    # the finite-horizon prediction tracks the empirical fluctuation covariance
    assert d["error_vs_prediction"] < 0.15


def test_eta_one_limit_small():
    rec = eta_one_limit_check(R=4000, horizon=1000)
    assert rec.details["all_inside"] and rec.details["variance"] > 0.01
    assert rec.passed, rec.details


def test_synchronization_small():
    rec = synchronization_check(two_elephants(1.0, 0.3, 0.6), 2000, 1000)
    assert rec.passed, rec.details
    cyc = make_config(3, [(1, 2), (2, 3), (3, 1)], 1.0, 0.5)
    rec3 = synchronization_check(cyc, 2000, 500)
    assert rec3.details["consensus_replicas"] > 0
    with pytest.raises(NotStronglyConnected):
        synchronization_check(make_config(2, [(1, 1), (1, 2)], 1.0, .5), 100, 10)
    with pytest.raises(MemoryNotOne):
        synchronization_check(P6, 100, 10)


def test_lil_hard_bound_and_negative_control():
    S = sigma1(memory_matrix(P6))
    rec = lil_envelope_diagnostic(P6, S, 1_000_000, hard_from=10_000)
    assert rec.passed
    wrong = lil_envelope_diagnostic(P6, S / 10, 1_000_000, hard_from=10_000)
    assert not wrong.passed


def test_moment_slopes():
    for m in (1, 2, 4):
        rec = moment_slope_check(P6, m, 0, horizon=5000, R=2000)
        assert rec.passed, rec.details
    with pytest.raises(ValueError):
        moment_slope_check(P6, 3, 0)


def test_mechanisms_agree_small():
    rec = mechanism_equivalence_check(two_elephants(0.75, 1.0, 0.0), n=60, R=20_000)
    assert rec.passed and rec.details["mean_ok"] and rec.details["cov_ok"]


def test_mechanism_check_has_power():
    # a conditional sampler for a different p must be told apart
    import erwg.verify as V

    lit = V.simulate_ensemble(two_elephants(0.75, 1, 0), 20_000, 60, 1, checkpoints=[60],
                              mechanism="literal").at(60)
    con = V.simulate_ensemble(two_elephants(0.85, 1, 0), 20_000, 60, 2, checkpoints=[60]).at(60)
    both = np.concatenate([lit, con])
    import scipy.stats
    cells, inv = np.unique(both, axis=0, return_inverse=True)
    a = np.bincount(inv.ravel()[:20_000], minlength=len(cells))
    b = np.bincount(inv.ravel()[20_000:], minlength=len(cells))
    keep = (a + b) >= 10
    assert scipy.stats.chi2_contingency(np.vstack([a[keep], b[keep]])).pvalue < 1e-6


def test_report_serialization_and_determinism():
    a = run_suite("oracle")
    b = run_suite("oracle", workers=2)
    assert a.to_json(runtime=False) == b.to_json(runtime=False)
    d = json.loads(a.to_json())
    assert d["passed"] and "runtime_seconds" in d
    assert "overall: PASS" in a.table()


def test_suite_is_worker_independent():
    kw = dict(replicas=3000, horizon=1000)
    a = run_suite("critical-clt", **kw)
    b = run_suite("critical-clt", workers=2, **kw)
    assert a.to_json(runtime=False) == b.to_json(runtime=False)


def test_report_failure_logic():
    rep = VerificationReport("x", None, 0, [
        CheckRecord("a", "c", "s", 1.0, 2.0, True),
        CheckRecord("b", "c", "s", 3.0, 2.0, False, hard=False)])
    assert rep.passed
    rep.records.append(CheckRecord("c", "c", "s", 3.0, 2.0, False))
    assert not rep.passed


def test_unknown_suite_and_tolerance():
    with pytest.raises(ValueError):
        run_suite("nope")
    with pytest.raises(KeyError):
        run_suite("oracle", tols={"nope": 1})
    assert rel_frobenius(np.eye(2), np.eye(2)) == 0.0
    assert DEFAULT_TOLS["clt_rel"] == 0.10


def test_regime_mismatch_is_reported_not_raised():
    rep = run_suite("critical-clt", P6, replicas=100, horizon=100)
    assert not rep.passed
    assert "RegimeMismatch" in rep.records[0].details["error"]
