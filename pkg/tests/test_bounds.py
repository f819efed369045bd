import csv

import numpy as np
import pytest

from lctrunc import (EN, DomainError, ErrorCurve, ExponentialCertificate, LevelLayout, RetrialParams,
                     RetrialTuning, TruncatedStationary, build_hat_generator, error_decay_E,
                     error_decay_E_plus, error_decay_E_sharp, exp_curve, ldqbd_bound, mm1_certificate,
                     mm1_generator, reduction_bounds, resolvent_summary, retrial_bound_1,
                     retrial_bound_sharp, retrial_certificate, retrial_generator, retrial_sharp_certificate,
                     solve_stationary, verify_drift, write_curves_csv)


@pytest.fixture(scope="module")
def retrial_setup():
    p = RetrialParams.from_rho(0.5)
    t = RetrialTuning.default(p.rho)
    Q = retrial_generator(p)
    ecert = retrial_certificate(p, t)
    sharp = retrial_sharp_certificate(p, t)
    phi = resolvent_summary(Q, ecert.K, ecert.K + 100, 1 - p.rho)
    return p, t, Q, ecert, sharp, phi


def test_mm1_E_band_collapse():
    lam, mu, alpha = 1.0, 2.0, 1.2
    Q = mm1_generator(lam, mu)
    cert = mm1_certificate(lam, mu, alpha)
    phi = 0.37
    npi = solve_stationary(Q, 5)
    hand = 2 * npi.level(5)[0] * lam * (cert.v(6)[0] + cert.v(5)[0]
                                        + 2 * (cert.b / cert.c + 2 * cert.b / phi))
    assert error_decay_E(Q, cert.as_drift(), cert.b / cert.c, phi, npi) == pytest.approx(hand, rel=1e-14)
    plus = 4 * npi.level(5)[0] * lam * (cert.v(6)[0] + cert.b / cert.c + 2 * cert.b / phi)
    assert error_decay_E_plus(Q, cert.as_drift(), cert.b / cert.c, phi, npi) == pytest.approx(plus, rel=1e-14)


def test_E_dominated_by_E_plus(retrial_setup):
    p, t, Q, ecert, _, phi = retrial_setup
    d = ecert.as_drift()
    for n in range(1, 51):
        npi = solve_stationary(Q, n, p)
        assert error_decay_E(Q, d, ecert.pi_v_bound, phi, npi) <= error_decay_E_plus(Q, d, ecert.pi_v_bound, phi, npi)


def test_EN_sixteen_p():
    Q = mm1_generator(0.3, 1.0)
    one = lambda k: np.ones(1)  # noqa: E731
    cert = ExponentialCertificate(1.0, 1.0, 0, one)
    npi = solve_stationary(Q, 4)
    p_ = npi.level(4)[0] * 0.3
    assert EN(Q, cert, 1.0, npi) == pytest.approx(16 * p_, rel=1e-14)


def test_EN_grows_when_phi_shrinks(retrial_setup):
    p, _, Q, ecert, _, phi = retrial_setup
    big = resolvent_summary(Q, ecert.K, 4 * phi.N, phi.beta)
    assert big.phi_bar >= phi.phi_bar
    npi = solve_stationary(Q, 40, p)
    assert EN(Q, ecert, phi, npi) >= EN(Q, ecert, big, npi)


def test_ldqbd_EN_retrial1_coincide(retrial_setup):
    p, t, Q, ecert, _, phi = retrial_setup
    for n in (5, 20, 60):
        npi = solve_stationary(Q, n, p)
        a = ldqbd_bound(Q, ecert, phi, npi)
        assert EN(Q, ecert, phi, npi) == pytest.approx(a, rel=1e-12)
        assert retrial_bound_1(p, t, ecert, phi, npi) == pytest.approx(a, rel=1e-12)


def test_ldqbd_level_mismatch(retrial_setup):
    p, _, Q, ecert, _, phi = retrial_setup
    npi = solve_stationary(Q, 10, p)
    with pytest.raises(DomainError):
        ldqbd_bound(Q, ecert, phi, npi, n=11)


def test_retrial_bound_zero_top_phase(retrial_setup):
    p, t, _, ecert, _, phi = retrial_setup
    lay = LevelLayout(p.s + 1, p.s + 1)
    pi = np.zeros(lay.order(3))
    pi[0] = 1.0
    assert retrial_bound_1(p, t, ecert, phi, TruncatedStationary(3, lay, pi)) == 0.0


def test_retrial_bound_1_decreasing(retrial_setup):
    p, t, Q, ecert, _, phi = retrial_setup
    vals = [retrial_bound_1(p, t, ecert, phi, solve_stationary(Q, n, p)) for n in range(10, 201, 5)]
    assert np.all(np.diff(vals) < 0)


def test_sharp_dominates_and_decays(retrial_setup):
    p, t, Q, ecert, sharp, phi = retrial_setup
    for n in range(1, 201, 7):
        npi = solve_stationary(Q, n, p)
        assert retrial_bound_1(p, t, ecert, phi, npi) <= retrial_bound_sharp(p, t, ecert, sharp, phi, n)
        assert npi.level(n)[p.s] * t.alpha ** n < sharp.b / sharp.c * (t.alpha / t.alpha_sharp) ** n
    # with a larger alpha the alpha^-n correction dies out before underflow
    t2 = RetrialTuning.default(p.rho, alpha=1.5)
    e2, s2 = retrial_certificate(p, t2), retrial_sharp_certificate(p, t2)
    r = retrial_bound_sharp(p, t2, e2, s2, phi, 201) / retrial_bound_sharp(p, t2, e2, s2, phi, 200)
    assert r == pytest.approx(t2.alpha / t2.alpha_sharp, rel=1e-9)


def test_E_sharp(retrial_setup):
    p, t, _, ecert, sharp, phi = retrial_setup
    d = ecert.as_drift()
    e10 = error_decay_E_sharp(d, sharp, ecert.pi_v_bound, phi, 10)
    head = 4 * sharp.r0 * sharp.r1 * sharp.b / sharp.T(10)
    tail = (ecert.b / ecert.c + 2 * ecert.b / (phi.beta * phi.phi_bar)) / (sharp.a_min * sharp.V(11))
    assert e10 == pytest.approx(head * (1 + tail), rel=1e-14)
    from dataclasses import replace
    with pytest.raises(DomainError):
        error_decay_E_sharp(d, replace(sharp, T=lambda x: 1.0), ecert.pi_v_bound, phi, 10)


def test_hat_generator_uniform_scaling():
    cert = mm1_certificate(1.0, 2.0, 1.3)
    Q = mm1_generator(1.0, 2.0)
    Qh, b_hat, hat = build_hat_generator(Q, cert.as_drift(), C_fv=cert.c)
    for k in (0, 1, 7):
        for l in Q.column_range(k):
            np.testing.assert_allclose(Qh.block(k, l), Q.block(k, l) / cert.c, rtol=1e-15)
    assert b_hat == pytest.approx(cert.b / cert.c)
    assert verify_drift(Qh, hat, 200).passed


def test_hat_generator_drift_and_pi_v(retrial_setup):
    p, _, Q, ecert, _, _ = retrial_setup
    d = ecert.as_drift()
    Qh, b_hat, hat = build_hat_generator(Q, d)
    assert verify_drift(Qh, hat, 400).passed
    ref = solve_stationary(Qh, 400)
    assert ref.expect(ecert.v) <= b_hat
    with pytest.raises(DomainError):
        build_hat_generator(Q, d, C_fv=0.5 * ecert.c)


def test_reduction_bounds():
    assert reduction_bounds(0.0, 2.0, 3.0, 4.0) == (0.0, 0.0)
    tv, rel = reduction_bounds(0.1, 5.0, 1e6, 1e6)
    assert tv == pytest.approx(0.2)
    assert rel == pytest.approx(0.1 * (1 + 1.1 / 0.9), rel=1e-14)
    assert rel == pytest.approx(0.2222222222, rel=1e-9)
    tiny = 1e-9
    assert reduction_bounds(tiny, 5.0, 10.0, 10.0)[1] / tiny == pytest.approx(2.0, rel=1e-8)
    assert reduction_bounds(0.5, 1.2, 10.0, 10.0, monotone_v=True)[1] == pytest.approx(0.5 * 2.2)
    # E_hat >= 1 falls back to the (b_hat C)^-1 branch
    assert reduction_bounds(2.0, 5.0, 4.0, 0.5)[1] == pytest.approx(2.0 * (1 + 3.0 / 0.5))
    with pytest.raises(DomainError):
        reduction_bounds(-0.1, 1, 1, 1)


def test_curves_and_csv(tmp_path, retrial_setup):
    p, t, Q, ecert, sharp, phi = retrial_setup
    r1 = exp_curve("retrial_1", Q, ecert, phi, [10, 20, 30], params=p, tuning=t)
    rs = exp_curve("retrial_sharp", Q, ecert, phi, [10, 20, 30], sharp=sharp, params=p, tuning=t)
    en = exp_curve("EN", Q, ecert, phi, [10, 20, 30], params=p)
    assert r1.dominated_by(rs) and en.dominated_by(r1, rtol=1e-12)
    assert list(r1.ns) == [10, 20, 30] and np.all(r1.values > 0)
    path = tmp_path / "c.csv"
    write_curves_csv([r1, rs], path)
    rows = list(csv.DictReader(open(path)))
    assert list(rows[0]) == ["n", "kind", "value", "beta", "K", "N"]
    assert len(rows) == 6 and rows[3]["kind"] == "retrial_sharp" and rows[0]["K"] == str(ecert.K)
    for bad in ([], [0, 1]):
        with pytest.raises(DomainError):
            exp_curve("EN", Q, ecert, phi, bad)
    with pytest.raises(DomainError):
        exp_curve("reduced_tv", Q, ecert, phi, [3])
    with pytest.raises(DomainError):
        ErrorCurve("bogus", [])


def test_log_sharp_matches_and_survives_underflow(retrial_setup):
    p, t, Q, ecert, sharp, phi = retrial_setup
    from lctrunc import log10_bound_sharp
    for n in (1, 50, 300):
        direct = retrial_bound_sharp(p, t, ecert, sharp, phi, n)
        assert log10_bound_sharp(p, t, ecert, sharp, phi, n) == pytest.approx(np.log10(direct), abs=1e-12)
    assert retrial_bound_sharp(p, t, ecert, sharp, phi, 5000) == 0.0
    assert np.isfinite(log10_bound_sharp(p, t, ecert, sharp, phi, 5000))
    t2 = RetrialTuning.default(p.rho, alpha=1.9)
    e2 = retrial_certificate(p, t2)
    lay = LevelLayout(p.s + 1, p.s + 1)
    tiny = np.zeros(lay.order(2000))
    tiny[0] = 1.0
    assert retrial_bound_1(p, t2, e2, phi, TruncatedStationary(2000, lay, tiny)) == 0.0
