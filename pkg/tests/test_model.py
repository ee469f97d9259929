import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flashsim.errors import DomainError, NotSemiSymmetricError
from flashsim.model import (AgentSpec, MarketSpec, SemiSymmetricParams, make_market, phi,
                            phi_dot, posterior_drift, posterior_drift_mean, stable_coth_tanh,
                            tau)


def test_tau_values():
    assert tau(1.0, 1.0, 1.0, 1.0) == 0.0
    assert tau(0.0, 1.0, 1.0, 1.0) == 1.0
    assert tau(0.0, 1.0, 0.2, 1.0) == pytest.approx(2.2360679775, abs=1e-9)


@pytest.mark.parametrize("args", [(-0.1, 1, 1, 1), (1.1, 1, 1, 1), (0.5, 0, 1, 1),
                                  (0.5, 1, -1, 1)])
def test_tau_domain(args):
    with pytest.raises(DomainError):
        tau(*args)


def test_tau_decreasing():
    t = np.linspace(0, 2, 50)
    assert np.all(np.diff(tau(t, 3.0, 0.5, 2.0)) < 0)


def test_phi_example2(ex2):
    agent = ex2.agents[0]
    v = phi(0.0, agent, 1.0)
    assert (2 * 0.5 - 0.2) * v == pytest.approx(4.3302, abs=5e-4)
    assert v == pytest.approx(5.4128, abs=5e-4)
    assert phi(1.0, agent, 1.0) == 0.0
    assert phi(0.1, agent, 1.0) > phi(0.2, agent, 1.0)


def test_phi_rejects_certain(ex1):
    with pytest.raises(DomainError):
        phi(0.0, ex1.agents[2], 1.0)


def test_phi_dot_matches_finite_difference(ex3):
    agent = ex3.agents[0]
    t = np.linspace(0.01, 0.99, 25)
    h = 1e-6
    fd = (phi(t + h, agent, 1.0) - phi(t - h, agent, 1.0)) / (2 * h)
    np.testing.assert_allclose(phi_dot(t, agent, 1.0), fd, rtol=1e-6)


def test_stable_coth_tanh_reference():
    coth, th = stable_coth_tanh(0.0)
    assert coth == math.inf and th == 0.0
    coth, th = stable_coth_tanh(1.0)
    assert coth == pytest.approx(1.3130352855, abs=1e-9)
    assert th == pytest.approx(0.4621171573, abs=1e-9)
    coth, _ = stable_coth_tanh(1e-9)
    assert coth == pytest.approx(1e9, rel=1e-6)


@given(st.floats(1e-12, 50.0))
def test_coth_continuous_across_series_switch(x):
    coth, th = stable_coth_tanh(x)
    assert coth * math.tanh(x) == pytest.approx(1.0, rel=1e-9)
    assert 0 <= th <= 1


def test_posterior_drift_examples():
    assert posterior_drift_mean(3.0, 2.0, 0.0, 0.0) == 3.0
    assert posterior_drift_mean(0.0, 1.0, 1.0, 2.0) == 1.0
    pd = posterior_drift(1.5, 0.7, 0.0, 0.0)
    assert pd.mean == 1.5 and pd.t == 0.0


@given(mu=st.floats(-50, 50), t=st.floats(0, 10), ds=st.floats(-100, 100))
def test_certain_agents_never_update(mu, t, ds):
    assert posterior_drift_mean(mu, 0.0, t, ds) == mu


@given(mu=st.floats(-50, 50), nu2=st.floats(1e-3, 50), t=st.floats(0, 10),
       ds1=st.floats(-100, 100), ds2=st.floats(-100, 100))
def test_posterior_mean_affine_in_observation(mu, nu2, t, ds1, ds2):
    m1 = posterior_drift_mean(mu, nu2, t, ds1)
    m2 = posterior_drift_mean(mu, nu2, t, ds2)
    slope = nu2 / (1 + nu2 * t)
    assert m1 - m2 == pytest.approx(slope * (ds1 - ds2), rel=1e-9, abs=1e-9)


@given(mu=st.floats(-5, 5), nu2=st.floats(0.1, 10), beta=st.floats(-5, 5))
def test_posterior_learns_true_drift(mu, nu2, beta):
    t = 1e9
    assert posterior_drift_mean(mu, nu2, t, beta * t) == pytest.approx(beta, abs=1e-6)


def _agent(**kw):
    base = dict(index=1, x0=1.0, mu=0.0, nu2=1.0, kappa=1.0, eta_tem_est=1.0,
                eta_tem_true=1.0, eta_per_true=1.0, eta_per_est=1.0, s0_belief=100.0)
    base.update(kw)
    return AgentSpec(**base)


@pytest.mark.parametrize("bad", [dict(kappa=0.0), dict(nu2=-1.0), dict(eta_tem_est=0.0),
                                 dict(eta_per_true=-1.0), dict(eta_per_est=0.0),
                                 dict(s0_belief=None)])
def test_agent_validation(bad):
    with pytest.raises(DomainError):
        _agent(**bad)


def test_agent_kind():
    assert _agent().uncertain
    assert not _agent(nu2=0.0, eta_per_est=None, s0_belief=None).uncertain


def test_market_validation():
    u, c = _agent(), _agent(index=2, nu2=0.0)
    MarketSpec((u, c), 1.0, 100.0, 0.0)
    with pytest.raises(DomainError):
        MarketSpec((c, u), 1.0, 100.0, 0.0)
    with pytest.raises(DomainError):
        MarketSpec((c,), 1.0, 100.0, 0.0)
    with pytest.raises(DomainError):
        MarketSpec((u,), 0.0, 100.0, 0.0)


def test_market_counts(ex1):
    assert (ex1.n_total, ex1.n_uncertain) == (3, 2)
    assert [a.index for a in ex1.agents] == [1, 2, 3]


def test_semisym_extraction(ex2):
    p = SemiSymmetricParams.from_market(ex2)
    assert p.k_uncertain == 2 and p.eta_tem_true == 0.5 and p.eta_per_est == 0.025
    assert p.tem_gap == pytest.approx(0.8)


def test_semisym_extraction_requires_exact_match():
    shared = dict(nu2=1.0, kappa=1.0, eta_tem_est=1.0, eta_tem_true=1.0, eta_per_true=1.0,
                  eta_per_est=1.0, s0_belief=100.0)
    a = dict(x0=1.0, mu=0.0, **shared)
    b = dict(a, kappa=1.0 + 1e-15)
    with pytest.raises(NotSemiSymmetricError):
        SemiSymmetricParams.from_market(make_market([a, b], 1.0, 100.0, 0.0))
