import math

import numpy as np
import pytest
import scipy.stats

from conftest import (make_rng, random_dataset, random_params, summary_for,
                      targets_and_hyper)
from sckpd.dynamic import (SDLayout, SDParams, SeasonSchedule, StochasticMatrix,
                           omega_trajectory, propagate_omega,
                           sd_log_posterior, sd_log_posterior_grad,
                           stochastic_from_gammas)
from sckpd.model import (SCKPDParams, StateLayout, log_likelihood,
                         log_posterior, log_posterior_grad)


def _random_transition(K, rng, alpha=0.5):
    return stochastic_from_gammas(rng.gamma(alpha, 1.0, size=(K, K)) + 1e-12)


def _schedule(rng, d1=3, d2=2, n_seasons=2, n_cycles=2, n=25):
    blocks = tuple(summary_for(random_dataset(d1, d2, n, rng), d1, d2)
                   for _ in range(n_seasons * n_cycles))
    return SeasonSchedule(n_seasons=n_seasons, n_cycles=n_cycles, blocks=blocks)


# ----- propagation ------------------------------------------------------------

def test_propagate_identity():
    omega = np.array([0.2, 0.5, 0.3])
    for steps in (0, 1, 7):
        assert np.allclose(propagate_omega(np.eye(3), omega, steps), omega)


def test_propagate_averaging_matrix():
    K = 4
    A = np.full((K, K), 1.0 / K)
    omega = np.array([0.7, 0.1, 0.1, 0.1])
    out = propagate_omega(A, omega, 1)
    assert np.allclose(out, np.full(K, 0.25), atol=1e-12)


def test_propagate_matches_matvec_oracle_and_stays_simplex():
    rng = make_rng(0)
    A = _random_transition(4, rng).matrix
    omega = rng.dirichlet(np.ones(4))
    out = propagate_omega(A, omega, 3)
    oracle = omega.copy()
    for _ in range(3):
        oracle = A @ oracle
    assert np.allclose(out, oracle, atol=1e-12)
    assert abs(out.sum() - 1.0) < 1e-12


def test_propagate_rejects_bad_columns():
    A = np.array([[0.5, 0.5], [0.4, 0.5]])
    with pytest.raises(ValueError, match="column"):
        propagate_omega(A, np.array([0.5, 0.5]), 1)


def test_simplex_conservation_long_runs():
    rng = make_rng(1)
    for _ in range(5):
        A = _random_transition(5, rng).matrix
        omega = rng.dirichlet(np.ones(5))
        out = propagate_omega(A, omega, 50)
        assert abs(out.sum() - 1.0) < 1e-10
        assert np.all(out >= -1e-15)


# ----- stochastic matrix construction ------------------------------------------

def test_gammas_constant_gives_uniform_columns():
    sm = stochastic_from_gammas(np.full((3, 3), 4.2))
    assert np.allclose(sm.matrix, np.full((3, 3), 1.0 / 3.0))


def test_gammas_dominant_entry_near_deterministic():
    G = np.full((3, 3), 1e-6)
    np.fill_diagonal(G, 1e6)
    sm = stochastic_from_gammas(G)
    assert np.allclose(np.diag(sm.matrix), 1.0, atol=1e-9)


def test_gammas_monte_carlo_column_means():
    rng = make_rng(2)
    K, alpha, n = 3, 0.8, 20_000
    cols = np.empty((n, K))
    for i in range(n):
        sm = stochastic_from_gammas(rng.gamma(alpha, 1.0, size=(K, K)))
        cols[i] = sm.matrix[:, 0]
    se = cols.std(axis=0, ddof=1) / math.sqrt(n)
    assert np.all(np.abs(cols.mean(axis=0) - 1.0 / K) < 3 * se)


def test_gammas_rejects_nonpositive():
    with pytest.raises(ValueError):
        stochastic_from_gammas(np.array([[1.0, 0.0], [1.0, 1.0]]))


def test_stochastic_matrix_validates_columns():
    with pytest.raises(ValueError):
        StochasticMatrix(matrix=np.array([[0.9, 0.5], [0.0, 0.5]]))


# ----- seasonal posterior -------------------------------------------------------

def test_single_season_reduces_to_static():
    rng = make_rng(3)
    d1, d2, K = 3, 2, 2
    block = summary_for(random_dataset(d1, d2, 30, rng), d1, d2)
    sched = SeasonSchedule(n_seasons=1, n_cycles=1, blocks=(block,))
    targets, hyper = targets_and_hyper(d1, d2, rng)
    sd_layout = SDLayout(d1, d2, K, 1)
    st_layout = StateLayout(d1, d2, K)
    assert sd_layout.size == st_layout.size
    u = rng.normal(0, 0.4, size=st_layout.size)
    v_sd, g_sd = sd_log_posterior_grad(u, sd_layout, sched, hyper, targets)
    v_st, g_st = log_posterior_grad(u, st_layout, block, hyper, targets)
    assert np.isclose(v_sd, v_st, rtol=1e-12)
    assert np.allclose(g_sd, g_st, rtol=1e-10, atol=1e-12)


def test_identity_transition_keeps_weights_equal():
    rng = make_rng(4)
    K = 3
    omega1 = rng.dirichlet(np.ones(K))
    traj = omega_trajectory(omega1, [], (None, None, None), 4)
    assert np.allclose(traj, omega1[None, :].repeat(4, axis=0))


def test_two_season_value_matches_per_season_oracle():
    rng = make_rng(5)
    d1, d2, K = 3, 2, 2
    sched = _schedule(rng, d1, d2, n_seasons=2, n_cycles=1)
    targets, hyper = targets_and_hyper(d1, d2, rng)
    alpha = 0.9
    layout = SDLayout(d1, d2, K, 2, transition_alpha=alpha)
    u = rng.normal(0, 0.4, size=layout.size)
    got = sd_log_posterior(u, layout, sched, hyper, targets)

    params, log_jac = layout.decode(u)
    A = params.matrices[0].matrix
    omegas = omega_trajectory(params.omega1, [A], (0,), 2)
    expected = log_jac
    t1, t2 = np.tril_indices(d1, -1), np.tril_indices(d2, -1)
    for t in range(2):
        sp = params.season_params(t, omegas[t])
        expected += log_likelihood(sp, sched.blocks[t])
        for i in range(K):
            sd = math.sqrt(omegas[t][i] * hyper.lower_variance)
            expected += scipy.stats.norm.logpdf(params.lowers1[t][i][t1], scale=sd).sum()
            expected += scipy.stats.norm.logpdf(params.lowers2[t][i][t2], scale=sd).sum()
    expected += scipy.stats.gamma.logpdf(params.d1_diag, hyper.shape1,
                                         scale=1 / hyper.rate1).sum()
    expected += scipy.stats.gamma.logpdf(params.d2_diag, hyper.shape2,
                                         scale=1 / hyper.rate2).sum()
    expected += scipy.stats.dirichlet.logpdf(params.omega1, np.full(K, params.theta))
    expected += scipy.stats.gamma.logpdf(params.gammas[0], alpha, scale=1.0).sum()
    assert np.isclose(got, expected, rtol=1e-10)


def test_sd_gradient_matches_fd():
    rng = make_rng(6)
    d1, d2, K = 3, 2, 2
    sched = _schedule(rng, d1, d2, n_seasons=2, n_cycles=2)
    targets, hyper = targets_and_hyper(d1, d2, rng)
    layout = SDLayout(d1, d2, K, 4, transition_alpha=0.7)
    for _ in range(2):
        u = rng.normal(0, 0.4, size=layout.size)
        _, g = sd_log_posterior_grad(u, layout, sched, hyper, targets)
        step = 1e-5
        for j in range(layout.size):
            up, dn = u.copy(), u.copy()
            up[j] += step
            dn[j] -= step
            fd = (sd_log_posterior(up, layout, sched, hyper, targets)
                  - sd_log_posterior(dn, layout, sched, hyper, targets)) / (2 * step)
            assert abs(g[j] - fd) <= 1e-7 + 1e-5 * abs(fd)


def test_sd_layout_pack_round_trip():
    rng = make_rng(7)
    d1, d2, K, T = 3, 2, 2, 3
    layout = SDLayout(d1, d2, K, T)
    u = rng.normal(0, 0.5, size=layout.size)
    params = layout.unpack(u)
    back = layout.pack(params)
    assert np.allclose(back, u, atol=1e-12)


def test_mixed_assignment_with_identity_steps():
    rng = make_rng(8)
    d1, d2, K = 3, 2, 2
    sched = _schedule(rng, d1, d2, n_seasons=3, n_cycles=1)
    targets, hyper = targets_and_hyper(d1, d2, rng)
    layout = SDLayout(d1, d2, K, 3, n_matrices=1, assignment=(None, 0))
    u = rng.normal(0, 0.4, size=layout.size)
    v, g = sd_log_posterior_grad(u, layout, sched, hyper, targets)
    assert np.isfinite(v)
    params = layout.unpack(u)
    traj = omega_trajectory(params.omega1, [m.matrix for m in params.matrices],
                            layout.assignment, 3)
    assert np.allclose(traj[1], traj[0])
    assert not np.allclose(traj[2], traj[1])
    step = 1e-5
    for j in range(0, layout.size, 7):
        up, dn = u.copy(), u.copy()
        up[j] += step
        dn[j] -= step
        fd = (sd_log_posterior(up, layout, sched, hyper, targets)
              - sd_log_posterior(dn, layout, sched, hyper, targets)) / (2 * step)
        assert abs(g[j] - fd) <= 1e-7 + 1e-5 * abs(fd)


# ----- prior centering across seasons -------------------------------------------

def test_seasonal_prior_magnitude_invariance():
    # prior draws of the precision at every season: the mean log-det of the
    # factor stays on the log-det target, and the mean trace stays on the
    # total-energy target up to the weighted quadratic term's gap
    rng = make_rng(9)
    d1, d2, K, T = 4, 5, 3, 3
    targets, hyper = targets_and_hyper(d1, d2, rng)
    beta = hyper.lower_variance
    m1, m2 = d1 * (d1 - 1) // 2, d2 * (d2 - 1) // 2
    n = 200_000
    A = _random_transition(K, rng, alpha=0.6).matrix
    total_target = targets.diag_energy + targets.lower_energy
    # concentrations below ~0.05 underflow the gamma draws in double precision
    theta = np.maximum(rng.uniform(size=n), 0.05)
    g = rng.gamma(np.repeat(theta[:, None], K, axis=1))
    omega0 = g / g.sum(axis=1, keepdims=True)       # Dirichlet(theta 1_K) rows
    for t in range(T):
        omega = omega0 @ np.linalg.matrix_power(A, t).T
        D1 = rng.gamma(hyper.shape1, 1.0 / hyper.rate1, size=(n, d1))
        D2 = rng.gamma(hyper.shape2, 1.0 / hyper.rate2, size=(n, d2))
        sd = np.sqrt(omega * beta)                  # (n, K)
        a = rng.normal(size=(n, K, m1)) * sd[:, :, None]
        b = rng.normal(size=(n, K, m2)) * sd[:, :, None]
        e1 = (D1 ** 2).sum(axis=1)
        e2 = (D2 ** 2).sum(axis=1)
        s1 = (a.sum(axis=1) ** 2).sum(axis=1)
        s2 = (b.sum(axis=1) ** 2).sum(axis=1)
        cross = ((a ** 2).sum(axis=2) * (b ** 2).sum(axis=2)).sum(axis=1)
        traces = e1 * e2 + s1 * e2 + e1 * s2 + cross
        logdets = d2 * np.log(D1).sum(axis=1) + d1 * np.log(D2).sum(axis=1)
        cond_exp = e1 * e2 + beta * (m1 * e2 + m2 * e1) \
            + m1 * m2 * beta ** 2 * (omega ** 2).sum(axis=1)
        se_log = logdets.std(ddof=1) / math.sqrt(n)
        assert abs(logdets.mean() - targets.chol_log_det) < 3 * se_log
        resid = traces - cond_exp
        se_resid = resid.std(ddof=1) / math.sqrt(n)
        assert abs(resid.mean()) < 3 * se_resid
        se_tr = traces.std(ddof=1) / math.sqrt(n)
        bias_bound = m1 * m2 * beta ** 2
        assert abs(traces.mean() - total_target) < 3 * se_tr + bias_bound
