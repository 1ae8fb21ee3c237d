import numpy as np
import pytest

from slowfast.benchmarks import tanh_benchmark
from slowfast.manifold import (StationarySolutionSpec, asymptotic_manifold_h0,
                               contraction_factors, default_gamma,
                               lyapunov_perron_solve, reapply_sweep,
                               sample_stationary_paths, stationary_solution,
                               tracking_check)
from slowfast.model import DriftFn, SlowFastModel


def plain_model(f=None, g=None, sigma1=0.0, sigma2=0.0, eps=0.1,
                jump_fast=None):
    return SlowFastModel(a=[[-1.0]], b=[[-2.0]], f=f or DriftFn.zero(1),
                         g=g or DriftFn.zero(1), sigma1=sigma1, sigma2=sigma2,
                         jump_fast=jump_fast, epsilon=eps, x0=[0.0], y0=[0.0])


# -- stationary solutions ---------------------------------------------------

def test_stationary_solution_zero_noise():
    spec = StationarySolutionSpec("fast", [[-2.0]], 0.0, None, 0.1, 5.0, 0.01)
    _, _, value = stationary_solution(spec, np.random.default_rng(0))
    assert value[0] == 0.0


def test_stationary_fast_variance():
    # OU stationary variance sigma^2 / (2 b) = 0.25
    spec = StationarySolutionSpec("fast", [[-2.0]], 1.0, None, 0.1, 5.0, 0.005)
    rng = np.random.default_rng(5)
    vals = np.array([stationary_solution(spec, rng)[2][0] for _ in range(4000)])
    var = vals.var(ddof=1)
    se = var * np.sqrt(2.0 / len(vals))
    assert abs(var - 0.25) <= 3 * se


@pytest.mark.parametrize("eps", [0.5, 0.05])
def test_stationary_slow_variance_epsilon_free(eps):
    # the epsilon in the kernel and the sqrt(eps) noise scale cancel:
    # variance sigma^2 / (2 a) = 0.5 for any epsilon
    spec = StationarySolutionSpec("slow_scaled", [[-1.0]], 1.0, None, eps,
                                  5.0 / eps, 0.01 / eps)
    rng = np.random.default_rng(2)
    vals = np.array([stationary_solution(spec, rng)[2][0] for _ in range(2500)])
    var = vals.var(ddof=1)
    se = var * np.sqrt(2.0 / len(vals))
    assert abs(var - 0.5) <= 3 * se


def test_stationary_fast_rescaled_marginal():
    spec = StationarySolutionSpec("fast_rescaled", [[-2.0]], 1.0, None, 0.1,
                                  1.0, 0.002)
    rng = np.random.default_rng(3)
    vals = np.array([stationary_solution(spec, rng)[2][0] for _ in range(2500)])
    var = vals.var(ddof=1)
    se = var * np.sqrt(2.0 / len(vals))
    assert abs(var - 0.25) <= 3 * se


def test_stationary_rejects_wrong_sign():
    spec = StationarySolutionSpec("fast", [[2.0]], 1.0, None, 0.1, 5.0, 0.01)
    with pytest.raises(ValueError, match="Hurwitz"):
        stationary_solution(spec, np.random.default_rng(0))


def test_stationary_rejects_short_tail():
    spec = StationarySolutionSpec("fast", [[-2.0]], 1.0, None, 0.1, 1.0, 0.01)
    with pytest.raises(ValueError, match="t_neg"):
        stationary_solution(spec, np.random.default_rng(0))


# -- contraction factors ----------------------------------------------------

def test_contraction_zero_case():
    m = plain_model(f=DriftFn.zero(1), g=DriftFn.zero(1))
    rho, rho_hat = contraction_factors(m, 0.0, 1.0)
    assert rho == 0.0
    assert rho_hat == 0.0


def test_contraction_reference_value():
    # eps Lf/(gamma - eps ga') + Lg/(gb - gamma) = 0.1/0.9 + 0.5 = 0.61111
    f = DriftFn.linear(fy=[[1.0]], n=1)
    g = DriftFn.linear(fy=[[0.5]], n=1)
    m = plain_model(f=f, g=g)
    rho, rho_hat = contraction_factors(m, 0.1, 1.0)
    assert rho == pytest.approx(0.1 / 0.9 + 0.5, abs=1e-12)
    lip = 0.5 / (1.0 - rho)
    assert rho_hat == pytest.approx(rho + 0.1 * 0.5 * lip / 0.9, abs=1e-12)


def test_contraction_band_validation():
    m = plain_model(g=DriftFn.linear(fy=[[0.5]], n=1))
    with pytest.raises(ValueError, match="band"):
        contraction_factors(m, 0.1, 1.6)     # above gb - Lg = 1.5
    with pytest.raises(ValueError, match="band"):
        contraction_factors(m, 0.5, 0.4)     # below eps * ga' = 0.5


def test_default_gamma_centers_band():
    m = tanh_benchmark()
    assert default_gamma(m) == pytest.approx((2.0 - 0.25) / 2.0)


# -- fixed-point solver -----------------------------------------------------

def test_graph_zero_for_zero_g():
    m = plain_model(sigma2=1.0)
    sol = lyapunov_perron_solve(m, 0.1, [0.4], grid_step=0.01, t_neg=5.0,
                                rng=np.random.default_rng(4))
    assert sol.h_value[0] == 0.0
    assert sol.iterations <= 2


def test_graph_constant_g_quadrature_exact():
    m = plain_model(g=DriftFn.constant([1.0]), eps=0.05)
    sol = lyapunov_perron_solve(m, 0.05, [0.3], grid_step=0.005, t_neg=8.0,
                                tol=1e-10, rng=np.random.default_rng(5))
    assert abs(sol.h_value[0] - 0.5) < 1e-6


def test_solver_refuses_rho_ge_one():
    f = DriftFn.linear(fy=[[1.0]], n=1)
    g = DriftFn.linear(fy=[[0.9]], n=1)
    m = plain_model(f=f, g=g)
    # gamma pinned near the top of the band makes Lg/(gb-gamma) close to 1
    with pytest.raises(ValueError, match="rho"):
        lyapunov_perron_solve(m, 0.9, [0.0], gamma=1.05, grid_step=0.01,
                              t_neg=4.0, rng=np.random.default_rng(0))


def test_residual_ratios_bounded_by_rho():
    m = tanh_benchmark()
    sol = lyapunov_perron_solve(m, 0.1, [0.8], grid_step=0.005, t_neg=8.0,
                                tol=1e-10, rng=np.random.default_rng(6))
    ratios = sol.residual_ratios(floor=1e-11)
    assert ratios, "expected at least one usable residual ratio"
    assert max(ratios) <= sol.rho + 0.05


def test_solution_invariants_and_reapplication():
    m = tanh_benchmark()
    paths = sample_stationary_paths(m, 0.1, 16.0, 0.0, 0.005,
                                    np.random.default_rng(7))
    sol = lyapunov_perron_solve(m, 0.1, [0.8], grid_step=0.005, t_neg=8.0,
                                paths=paths, tol=1e-9)
    assert sol.rho < 1.0
    assert sol.lip_bound == pytest.approx(
        0.25 / (2.0 - sol.gamma) / (1.0 - sol.rho))
    # doubling the truncation horizon moves the graph value below tol scale
    sol2 = lyapunov_perron_solve(m, 0.1, [0.8], grid_step=0.005, t_neg=16.0,
                                 paths=paths, tol=1e-9)
    assert abs(sol.h_value[0] - sol2.h_value[0]) < 1e-6
    # the converged point is a fixed point: one more sweep stays below 2 tol
    assert reapply_sweep(m, sol, paths) < 2e-9


def test_graph_lipschitz_certificate():
    m = tanh_benchmark()
    paths = sample_stationary_paths(m, 0.1, 8.0, 0.0, 0.005,
                                    np.random.default_rng(8))
    rng = np.random.default_rng(9)
    base = lyapunov_perron_solve(m, 0.1, [0.0], grid_step=0.005, t_neg=8.0,
                                 paths=paths, tol=1e-10)
    for _ in range(20):
        u0, u1 = rng.uniform(-1.5, 1.5, size=2)
        h0 = lyapunov_perron_solve(m, 0.1, [u0], grid_step=0.005, t_neg=8.0,
                                   paths=paths, tol=1e-10).h_value[0]
        h1 = lyapunov_perron_solve(m, 0.1, [u1], grid_step=0.005, t_neg=8.0,
                                   paths=paths, tol=1e-10).h_value[0]
        assert abs(h0 - h1) <= base.lip_bound * abs(u0 - u1) + 1e-9


def test_solver_matrix_case_matches_scalar():
    # diagonal 2-D system decouples into two scalar solves
    f2 = DriftFn.zero(2)
    g2 = DriftFn.constant([1.0, 0.5])
    m2 = SlowFastModel(a=np.diag([-1.0, -1.0]), b=np.diag([-2.0, -4.0]),
                       f=f2, g=g2, sigma1=0.0, sigma2=0.0, epsilon=0.05,
                       x0=[0.0, 0.0], y0=[0.0, 0.0])
    sol = lyapunov_perron_solve(m2, 0.05, [0.2, -0.1], grid_step=0.005,
                                t_neg=8.0, tol=1e-10,
                                rng=np.random.default_rng(10))
    assert abs(sol.h_value[0] - 0.5) < 1e-6
    assert abs(sol.h_value[1] - 0.125) < 1e-6


# -- asymptotic graph --------------------------------------------------------

def test_h0_zero_and_constant_cases():
    m0 = plain_model(sigma2=1.0)
    h0 = asymptotic_manifold_h0(m0, [0.7], grid_step=0.01, t_neg=6.0,
                                rng=np.random.default_rng(11))
    assert h0[0] == 0.0
    mc = plain_model(g=DriftFn.constant([1.0]))
    hc = asymptotic_manifold_h0(mc, [0.7], grid_step=0.005, t_neg=8.0,
                                rng=np.random.default_rng(11), tol=1e-10)
    assert abs(hc[0] - 0.5) < 1e-6


def test_graph_converges_to_h0_as_epsilon_shrinks():
    m = tanh_benchmark()
    paths = sample_stationary_paths(m, 0.1, 8.0, 0.0, 0.005,
                                    np.random.default_rng(12))
    h0 = asymptotic_manifold_h0(m, [0.8], grid_step=0.005, t_neg=8.0,
                                paths=paths, tol=1e-10)
    gaps = []
    for eps in (0.1, 0.05, 0.025):
        sol = lyapunov_perron_solve(m.with_epsilon(eps), eps, [0.8],
                                    grid_step=0.005, t_neg=8.0, paths=paths,
                                    tol=1e-10)
        gaps.append(abs(sol.h_value[0] - h0[0]))
    assert gaps[0] > gaps[1] > gaps[2]


# -- exponential tracking ----------------------------------------------------

def test_tracking_identical_initial_conditions():
    m = tanh_benchmark()
    rep = tracking_check(m, 0.1, ([0.8], [0.2]), ([0.8], [0.2]), 1.0, 0.01,
                         rng=np.random.default_rng(13))
    assert np.all(rep.gap == 0.0)
    assert rep.under_envelope


def test_tracking_linear_rate_matches_gamma_b():
    m = plain_model()
    rep = tracking_check(m, 0.1, ([0.5], [0.3]), ([0.5], [0.9]), 2.0, 0.005,
                         rng=np.random.default_rng(14))
    assert abs(rep.rate_fitted - 2.0) <= 0.2
    assert rep.under_envelope


def test_tracking_tanh_rate_and_envelope():
    m = tanh_benchmark()
    sol = lyapunov_perron_solve(m, 0.1, [0.8], grid_step=0.005, t_neg=8.0,
                                rng=np.random.default_rng(15), tol=1e-10)
    rep = tracking_check(m, 0.1, ([0.8], [sol.h_value[0]]), ([0.8], [0.9]),
                         2.0, 0.005, rng=np.random.default_rng(16))
    assert rep.rate_fitted >= rep.gamma
    assert rep.under_envelope


def test_solver_non_normal_matrix_constant_drift():
    # upper-triangular B: fixed point of the graph map is -B^{-1} c exactly
    b = np.array([[-2.0, 1.0], [0.0, -3.0]])
    c = np.array([1.0, 0.6])
    m = SlowFastModel(a=-np.eye(2), b=b, f=DriftFn.zero(2),
                      g=DriftFn.constant(c), sigma1=0.0, sigma2=0.0,
                      epsilon=0.05, x0=[0.0, 0.0], y0=[0.0, 0.0])
    sol = lyapunov_perron_solve(m, 0.05, [0.2, -0.3], grid_step=0.005,
                                t_neg=8.0, tol=1e-11,
                                rng=np.random.default_rng(17))
    exact = -np.linalg.solve(b, c)
    assert np.max(np.abs(sol.h_value - exact)) < 1e-6


def test_solver_u_profile_constant_f_closed_form():
    # with f = c constant the slow fixed-point profile is
    # u(t) = e^{eps A t} u0 + A^{-1} (e^{eps A t} - I) c for t <= 0
    eps, a, c = 0.1, -1.0, 2.0
    m = SlowFastModel(a=[[a]], b=[[-2.0]], f=DriftFn.constant([c]),
                      g=DriftFn.constant([1.0]), sigma1=0.0, sigma2=0.0,
                      epsilon=eps, x0=[0.0], y0=[0.0])
    sol = lyapunov_perron_solve(m, eps, [0.5], grid_step=0.002, t_neg=8.0,
                                tol=1e-11, rng=np.random.default_rng(18))
    ts = sol.profile.grid
    exact = np.exp(eps * a * ts) * 0.5 + (np.exp(eps * a * ts) - 1.0) * c / a
    assert np.max(np.abs(sol.profile.u[:, 0] - exact)) < 1e-9
