"""Normal-deviation limit: fluctuation kernel, limit SDE, and diagnostics.

The rescaled fluctuation (x_eps - x)/sqrt(eps) converges weakly to the
linear SDE

    d theta = A theta dt + J(x(t)) theta dt + sqrt(Htilde(x(t))) dW'

where J is the Jacobian of the averaged drift and Htilde integrates the
stationary autocovariance of f(x, .) along the fast invariant state:
Htilde_ij = int_0^inf (H_ij(s) + H_ji(s)) ds, symmetrized so the square root
exists.  The driving W' is taken independent of the slow noise: the limit
fluctuation originates in the fast noise.  The matrix-valued drift reading
(adding J(x) itself rather than J(x) theta) is exposed behind
``literal_drift`` for comparison; both coincide whenever the averaged drift
is constant.

The stationary fast state inside the kernel is realized by the long-run
frozen-fast process, estimated over independent replicas.  Residual
diagnostics couple the true system with a run started on the manifold (the
frozen-fast stationary value realized by a burn-in with its own substream)
so that exponential tracking makes the residual O(sqrt(eps)) per path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .averaging import simulate_averaged
from .integrator import (Trajectory, apply_noise, frozen_fast_batch,
                         make_grid)
from .model import sigma_is_zero
from .noise import (ROLE_BURN, ROLE_DEV, ROLE_FAST, ROLE_SLOW,
                    rescale_fast, sample_increments, substream)
from .harness import two_sample_compare


@dataclass
class KernelEstimate:
    """Lagged autocovariance of the centered slow drift at a frozen point."""

    x: np.ndarray
    lags: np.ndarray              # (L+1,) lag times, starting at 0
    h: np.ndarray                 # (L+1, n, n)
    stderr: np.ndarray
    s_max: float
    decayed: bool
    stderr_widened: bool
    fbar_used: np.ndarray
    n_replicas: int

    def to_csv(self, path):
        n = self.h.shape[-1]
        names = [f"H_{i+1}{j+1}" for i in range(n) for j in range(n)]
        errs = [f"stderr_{i+1}{j+1}" for i in range(n) for j in range(n)]
        with open(path, "w") as fh:
            fh.write("s," + ",".join(names + errs) + "\n")
            for k, s in enumerate(self.lags):
                cells = [f"{s:.17g}"]
                cells += [f"{v:.17g}" for v in self.h[k].ravel()]
                cells += [f"{v:.17g}" for v in self.stderr[k].ravel()]
                fh.write(",".join(cells) + "\n")


def autocovariance_kernel(m, x, lags, burn_in, horizon, dt, rng, n_replicas=24):
    """Estimate H(s) = E[(f(x, y(s)) - fbar)(f(x, y(0)) - fbar)^T] at ``x``.

    Stationarity is realized by burn-in of the frozen-fast process; the
    estimate pools independent replicas, whose spread provides the standard
    error.  Requires horizon - burn_in >= 50 * max(lags) so each replica
    holds enough decorrelated windows.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lags = np.asarray(sorted(lags), dtype=float)
    if lags[0] < 0:
        raise ValueError("lags must be nonnegative")
    if horizon - burn_in < 50.0 * max(lags[-1], dt):
        raise ValueError("window too short: need horizon - burn_in >= 50*max(lags)")
    n = m.n
    steps = int(round(horizon / dt))
    ys = frozen_fast_batch(m, x, m.y0, steps, dt, rng, n_replicas)
    first = int(round(burn_in / dt))
    window = ys[first:]                       # (T, P, n)
    xb = np.broadcast_to(x, window.shape)
    f_vals = m.f(xb, window)
    fbar = f_vals.mean(axis=(0, 1))
    centered = f_vals - fbar                  # (T, P, n)

    lag_idx = np.round(lags / dt).astype(int)
    h = np.empty((len(lags), n, n))
    se = np.empty((len(lags), n, n))
    t_len = centered.shape[0]
    for k, li in enumerate(lag_idx):
        lead = centered[li:]                  # f(x, y(t+s))
        base = centered[:t_len - li]
        per_rep = np.einsum("tpi,tpj->pij", lead, base) / (t_len - li)
        h[k] = per_rep.mean(axis=0)
        se[k] = per_rep.std(axis=0, ddof=1) / np.sqrt(n_replicas)

    widened = n_replicas < 8
    if widened:
        se = 2.0 * se
    # decay criterion: the top decile of lags sits at the noise floor
    tail = max(1, len(lags) // 10)
    decayed = bool(np.mean(np.abs(h[-tail:])) <= 3.0 * np.mean(se[-tail:]) + 1e-300)
    return KernelEstimate(x, lags, h, se, float(lags[-1]), decayed, widened,
                          fbar, n_replicas)


def diffusion_matrix(kernel):
    """Integrated symmetrized kernel, clipped to the PSD cone.

    Refuses kernels that have not decayed below their noise floor by the
    last lag: the integral would be truncation-dominated.
    """
    if not kernel.decayed:
        raise ValueError(
            "kernel has not decayed below the noise floor by "
            f"s_max={kernel.s_max}; extend the lags or the horizon")
    sym = kernel.h + np.transpose(kernel.h, (0, 2, 1))
    htilde = np.trapezoid(sym, kernel.lags, axis=0)
    htilde = 0.5 * (htilde + htilde.T)
    w, q = np.linalg.eigh(htilde)
    out = (q * np.clip(w, 0.0, None)) @ q.T
    return 0.5 * (out + out.T)


def fbar_derivative(am, x, fd_step=1e-5):
    """Jacobian of the averaged drift at ``x``.

    Uses the exact matrix when the averaged drift is linear, otherwise
    central differences column by column.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = len(x)
    if am.fbar.deriv_matrix is not None:
        return np.array(am.fbar.deriv_matrix, dtype=float)
    if fd_step <= 0:
        raise ValueError("fd_step must be positive")
    if fd_step < 1e3 * np.finfo(float).eps * (1.0 + float(np.max(np.abs(x)))):
        raise ValueError("fd_step too small: central differences would cancel")
    jac = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = fd_step
        jac[:, j] = (am.fbar(x + e) - am.fbar(x - e)) / (2.0 * fd_step)
    return jac


def matrix_sqrt_psd(matrix):
    """Symmetric PSD square root S with S @ S.T = matrix, by eigendecomposition.

    Eigenvalues below -1e-10 mean the input is not a covariance and are
    rejected; small negative values are clipped to zero.
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    scale = max(float(np.max(np.abs(matrix))), 1.0)
    if np.max(np.abs(matrix - matrix.T)) > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")
    w, q = np.linalg.eigh(matrix)
    if np.min(w) < -1e-10 * scale:
        raise ValueError(f"matrix has eigenvalue {np.min(w):.3g} below -1e-10")
    return (q * np.sqrt(np.clip(w, 0.0, None))) @ q.T


class DeviationModel:
    """Coefficients of the limit SDE: drift Jacobian and diffusion matrix.

    ``fbar_deriv`` and ``htilde`` may be constant matrices or callables of
    the slow state; square roots are cached per evaluation point.
    """

    def __init__(self, a, fbar_deriv, htilde, literal_drift=False):
        self.a = np.atleast_2d(np.asarray(a, dtype=float))
        self.n = self.a.shape[0]
        self._deriv = fbar_deriv
        self._htilde = htilde
        self.literal_drift = bool(literal_drift)
        self._sqrt_cache = {}
        self.deriv_const = (np.atleast_2d(np.asarray(fbar_deriv, dtype=float))
                            if not callable(fbar_deriv) else None)
        self.htilde_const = (np.atleast_2d(np.asarray(htilde, dtype=float))
                             if not callable(htilde) else None)
        if self.htilde_const is not None:
            self.sqrt_const = matrix_sqrt_psd(self.htilde_const)
        else:
            self.sqrt_const = None

    def deriv(self, x):
        if self.deriv_const is not None:
            return self.deriv_const
        return np.atleast_2d(np.asarray(self._deriv(x), dtype=float))

    def htilde(self, x):
        if self.htilde_const is not None:
            return self.htilde_const
        return np.atleast_2d(np.asarray(self._htilde(x), dtype=float))

    def sqrt_htilde(self, x):
        if self.sqrt_const is not None:
            return self.sqrt_const
        key = np.asarray(x, dtype=float).tobytes()
        cached = self._sqrt_cache.get(key)
        if cached is None:
            cached = matrix_sqrt_psd(self.htilde(x))
            if len(self._sqrt_cache) < 4096:
                self._sqrt_cache[key] = cached
        return cached

    def to_json(self):
        return {
            "a": self.a.tolist(),
            "fbar_deriv": self.deriv_const.tolist() if self.deriv_const is not None else "callable",
            "htilde": self.htilde_const.tolist() if self.htilde_const is not None else "callable",
            "literal_drift": self.literal_drift,
        }


def build_deviation_model(am, kernel_or_htilde, x=None, fd_step=1e-5,
                          literal_drift=False):
    """Assemble the limit-SDE coefficients from an averaged model and either
    a KernelEstimate or an explicit diffusion matrix."""
    if isinstance(kernel_or_htilde, KernelEstimate):
        htilde = diffusion_matrix(kernel_or_htilde)
        if x is None:
            x = kernel_or_htilde.x
    else:
        htilde = np.atleast_2d(np.asarray(kernel_or_htilde, dtype=float))
    if am.fbar.deriv_matrix is not None:
        deriv = np.array(am.fbar.deriv_matrix, dtype=float)
    elif x is not None:
        deriv = fbar_derivative(am, x, fd_step=fd_step)
    else:
        deriv = lambda xv: fbar_derivative(am, xv, fd_step=fd_step)
    return DeviationModel(am.a, deriv, htilde, literal_drift=literal_drift)


def simulate_deviation(dm, x_path, t_end, dt, rng, literal_drift=None):
    """Integrate the limit SDE along a realized averaged path, theta(0) = 0."""
    literal = dm.literal_drift if literal_drift is None else literal_drift
    grid = make_grid(t_end, dt)
    if x_path.grid[-1] < t_end - 1e-12:
        raise ValueError("carrier path does not cover [0, t_end]")
    steps = len(grid) - 1
    n = dm.n
    theta = np.zeros(n)
    states = np.empty((steps + 1, n))
    states[0] = theta
    a_t = dm.a.T
    dw = rng.normal(0.0, math.sqrt(dt), size=(steps, n))
    # left-endpoint state of the carrier path at every step, resolved once
    idx = np.clip(np.searchsorted(x_path.grid, grid[:-1] + 1e-12, side="right") - 1,
                  0, len(x_path.grid) - 1)
    x_at = x_path.states[idx]
    constant = dm.deriv_const is not None and dm.htilde_const is not None
    if constant:
        jac, s = dm.deriv_const, dm.sqrt_const
    diverged_at = None
    ones = np.ones(n)
    for k in range(steps):
        if not constant:
            jac = dm.deriv(x_at[k])
            s = dm.sqrt_htilde(x_at[k])
        drift = theta @ a_t + (jac @ ones if literal else jac @ theta)
        theta = theta + drift * dt + s @ dw[k]
        states[k + 1] = theta
        if not np.all(np.isfinite(theta)):
            diverged_at = k + 1
            states[k + 2:] = np.nan
            break
    meta = {"process": "deviation", "dt": dt, "literal_drift": literal}
    return Trajectory(grid, states, meta, diverged_at is not None, diverged_at)


@dataclass
class TruncationSpec:
    """Gating radius for the truncated fluctuation; inf disables the gate."""

    k: float

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("truncation radius must be positive")


def _manifold_started_inputs(m, t_end, dt, master_seed, start, count,
                             burn_time=None, y_start=None):
    """Fast/slow increments plus a manifold start per path.

    The manifold start is the frozen-fast stationary value at x0, realized
    by a burn-in at the fast timescale on the path's own burn substream.
    """
    n = m.n
    grid = make_grid(t_end, dt)
    steps = len(grid) - 1
    if burn_time is None:
        burn_time = 10.0 * m.epsilon / m.gamma_b
    burn_steps = max(int(round(burn_time / dt)), 1)

    d_fast = np.empty((steps, count, n))
    need_slow = not (sigma_is_zero(m.sigma1)
                     and (m.jump_slow is None or m.jump_slow.intensity == 0))
    d_slow = np.zeros((steps, count, n)) if need_slow else None
    y_h0 = np.empty((count, n))
    for i in range(count):
        fast = rescale_fast(n, m.epsilon, grid,
                            substream(master_seed, start + i, ROLE_FAST),
                            jump=m.jump_fast)
        d_fast[:, i, :] = fast.d_brownian + fast.d_jump
        if need_slow:
            slow = sample_increments(n, grid,
                                     substream(master_seed, start + i, ROLE_SLOW),
                                     jump=m.jump_slow)
            d_slow[:, i, :] = slow.d_brownian + slow.d_jump
        burn_rng = substream(master_seed, start + i, ROLE_BURN)
        burn = frozen_fast_batch(m, m.x0, m.y0 if y_start is None else y_start,
                                 burn_steps, dt, burn_rng, 1, fast_rate=True)
        y_h0[i] = burn[-1, 0]
    return grid, d_fast, d_slow, y_h0


@dataclass
class Theta2Report:
    mean_sup_sq: float
    stderr: float
    epsilon: float
    n_paths: int
    n_diverged: int

    def to_json(self):
        return {"mean_sup_sq": self.mean_sup_sq, "stderr": self.stderr,
                "epsilon": self.epsilon, "n_paths": self.n_paths,
                "n_diverged": self.n_diverged}


def residual_theta2(m, epsilon, t_end, dt, n_paths, master_seed,
                    burn_time=None, y_on_manifold=False):
    """Monte-Carlo estimate of E sup_t |theta2|^2.

    theta2 integrates A theta2 + (f(x, y) - f(x_h, y_h)) / sqrt(eps) where
    (x_h, y_h) is the same system started on the manifold and driven by the
    same noise.  ``y_on_manifold`` starts the true path on the manifold too,
    which collapses the residual to zero exactly.
    """
    me = m.with_epsilon(epsilon)
    if dt > epsilon / 10 + 1e-15:
        raise ValueError("dt violates the stability guard dt <= epsilon/10")
    grid, d_fast, d_slow, y_h0 = _manifold_started_inputs(
        me, t_end, dt, master_seed, 0, n_paths, burn_time=burn_time)
    n = me.n
    steps = len(grid) - 1
    a_t, b_t = me.a.T, me.b.T
    x = np.broadcast_to(me.x0, (n_paths, n)).copy()
    xh = x.copy()
    y = y_h0.copy() if y_on_manifold else np.broadcast_to(me.y0, (n_paths, n)).copy()
    yh = y_h0.copy()
    theta2 = np.zeros((n_paths, n))
    sup_sq = np.zeros(n_paths)
    alive = np.ones(n_paths, dtype=bool)
    root = math.sqrt(epsilon)
    for k in range(steps):
        fx = me.f(x, y)
        fxh = me.f(xh, yh)
        gy = me.g(x, y)
        gyh = me.g(xh, yh)
        ds = apply_noise(me.sigma1, d_slow[k]) if d_slow is not None else 0.0
        df = apply_noise(me.sigma2, d_fast[k])
        theta2 = theta2 + (theta2 @ a_t + (fx - fxh) / root) * dt
        x = x + (x @ a_t + fx) * dt + ds
        xh = xh + (xh @ a_t + fxh) * dt + ds
        y = y + (y @ b_t + gy) * (dt / epsilon) + df
        yh = yh + (yh @ b_t + gyh) * (dt / epsilon) + df
        ok = np.all(np.isfinite(theta2), axis=-1) & np.all(np.isfinite(y), axis=-1)
        alive &= ok
        sup_sq = np.where(alive,
                          np.maximum(sup_sq, np.sum(theta2 * theta2, axis=-1)),
                          sup_sq)
    vals = sup_sq[alive]
    if len(vals) == 0:
        raise RuntimeError("all residual paths diverged")
    return Theta2Report(float(vals.mean()),
                        float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0,
                        epsilon, n_paths, int((~alive).sum()))


def simulate_truncated_deviation(m, am, epsilon, trunc, t_end, dt, master_seed,
                                 path_index=0, burn_time=None,
                                 return_drive=False):
    """Gated fluctuation: d theta1 = A theta1 dt + q(theta1) drive dt.

    The drive is (f(x_h, y_h) - fbar(x_avg)) / sqrt(eps) along a manifold-
    started run coupled to the averaged path; the gate q is 1 inside the ball
    |theta1| <= K and 0 outside, evaluated at the step's start.  ``trunc``
    may be a TruncationSpec, a positive float (inf allowed), or None for the
    ungated process.
    """
    if isinstance(trunc, TruncationSpec):
        radius = trunc.k
    elif trunc is None:
        radius = math.inf
    else:
        radius = float(trunc)
        TruncationSpec(radius)
    me = m.with_epsilon(epsilon)
    if dt > epsilon / 10 + 1e-15:
        raise ValueError("dt violates the stability guard dt <= epsilon/10")
    grid, d_fast, d_slow, y_h0 = _manifold_started_inputs(
        me, t_end, dt, master_seed, path_index, 1, burn_time=burn_time)
    n = me.n
    steps = len(grid) - 1
    a_t, b_t = me.a.T, me.b.T

    xh = me.x0.copy()
    yh = y_h0[0].copy()
    xa = am.x0.copy()
    theta1 = np.zeros(n)
    states = np.empty((steps + 1, n))
    states[0] = theta1
    drives = np.empty((steps, n))
    gates = np.empty(steps)
    root = math.sqrt(epsilon)
    for k in range(steps):
        fxh = me.f(xh, yh)
        gyh = me.g(xh, yh)
        fb = am.fbar(xa)
        drive = (fxh - fb) / root
        gate = 1.0 if float(np.linalg.norm(theta1)) <= radius else 0.0
        drives[k] = drive
        gates[k] = gate
        theta1 = theta1 + (theta1 @ a_t + gate * drive) * dt
        states[k + 1] = theta1
        ds = apply_noise(me.sigma1, d_slow[k][0]) if d_slow is not None else 0.0
        xh = xh + (xh @ a_t + fxh) * dt + ds
        yh = yh + (yh @ b_t + gyh) * (dt / epsilon) + apply_noise(
            me.sigma2, d_fast[k][0])
        xa = xa + (xa @ a_t + fb) * dt + ds
    traj = Trajectory(grid, states, {"process": "truncated-deviation",
                                     "k": radius, "epsilon": epsilon})
    if return_drive:
        return traj, {"drive": drives, "gate": gates}
    return traj


def simulate_corrected(am, dm, epsilon, t_end, dt, rng, seed_tag=None):
    """Averaged slow equation plus the sqrt(eps)-scaled fluctuation noise.

    The correction's Brownian motion is independent of the slow noise (child
    streams: slow first, then the correction).  epsilon = 0 reproduces the
    plain averaged path for the same generator state.
    """
    c_slow, c_dev = rng.spawn(2)
    grid = make_grid(t_end, dt)
    n = am.n
    incr = sample_increments(n, grid, c_slow, jump=am.jump_slow)
    steps = len(grid) - 1
    dw = c_dev.normal(0.0, math.sqrt(dt), size=(steps, n))
    xs = np.empty((steps + 1, n))
    xs[0] = am.x0
    a_t = am.a.T
    root = math.sqrt(epsilon)
    diverged_at = None
    for k in range(steps):
        x = xs[k]
        s = dm.sqrt_htilde(x)
        xs[k + 1] = (x + (x @ a_t + am.fbar(x)) * dt
                     + apply_noise(am.sigma1, incr.d_brownian[k] + incr.d_jump[k])
                     + root * (s @ dw[k]))
        if not np.all(np.isfinite(xs[k + 1])):
            diverged_at = k + 1
            xs[k + 2:] = np.nan
            break
    meta = {"process": "corrected", "epsilon": epsilon, "dt": dt, "seed": seed_tag}
    return Trajectory(grid, xs, meta, diverged_at is not None, diverged_at)


@dataclass
class WeakLimitReport:
    epsilon: float
    n_paths: int
    mean_diff: np.ndarray
    var_diff: np.ndarray
    cdf_distance: np.ndarray
    critical_value: float
    theta_mean: np.ndarray
    theta_var: np.ndarray
    theta_mean_se: np.ndarray
    theta_var_se: np.ndarray
    passed: bool

    def to_json(self):
        return {"epsilon": self.epsilon, "n_paths": self.n_paths,
                "mean_diff": self.mean_diff.tolist(),
                "var_diff": self.var_diff.tolist(),
                "cdf_distance": self.cdf_distance.tolist(),
                "critical_value": self.critical_value,
                "theta_mean": self.theta_mean.tolist(),
                "theta_var": self.theta_var.tolist(),
                "pass": bool(self.passed)}


def rescaled_fluctuation_samples(m, am, t_end, dt, n_paths, master_seed,
                                 batch=2000):
    """Samples of (x_eps(T) - x(T)) / sqrt(eps) over coupled path pairs."""
    from .averaging import coupled_error_batch
    n = m.n
    out = np.empty((n_paths, n))
    alive = np.ones(n_paths, dtype=bool)
    for s in range(0, n_paths, batch):
        c = min(batch, n_paths - s)
        _, diff_t, div = coupled_error_batch(m, am, t_end, dt, master_seed, s, c)
        out[s:s + c] = diff_t / math.sqrt(m.epsilon)
        alive[s:s + c] = ~div
    return out[alive], int((~alive).sum())


def limit_marginal_samples(dm, am, t_end, dt, n_paths, master_seed):
    """Samples of theta(T) from the limit SDE, one substream per path.

    When the averaged equation is deterministic (no slow noise), all paths
    share its single realized trajectory and the stepping vectorizes; with
    slow noise each path rides its own averaged realization.
    """
    n = dm.n
    grid = make_grid(t_end, dt)
    steps = len(grid) - 1
    deterministic_x = (sigma_is_zero(am.sigma1)
                       and (am.jump_slow is None or am.jump_slow.intensity == 0))
    if deterministic_x and dm.htilde_const is not None and dm.deriv_const is not None:
        theta = np.zeros((n_paths, n))
        dw = np.empty((steps, n_paths, n))
        for i in range(n_paths):
            dw[:, i, :] = substream(master_seed, i, ROLE_DEV).normal(
                0.0, math.sqrt(dt), size=(steps, n))
        a_t = dm.a.T
        j_t = dm.deriv_const.T
        s_t = dm.sqrt_const.T
        for k in range(steps):
            theta = theta + (theta @ a_t + theta @ j_t) * dt + dw[k] @ s_t
        return theta
    zero = sample_increments(n, grid, substream(master_seed, 0, ROLE_SLOW),
                             jump=am.jump_slow)
    samples = np.empty((n_paths, n))
    for i in range(n_paths):
        slow = sample_increments(n, grid, substream(master_seed, i, ROLE_SLOW),
                                 jump=am.jump_slow) if not deterministic_x else zero
        x_path = simulate_averaged(am, t_end, dt, slow)
        traj = simulate_deviation(dm, x_path, t_end, dt,
                                  substream(master_seed, i, ROLE_DEV))
        samples[i] = traj.states[-1]
    return samples


def weak_limit_report(m, am, dm, t_end, dt, n_paths, master_seed,
                      dt_limit=None, alpha=0.01, batch=2000):
    """Desk-scale weak-convergence check of the rescaled fluctuation marginal.

    Compares the empirical law of (x_eps(T) - x(T)) / sqrt(eps) against
    samples of the limit SDE marginal: CDF distance at level alpha plus
    moment gates.
    """
    theta_eps, n_div = rescaled_fluctuation_samples(m, am, t_end, dt, n_paths,
                                                    master_seed, batch=batch)
    dt_limit = dt_limit if dt_limit is not None else min(10 * dt, 1e-3)
    theta_lim = limit_marginal_samples(dm, am, t_end, dt_limit, n_paths,
                                       master_seed + 1)
    cmp = two_sample_compare(theta_eps, theta_lim, alpha=alpha)
    var = theta_eps.var(axis=0, ddof=1)
    c = theta_eps - theta_eps.mean(axis=0)
    var_se = np.sqrt(np.maximum(np.mean(c ** 4, axis=0) - var ** 2, 0.0)
                     / len(theta_eps))
    return WeakLimitReport(
        m.epsilon, n_paths, cmp.mean_diff, cmp.var_diff, cmp.cdf_distance,
        cmp.critical_value, theta_eps.mean(axis=0), var,
        theta_eps.std(axis=0, ddof=1) / np.sqrt(len(theta_eps)), var_se,
        cmp.passed)
