"""Explicit jump-diffusion time stepping and the core process simulators.

The scheme is Euler-Maruyama with exact jump placement: one step advances

    state + (linear @ state + nonlinear) * dt + sigma * (dW + dJ)

where dJ already carries the compensator.  Jumps break the smoothness that
higher-order schemes need, and every claim verified downstream is a weak or
strong limit rather than a pathwise order statement, so the explicit scheme
is the right tool.  The coupled simulator enforces the stability guard
``dt <= epsilon / 10`` because the fast drift magnitude scales like 1/epsilon.

Trajectories that hit a non-finite state are marked diverged rather than
returned silently; ensemble statistics exclude them and report the count.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .noise import rescale_fast, sample_increments


class DivergedError(RuntimeError):
    """Raised when a simulation required to stay finite diverges."""


@dataclass
class Trajectory:
    """One realized path: time grid plus states, with provenance tags."""

    grid: np.ndarray                 # (M+1,)
    states: np.ndarray               # (M+1, n)
    meta: dict = field(default_factory=dict)
    diverged: bool = False
    diverged_at: int | None = None

    @property
    def n(self):
        return self.states.shape[-1]

    def value_at(self, t):
        """State at the last grid point <= t."""
        idx = int(np.searchsorted(self.grid, t + 1e-12, side="right") - 1)
        return self.states[max(idx, 0)]

    def to_csv(self, path_or_buf, label="x"):
        header = "t," + ",".join(f"{label}{i + 1}" for i in range(self.n))
        rows = np.column_stack([self.grid, self.states])
        buf = io.StringIO()
        np.savetxt(buf, rows, fmt="%.17g", delimiter=",", header=header, comments="")
        text = buf.getvalue()
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w") as fh:
                fh.write(text)


def make_grid(t_end, dt):
    if t_end < 0 or dt <= 0:
        raise ValueError("need t_end >= 0 and dt > 0")
    m = int(round(t_end / dt)) if t_end > 0 else 0
    grid = dt * np.arange(m + 1)
    if m > 0:
        grid[-1] = t_end
    return grid


def apply_noise(sigma, incr):
    """Apply a scalar or matrix amplitude to an increment (..., n)."""
    if np.ndim(sigma) == 0:
        return sigma * incr
    return incr @ np.asarray(sigma).T


def step(state, linear, nonlinear, sigma, dt, d_brownian, d_jump):
    """One explicit step; works on a single state or a batch (..., n)."""
    drift = state @ np.asarray(linear).T + nonlinear
    return state + drift * dt + apply_noise(sigma, d_brownian + d_jump)


def _finite(arr):
    return bool(np.all(np.isfinite(arr)))


def simulate_slow_fast(m, t_end, dt, rng=None, slow_incr=None, fast_incr=None,
                       seed_tag=None):
    """Simulate the coupled system on [0, t_end]; returns (x, y) trajectories.

    Increments may be injected (for coupling experiments); otherwise the slow
    stream is drawn first and the fast stream second from ``rng``.
    """
    if dt > m.epsilon / 10 + 1e-15:
        raise ValueError(
            f"dt={dt} violates the stability guard dt <= epsilon/10 = {m.epsilon / 10}")
    grid = make_grid(t_end, dt)
    n = m.n
    if slow_incr is None:
        slow_incr = sample_increments(n, grid, rng, jump=m.jump_slow)
    if fast_incr is None:
        fast_incr = rescale_fast(n, m.epsilon, grid, rng, jump=m.jump_fast)

    steps = len(grid) - 1
    xs = np.empty((steps + 1, n))
    ys = np.empty((steps + 1, n))
    xs[0], ys[0] = m.x0, m.y0
    a_t, b_t = m.a.T, m.b.T
    diverged_at = None
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            x, y = xs[k], ys[k]
            fx = m.f(x, y)
            gy = m.g(x, y)
            xs[k + 1] = x + (x @ a_t + fx) * dt + apply_noise(
                m.sigma1, slow_incr.d_brownian[k] + slow_incr.d_jump[k])
            ys[k + 1] = y + (y @ b_t + gy) * (dt / m.epsilon) + apply_noise(
                m.sigma2, fast_incr.d_brownian[k] + fast_incr.d_jump[k])
            if not (_finite(xs[k + 1]) and _finite(ys[k + 1])):
                diverged_at = k + 1
                xs[k + 2:] = np.nan
                ys[k + 2:] = np.nan
                break
    meta = {"process": "slow-fast", "epsilon": m.epsilon, "dt": dt, "seed": seed_tag}
    diverged = diverged_at is not None
    return (Trajectory(grid, xs, dict(meta, component="x"), diverged, diverged_at),
            Trajectory(grid, ys, dict(meta, component="y"), diverged, diverged_at))


def simulate_frozen_fast(m, x_frozen, y0, t_end, dt, rng=None, incr=None,
                         seed_tag=None):
    """Fast equation with the slow state frozen, at the fast equation's own
    timescale (no 1/epsilon)."""
    grid = make_grid(t_end, dt)
    n = m.n
    x_frozen = np.asarray(x_frozen, dtype=float)
    if incr is None:
        incr = sample_increments(n, grid, rng, jump=m.jump_fast)
    steps = len(grid) - 1
    ys = np.empty((steps + 1, n))
    ys[0] = np.asarray(y0, dtype=float)
    b_t = m.b.T
    diverged_at = None
    for k in range(steps):
        y = ys[k]
        ys[k + 1] = y + (y @ b_t + m.g(x_frozen, y)) * dt + apply_noise(
            m.sigma2, incr.d_brownian[k] + incr.d_jump[k])
        if not _finite(ys[k + 1]):
            diverged_at = k + 1
            ys[k + 2:] = np.nan
            break
    meta = {"process": "frozen-fast", "x_frozen": x_frozen.tolist(), "dt": dt,
            "seed": seed_tag}
    return Trajectory(grid, ys, meta, diverged_at is not None, diverged_at)


def frozen_fast_batch(m, x_frozen, y0, steps, dt, rng, n_paths, fast_rate=False):
    """Batched frozen-fast stepping; returns states (steps+1, n_paths, n).

    ``fast_rate=True`` runs at the rescaled timescale (drift / epsilon, noise
    variance dt/epsilon), which is the regime the coupled system's fast
    component lives in.
    """
    n = m.n
    scale = 1.0 / m.epsilon if fast_rate else 1.0
    x_frozen = np.broadcast_to(np.asarray(x_frozen, dtype=float), (n_paths, n))
    ys = np.empty((steps + 1, n_paths, n))
    ys[0] = np.broadcast_to(np.asarray(y0, dtype=float), (n_paths, n))
    b_t = m.b.T
    std = np.sqrt(dt * scale)
    rate = 0.0 if m.jump_fast is None else m.jump_fast.intensity * scale
    for k in range(steps):
        y = ys[k]
        incr = rng.normal(0.0, std, size=(n_paths, n))
        if rate > 0:
            counts = rng.poisson(rate * dt, size=(n_paths, 1))
            # lump per-step event sizes; exact event times are irrelevant here
            sizes = np.zeros((n_paths, n))
            active = counts[:, 0] > 0
            if np.any(active):
                total = int(counts.sum())
                draws = m.jump_fast.size_dist.sample(rng, (total, n))
                pos = 0
                for i in np.nonzero(active)[0]:
                    c = int(counts[i, 0])
                    sizes[i] = draws[pos:pos + c].sum(axis=0)
                    pos += c
            incr = incr + sizes - rate * m.jump_fast.mean_size * dt
        ys[k + 1] = y + (y @ b_t + m.g(x_frozen, y)) * (dt * scale) + apply_noise(
            m.sigma2, incr)
    return ys
