"""Reference models used by the verification suite and the CLI.

Both live in one dimension with closed-form oracles:

* linear: A = -1, B = -2, f(x, y) = y, g = 0, sigma1 = 0, sigma2 = 1, no
  jumps.  The frozen-fast process is a mean-zero OU state with stationary
  variance sigma2^2/(2b) = 1/4, so the averaged drift vanishes, the drift
  autocovariance is 0.25 e^{-2s}, and the integrated fluctuation matrix is
  sigma2^2/b^2 = 0.25.
* tanh: f = tanh(y1), g = 0.25 tanh(x1); the fast Lipschitz constant 0.25
  stays below sqrt(gamma_b/6), which keeps the manifold map a contraction.
"""

from __future__ import annotations

from .model import DriftFn, SlowFastModel, parse_drift


def linear_benchmark(epsilon=1e-3, x0=1.0, y0=0.0):
    f = DriftFn.linear(fy=[[1.0]], n=1)
    g = DriftFn.zero(1)
    return SlowFastModel(a=[[-1.0]], b=[[-2.0]], f=f, g=g,
                         sigma1=0.0, sigma2=1.0, epsilon=epsilon,
                         x0=[x0], y0=[y0])


def tanh_benchmark(epsilon=0.1, x0=0.8, y0=0.4):
    f = parse_drift(["tanh(y1)"], 1, lip=1.0, growth=1.0)
    g = parse_drift(["0.5*tanh(x1)*0.5"], 1, lip=0.25, growth=1.0)
    return SlowFastModel(a=[[-1.0]], b=[[-2.0]], f=f, g=g,
                         sigma1=0.0, sigma2=1.0, epsilon=epsilon,
                         x0=[x0], y0=[y0])
