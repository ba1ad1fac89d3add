"""Verification harness: densities, quadrature, Fokker-Planck residual, ergodic averages."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numba
import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import integrate

from . import models as M
from .models import EnvironmentModel, Gaussian, GrowthModel

__all__ = [
    "QuadratureError", "Histogram", "DensityReport",
    "histogram", "log_normalizer", "theoretical_density", "theoretical_cdf",
    "density_distance", "compare_density", "time_average_theta_expression",
    "batch_means", "fp_residual", "conservation_check", "zero_mean_quadrature",
]


class QuadratureError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# histograms and density comparison


@dataclass
class Histogram:
    edges: np.ndarray
    densities: np.ndarray
    n_samples: int
    n_outside: int = 0

    @property
    def widths(self):
        return np.diff(self.edges)

    @property
    def centers(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])


@dataclass
class DensityReport:
    histogram: Histogram
    theoretical: np.ndarray
    l1_distance: float
    ks_distance: float
    theoretical_mass_in_range: float = 1.0


def histogram(samples, n_bins=50, range=(0.0, 4.0)):
    """Density-normalised histogram over uniform bins.

    Samples outside ``range`` are excluded and counted in ``n_outside``;
    the densities integrate to one over the retained samples.
    """
    lo, hi = map(float, range)
    if not hi > lo:
        raise ValueError("range must satisfy hi > lo")
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise ValueError("cannot build a histogram from an empty sample")
    edges = np.linspace(lo, hi, n_bins + 1)
    counts, _ = np.histogram(samples, bins=edges)
    n_in = int(counts.sum())
    if n_in == 0:
        raise ValueError(f"no samples fall inside range {range}")
    dens = counts / (n_in * np.diff(edges))
    return Histogram(edges, dens, samples.size, samples.size - n_in)


def _bounds_from_grid(logf, grid, drop=80.0):
    """Interval of ``grid`` where ``logf`` is within ``drop`` of its maximum."""
    g = logf(grid)
    g = np.where(np.isfinite(g), g, -np.inf)
    top = g.max()
    keep = np.nonzero(g > top - drop)[0]
    i0, i1 = max(keep[0] - 1, 0), min(keep[-1] + 1, grid.size - 1)
    # local maxima serve as breakpoints for the adaptive rule
    inner = g[1:-1]
    peaks = grid[1:-1][(inner >= g[:-2]) & (inner >= g[2:]) & (inner > top - drop)]
    return grid[i0], grid[i1], top, peaks


def _quad(f, lo, hi, points, what, tol=1e-10):
    """Adaptive quadrature; fails when the achieved error estimate exceeds ``tol``."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        val, err = integrate.quad(f, lo, hi, points=points if len(points) else None,
                                  epsabs=1e-13, epsrel=1e-12, limit=500)
    if not math.isfinite(val) or err > tol * max(1.0, abs(val)):
        detail = "; ".join(str(w.message).split("\n")[0] for w in caught)
        raise QuadratureError(f"{what}: quadrature on [{lo:g}, {hi:g}] did not converge "
                              f"(value={val!r}, error estimate={err:.3g}) {detail}")
    return val, err


_U_GRID = np.linspace(-50.0, 50.0, 20001)
_Y_GRID = np.linspace(-30.0, 30.0, 24001)


def _pop_setup(model, theta):
    def logf(u):
        with np.errstate(over="ignore", invalid="ignore"):
            return -model.h(np.exp(u)) / theta + u
    lo, hi, top, peaks = _bounds_from_grid(logf, _U_GRID)
    return logf, lo, hi, top, peaks


def log_normalizer(target, theta):
    """``log Z`` with ``Z = integral of exp(-h/theta)`` over the state space.

    Growth models integrate over ``(0, inf)`` in ``u = ln x``; environments
    over the real line.
    """
    if not theta > 0:
        raise ValueError("theta must be > 0")
    if isinstance(target, GrowthModel):
        logf, lo, hi, top, peaks = _pop_setup(target, theta)
    else:
        def logf(y):
            return -target.h(y) / theta
        lo, hi, top, peaks = _bounds_from_grid(logf, _Y_GRID)
    val, _ = _quad(lambda s: math.exp(logf(s) - top), lo, hi, peaks, "normaliser")
    return top + math.log(val)


def theoretical_density(model: GrowthModel, theta, grid):
    """Normalised ``exp(-h(x)/theta) / Z`` on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be positive and strictly increasing")
    return np.exp(-model.h(grid) / theta - log_normalizer(model, theta))


def theoretical_cdf(model: GrowthModel, theta, points):
    """CDF of the population density at ``points`` (zero at and below 0)."""
    logz = log_normalizer(model, theta)
    logf, lo, hi, top, peaks = _pop_setup(model, theta)
    out = []
    for p in np.atleast_1d(points):
        if p <= 0:
            out.append(0.0)
            continue
        up = min(math.log(p), hi)
        if up <= lo:
            out.append(0.0)
            continue
        pts = peaks[(peaks > lo) & (peaks < up)]
        val, _ = _quad(lambda s: math.exp(logf(s) - logz), lo, up, pts, "cdf")
        out.append(min(val, 1.0))
    return np.array(out)


def density_distance(empirical, theoretical, edges):
    """(L1, KS) distance between two per-bin density arrays on ``edges``."""
    w = np.diff(edges)
    pe = np.asarray(empirical) * w
    pt = np.asarray(theoretical) * w
    l1 = float(np.sum(np.abs(pe - pt)))
    ks = float(np.max(np.abs(np.cumsum(pe) - np.cumsum(pt)), initial=0.0))
    return l1, min(ks, 1.0)


def compare_density(samples, model: GrowthModel, theta, n_bins=50, range=None,
                    burn_in=0.1) -> DensityReport:
    """Compare a sample path of ``x`` against the invariant population density.

    The first ``burn_in`` fraction of ``samples`` is dropped.  The theoretical
    curve is conditioned on ``range`` (as the histogram is) and evaluated at
    bin centres.  L1 uses those centre values; KS uses exact bin masses.
    """
    if range is None:
        range = (0.0, 4.0 * model.K)
    samples = np.asarray(samples, dtype=float)
    samples = samples[int(burn_in * samples.size):]
    hist = histogram(samples, n_bins, range)
    cdf = theoretical_cdf(model, theta, hist.edges)
    mass = cdf[-1] - cdf[0]
    theo = theoretical_density(model, theta, hist.centers) / mass
    l1 = float(np.sum(np.abs(hist.densities - theo) * hist.widths))
    pe = np.cumsum(hist.densities * hist.widths)
    pt = (cdf[1:] - cdf[0]) / mass
    ks = float(np.max(np.abs(pe - pt)))
    return DensityReport(hist, theo, l1, min(ks, 1.0), mass)


# ---------------------------------------------------------------------------
# ergodic averages


def batch_means(values, n_batches=20):
    """Mean and batch-means standard error of a correlated series."""
    values = np.asarray(values, dtype=float)
    size = values.size // n_batches
    if size < 1:
        raise ValueError("series shorter than the number of batches")
    batches = values[values.size - size * n_batches:].reshape(n_batches, size).mean(axis=1)
    return float(values.mean()), float(batches.std(ddof=1) / math.sqrt(n_batches))


def time_average_theta_expression(trajectory, env: EnvironmentModel, theta, lam, gamma,
                                  model: GrowthModel | None = None, burn_in=0.1, n_batches=20):
    """Time average of a theta-expression along a recorded trajectory.

    With ``model=None`` the environment expression Theta*(y) is averaged;
    otherwise the population expression ``x h'(x) - theta``.
    Returns ``(mean, stderr)`` with a batch-means standard error.
    """
    n = len(trajectory.times)
    if n < 1000:
        raise ValueError(f"need at least 1000 records, got {n}")
    start = int(burn_in * n)
    if model is None:
        vals = M.theta_env_general(env, trajectory.ys[start:], theta, lam, gamma)
    else:
        vals = M.theta_population(model, trajectory.xs[start:], theta)
    return batch_means(vals, n_batches)


# ---------------------------------------------------------------------------
# Fokker-Planck stationarity


def _fp_terms(model, env, theta, lam, gamma, X, Y, tilt):
    dstar = env.dh(Y)
    A = lam * X * dstar                       # x drift
    dA = lam * dstar                          # d/dx of x drift
    B = -lam * (X * model.dh(X) - theta) - gamma * dstar
    dB = -gamma * env.d2h(Y)                  # d/dy of y drift
    logs = -(model.h(X) + tilt * X + env.h(Y)) / theta
    sig = np.exp(logs - logs.max())
    Lx = -(model.dh(X) + tilt) / theta
    Ly = -dstar / theta
    Lyy = -env.d2h(Y) / theta
    return A, dA, B, dB, sig, Lx, Ly, Lyy


def fp_residual(model: GrowthModel, theta, lam, gamma, grid, env: EnvironmentModel | None = None,
                tilt=0.0, method="analytic", step=1e-3):
    """Max |F* sigma| over ``grid`` relative to max |lam sigma|.

    ``grid`` is a pair of 1-D arrays ``(xs, ys)``.  ``sigma`` is
    ``exp(-(h(x) + tilt*x + h*(y))/theta)``; ``tilt != 0`` gives a density that
    is *not* invariant (negative control).  ``method="fd"`` replaces the
    analytic derivatives by second-order central differences of width
    ``step``.
    """
    env = env or Gaussian()
    if not theta > 0:
        raise ValueError("theta must be > 0")
    xs, ys = (np.asarray(g, dtype=float) for g in grid)
    if np.any(xs <= 0):
        raise ValueError("x grid must lie in (0, inf)")
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    A, dA, B, dB, sig, Lx, Ly, Lyy = _fp_terms(model, env, theta, lam, gamma, X, Y, tilt)
    if method == "analytic":
        res = (-(dA * sig + A * Lx * sig)
               - (dB * sig + B * Ly * sig)
               + gamma * theta * (Ly * Ly + Lyy) * sig)
    elif method == "fd":
        shift = -(model.h(X) + tilt * X + env.h(Y)) / theta
        ref = shift.max()

        def flux_x(x):
            return lam * x * env.dh(Y) * np.exp(-(model.h(x) + tilt * x + env.h(Y)) / theta - ref)

        def dens(y):
            return np.exp(-(model.h(X) + tilt * X + env.h(y)) / theta - ref)

        def flux_y(y):
            b = -lam * (X * model.dh(X) - theta) - gamma * env.dh(y)
            return b * dens(y)

        s = step
        res = (-(flux_x(X + s) - flux_x(X - s)) / (2 * s)
               - (flux_y(Y + s) - flux_y(Y - s)) / (2 * s)
               + gamma * theta * (dens(Y + s) - 2 * dens(Y) + dens(Y - s)) / (s * s))
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(np.max(np.abs(res)) / np.max(np.abs(lam * sig)))


# ---------------------------------------------------------------------------
# conservation along the gamma = 0 flow


@numba.njit(cache=True)
def _field(x, y, model_code, K, env_code, p1, p2, lam, th):
    if env_code == 0:
        d1 = y
    elif env_code == 1:
        d1 = y * (y * y - p1)
    else:
        d1 = p1 * y * (y - p2) * (y - 1.0)
    if model_code == 0:
        xdh = x / K - 1.0
    else:
        xdh = math.log(x / K)
    return lam * x * d1, -lam * (xdh - th)


@numba.njit(cache=True)
def _invariant(x, y, model_code, K, env_code, p1, p2, th):
    if model_code == 0:
        hx = x / K - math.log(x)
    else:
        hx = 0.5 * math.log(x / K) ** 2
    if env_code == 0:
        hy = 0.5 * y * y
    elif env_code == 1:
        hy = 0.25 * y ** 4 - 0.5 * p1 * y * y
    else:
        hy = p1 * (y ** 4 / 4.0 - (1.0 + p2) * y ** 3 / 3.0 + p2 * y * y / 2.0)
    return hx - th * math.log(x) + hy


@numba.njit(cache=True)
def _conserve(x, y, n, dt, rk4, model_code, K, env_code, p1, p2, lam, th):
    i0 = _invariant(x, y, model_code, K, env_code, p1, p2, th)
    worst = 0.0
    cx = 0.0
    cy = 0.0
    for _ in range(n):
        k1x, k1y = _field(x, y, model_code, K, env_code, p1, p2, lam, th)
        if rk4:
            k2x, k2y = _field(x + 0.5 * dt * k1x, y + 0.5 * dt * k1y, model_code, K, env_code, p1, p2, lam, th)
            k3x, k3y = _field(x + 0.5 * dt * k2x, y + 0.5 * dt * k2y, model_code, K, env_code, p1, p2, lam, th)
            k4x, k4y = _field(x + dt * k3x, y + dt * k3y, model_code, K, env_code, p1, p2, lam, th)
            dx = dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            dy = dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        else:
            dx = dt * k1x
            dy = dt * k1y
        # compensated summation keeps accumulated round-off below the RK4 truncation error
        ux = dx - cx
        tx = x + ux
        cx = (tx - x) - ux
        x = tx
        uy = dy - cy
        ty = y + uy
        cy = (ty - y) - uy
        y = ty
        d = abs(_invariant(x, y, model_code, K, env_code, p1, p2, th) - i0)
        if d > worst:
            worst = d
    return worst


def conservation_check(model: GrowthModel, env: EnvironmentModel, theta, lam, x0, y0, dt, t_max,
                       method="rk4"):
    """Worst drift of the integral of motion along the noise-free gamma = 0 flow."""
    if not x0 > 0:
        raise ValueError("x0 must be > 0")
    if method not in ("rk4", "euler"):
        raise ValueError(f"unknown method {method!r}")
    n = int(math.ceil(t_max / dt - 1e-9))
    p1, p2 = env.params()
    return float(_conserve(float(x0), float(y0), n, float(dt), method == "rk4",
                           model.code, float(model.K), env.code, p1, p2, float(lam), float(theta)))


# ---------------------------------------------------------------------------
# quadrature oracle


def zero_mean_quadrature(expression, target, theta, nodes=100):
    """Expectation of ``expression`` under ``exp(-h/theta)/Z`` for ``target``.

    ``target`` is a growth model (integration over x > 0) or an environment
    model.  A Gaussian environment uses Gauss-Hermite quadrature with
    ``nodes`` points, exact for polynomials of degree < 2*nodes; everything
    else uses adaptive quadrature.
    """
    if not theta > 0:
        raise ValueError("theta must be > 0")
    if isinstance(target, Gaussian):
        z, w = hermegauss(nodes)
        return float(np.sum(w * expression(math.sqrt(theta) * z)) / math.sqrt(2.0 * math.pi))
    logz = log_normalizer(target, theta)
    if isinstance(target, GrowthModel):
        logf, lo, hi, top, peaks = _pop_setup(target, theta)

        def integrand(u):
            return expression(math.exp(u)) * math.exp(logf(u) - logz)
    else:
        def logf(y):
            return -target.h(y) / theta
        lo, hi, top, peaks = _bounds_from_grid(logf, _Y_GRID)

        def integrand(y):
            return expression(y) * math.exp(logf(y) - logz)
    val, _ = _quad(integrand, lo, hi, peaks, "expectation")
    return val
