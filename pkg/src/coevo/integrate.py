"""Time stepping of the coupled population-environment system.

The stochastic system is

    dx/dt = lam * x * h*'(y)
    dy/dt = -lam * (x h'_K(x) - theta) - gamma * h*'(y) + sqrt(2 gamma theta) xi(t)

where ``K`` may depend on ``y`` through a :class:`~coevo.models.CouplingRule`.
``x`` is advanced in log space, so it stays positive for any noise sample.
``y`` is advanced by Euler-Maruyama.  Under the default ``"trapezoidal"``
scheme the relaxation term ``-gamma h*'(y)`` is linearised and treated
half-implicitly.  For a Gaussian environment this makes the discrete
stationary variance of ``y`` exactly ``theta``, while plain Euler inflates it
by a factor ``1 / (1 - gamma dt / 2)``.  The half-implicit correction is only
applied where ``h*'' >= 0``.  With ``gamma = 0`` both schemes coincide.

Noise for run ``i`` of seed ``s`` comes from ``PCG64(SeedSequence(s,
spawn_key=(i,)))`` and is drawn in fixed-size blocks.  Block size does not
change the sequence, so a run is reproducible bit for bit.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numba
import numpy as np

from . import models as M
from .models import CouplingRule, EnvironmentModel, Fixed, GrowthModel

__all__ = [
    "SimParams", "Trajectory", "SimulationError", "SCHEMES",
    "drift", "em_step", "simulate", "ensemble", "simulate_deterministic",
    "logistic_closed_form", "gompertz_closed_form", "rng_for",
]

SCHEMES = ("trapezoidal", "euler")
_CHUNK = 1 << 16


class SimulationError(RuntimeError):
    """Raised when the state leaves the admissible region (non-finite, x <= 0)."""

    def __init__(self, step, x, y):
        super().__init__(
            f"non-finite or non-positive state at step {step} (x={x!r}, y={y!r}); "
            "try a smaller dt")
        self.step = step


@dataclass(frozen=True)
class SimParams:
    """Numerical and physical parameters of one run.

    Attributes
    ----------
    lam : coupling rate lambda (1/time), > 0
    gamma : relaxation rate (1/time), >= 0
    theta : ecological temperature, >= 0
    dt, t_max : step and horizon (time)
    seed : unsigned 64-bit seed
    x0, y0 : initial state, x0 > 0
    record_stride : keep every k-th step
    scheme : ``"trapezoidal"`` or ``"euler"``
    """

    lam: float = 1.0
    gamma: float = 50.0
    theta: float = 0.001
    dt: float = 0.001
    t_max: float = 20.0
    seed: int = 0
    x0: float = 0.01
    y0: float = 0.0
    record_stride: int = 1
    scheme: str = "trapezoidal"

    def __post_init__(self):
        def bad(name, why):
            raise ValueError(f"{name}: {why} (got {getattr(self, name)!r})")

        for name in ("lam", "gamma", "theta", "dt", "t_max", "x0", "y0"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                bad(name, "must be a finite number")
        if not self.lam > 0:
            bad("lam", "must be > 0")
        if self.gamma < 0:
            bad("gamma", "must be >= 0")
        if self.theta < 0:
            bad("theta", "must be >= 0")
        if not self.dt > 0:
            bad("dt", "must be > 0")
        if not self.t_max > 0:
            bad("t_max", "must be > 0")
        if not self.x0 > 0:
            bad("x0", "must be > 0")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) \
                or not 0 <= self.seed < 2**64:
            bad("seed", "must be an unsigned 64-bit integer")
        if isinstance(self.record_stride, bool) or not isinstance(self.record_stride, (int, np.integer)) \
                or self.record_stride < 1:
            bad("record_stride", "must be a positive integer")
        if self.dt * self.gamma >= 0.5:
            bad("dt", f"dt*gamma = {self.dt * self.gamma:g} must be < 0.5 for stable stepping")
        if self.scheme not in SCHEMES:
            bad("scheme", f"must be one of {SCHEMES}")

    @property
    def r(self):
        """Growth rate of the deterministic limit, lam**2 / gamma."""
        if self.gamma == 0:
            raise ValueError("r = lam**2/gamma is undefined for gamma = 0")
        return self.lam**2 / self.gamma

    @property
    def n_steps(self):
        return int(math.ceil(self.t_max / self.dt - 1e-9))

    def to_dict(self):
        return asdict(self)


@dataclass
class Trajectory:
    times: np.ndarray
    xs: np.ndarray
    ys: np.ndarray | None
    params: SimParams | None = None
    model: GrowthModel | None = None
    env: EnvironmentModel | None = None
    rule: CouplingRule | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def metadata(self):
        out = dict(self.meta)
        if self.params is not None:
            out["params"] = self.params.to_dict()
        for key in ("model", "env", "rule"):
            obj = getattr(self, key)
            if obj is not None:
                out[key] = obj.to_dict()
        return out


def rng_for(seed, stream=0):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))


# ---------------------------------------------------------------------------
# reference (pure Python) vector field and step


def _x_dh(model, x, K):
    if model.code == 0:
        return x / K - 1.0
    return math.log(x / K)


def drift(model, env, rule, x, y, params):
    """Deterministic part of (dx/dt, dy/dt) at state (x, y)."""
    if not x > 0:
        raise ValueError(f"x must be > 0, got {x!r}")
    K = M.effective_K(rule, y, model.K)
    dstar = env.dh(y)
    dx = params.lam * x * dstar
    dy = -params.lam * (_x_dh(model, x, K) - params.theta) - params.gamma * dstar
    return dx, dy


def em_step(state, drift_values, params, noise_sample, env=None):
    """Advance (x, y) by one step of size ``params.dt``.

    ``drift_values`` is the output of :func:`drift`.  The trapezoidal scheme
    needs ``h*''(y)`` and therefore the environment model; it defaults to
    Gaussian.
    """
    x, y = state
    dx, dy = drift_values
    p = params
    dt = p.dt
    incr = dy * dt + math.sqrt(2.0 * p.gamma * p.theta * dt) * noise_sample
    if p.scheme == "trapezoidal":
        curv = (env or M.Gaussian()).d2h(y)
        if curv > 0:
            incr /= 1.0 + 0.5 * p.gamma * dt * curv
    # dx/x = lam h*'(y): exponential map is exact for y frozen over the step
    return x * math.exp(dx / x * dt), y + incr


# ---------------------------------------------------------------------------
# compiled kernel


@numba.njit(cache=True, nogil=True)
def _kernel(x, y, noise, n, start, stride, out_x, out_y, out_i,
            model_code, K, env_code, p1, p2, rule_code, thr, base, inc,
            lam, gam, th, dt, trapezoidal):
    amp = math.sqrt(2.0 * gam * th * dt)
    half = 0.5 * gam * dt
    for i in range(n):
        if env_code == 0:
            d1 = y
            d2 = 1.0
        elif env_code == 1:
            d1 = y * (y * y - p1)
            d2 = 3.0 * y * y - p1
        else:
            d1 = p1 * y * (y - p2) * (y - 1.0)
            d2 = p1 * (3.0 * y * y - 2.0 * (1.0 + p2) * y + p2)
        Ke = K
        if rule_code == 1:
            Ke = base + inc if y >= thr else base
        if model_code == 0:
            xdh = x / Ke - 1.0
        else:
            xdh = math.log(x / Ke)
        incr = (-lam * (xdh - th) - gam * d1) * dt + amp * noise[i]
        if trapezoidal and d2 > 0.0:
            incr /= 1.0 + half * d2
        x = x * math.exp(lam * d1 * dt)
        y = y + incr
        if not (x > 0.0 and x < math.inf and y - y == 0.0):
            return x, y, out_i, start + i + 1
        if (start + i + 1) % stride == 0:
            out_x[out_i] = x
            out_y[out_i] = y
            out_i += 1
    return x, y, out_i, -1


def _kernel_args(model, env, rule):
    p1, p2 = env.params()
    if isinstance(rule, M.HeavisideShift):
        rc, thr, base, inc = 1, rule.threshold, rule.base, rule.increment
    else:
        rc, thr, base, inc = 0, 0.0, 0.0, 0.0
    return (model.code, float(model.K), env.code, p1, p2, rc, float(thr), float(base), float(inc))


def simulate(model: GrowthModel, env: EnvironmentModel, rule: CouplingRule | None,
             params: SimParams, stream: int = 0) -> Trajectory:
    """Integrate one stochastic trajectory.

    Records the initial state and every ``record_stride``-th step.  Raises
    :class:`SimulationError` with the offending step index when the state
    becomes non-finite.
    """
    rule = rule or Fixed()
    p = params
    n = p.n_steps
    stride = p.record_stride
    n_rec = n // stride + 1
    out_x = np.empty(n_rec)
    out_y = np.empty(n_rec)
    out_x[0], out_y[0] = p.x0, p.y0
    rng = rng_for(p.seed, stream)
    args = _kernel_args(model, env, rule)
    x, y, k = float(p.x0), float(p.y0), 1
    done = 0
    while done < n:
        m = min(_CHUNK, n - done)
        noise = rng.standard_normal(m)
        x, y, k, bad = _kernel(x, y, noise, m, done, stride, out_x, out_y, k,
                               *args, float(p.lam), float(p.gamma), float(p.theta),
                               float(p.dt), p.scheme == "trapezoidal")
        if bad >= 0:
            raise SimulationError(bad, x, y)
        done += m
    times = np.arange(n_rec) * (stride * p.dt)
    return Trajectory(times, out_x, out_y, p, model, env, rule,
                      meta={"stream": stream, "n_steps": n})


def ensemble(model, env, rule, params: SimParams, n_runs: int, workers: int | None = None):
    """Independent runs on streams 0..n_runs-1 of ``params.seed``.

    The kernel releases the GIL, so runs fan out over threads; results are
    returned in stream order.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    if workers == 1 or n_runs == 1:
        return [simulate(model, env, rule, params, stream=i) for i in range(n_runs)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda i: simulate(model, env, rule, params, stream=i), range(n_runs)))


# ---------------------------------------------------------------------------
# deterministic reference


def logistic_closed_form(x0, r, K, t):
    """Closed-form solution of dx/dt = r x (1 - x/K)."""
    e = np.exp(r * np.asarray(t, dtype=float))
    return K * x0 * e / (K + x0 * (e - 1.0))


def gompertz_closed_form(x0, r, K, t):
    """Closed-form solution of dx/dt = -r x ln(x/K)."""
    return K * np.exp(np.log(x0 / K) * np.exp(-r * np.asarray(t, dtype=float)))


def _rk4(f, x, dt, n):
    out = np.empty(n + 1)
    out[0] = x
    for i in range(n):
        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i + 1] = x
    return out


def simulate_deterministic(model: GrowthModel, r, K, x0, dt, t_max) -> Trajectory:
    """RK4 solution of the deterministic growth law of ``model``."""
    if not x0 > 0:
        raise ValueError("x0 must be > 0")
    n = int(math.ceil(t_max / dt - 1e-9))
    if model.code == 0:
        f = lambda x: r * x * (1.0 - x / K)  # noqa: E731
        kind = "deterministic-logistic"
    else:
        f = lambda x: -r * x * math.log(x / K)  # noqa: E731
        kind = "deterministic-gompertz"
    xs = _rk4(f, float(x0), dt, n)
    return Trajectory(np.arange(n + 1) * dt, xs, None, model=replace(model, K=K),
                      meta={"kind": kind, "r": r, "K": K, "x0": x0, "dt": dt, "t_max": t_max})
