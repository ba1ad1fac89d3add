"""Named experiment presets and their orchestration."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import integrate, verify
from .integrate import SimParams, Trajectory
from .models import (AsymmetricBimodal, CouplingRule, EnvironmentModel, Fixed, Gaussian,
                     Gompertz, GrowthModel, HeavisideShift, Logistic, SymmetricBimodal,
                     effective_K, from_dict)

__all__ = ["ScenarioSpec", "ScenarioReport", "PRESETS", "preset", "run_scenario",
           "detect_transitions", "windowed_means"]


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    model: GrowthModel
    env: EnvironmentModel
    rule: CouplingRule
    params: SimParams
    comparison: str = "none"          # none | deterministic-logistic | deterministic-gompertz
    n_runs: int = 1
    transient: float = 0.0            # time excluded from comparison/summary checks
    density: bool = False             # compare the x-histogram with the invariant density

    def with_overrides(self, **params):
        """New spec with ``SimParams`` fields replaced; the preset is untouched."""
        return replace(self, params=replace(self.params, **params))

    def to_dict(self):
        return {"name": self.name, "model": self.model.to_dict(), "env": self.env.to_dict(),
                "rule": self.rule.to_dict(), "params": self.params.to_dict(),
                "comparison": self.comparison, "n_runs": self.n_runs,
                "transient": self.transient, "density": self.density}

    @classmethod
    def from_dict(cls, d):
        return cls(name=d["name"], model=from_dict(d["model"]), env=from_dict(d["env"]),
                   rule=from_dict(d["rule"]), params=SimParams(**d["params"]),
                   comparison=d["comparison"], n_runs=d["n_runs"], transient=d["transient"],
                   density=d["density"])


@dataclass
class ScenarioReport:
    spec: ScenarioSpec
    trajectories: list
    comparison: Trajectory | None = None
    density: verify.DensityReport | None = None
    transitions: list = field(default_factory=list)     # per trajectory: [(time, +1/-1), ...]
    window_means: list = field(default_factory=list)    # per trajectory: array of window means
    summary: dict = field(default_factory=dict)

    @property
    def mean_x(self):
        return np.mean([t.xs for t in self.trajectories], axis=0)


def _fig1(theta):
    return SimParams(lam=1.0, gamma=50.0, theta=theta, dt=0.001, t_max=500.0,
                     x0=0.01, y0=0.0, record_stride=10)


_S50 = math.sqrt(50.0)

PRESETS = {
    "fig1a": ScenarioSpec("fig1a", Logistic(1.0), Gaussian(), Fixed(), _fig1(0.001),
                          "deterministic-logistic", n_runs=10, transient=5.0),
    "fig1b": ScenarioSpec("fig1b", Logistic(1.0), Gaussian(), Fixed(), _fig1(0.005),
                          "deterministic-logistic", n_runs=10, transient=5.0),
    "fig2": ScenarioSpec("fig2", Logistic(1.0), Gaussian(), Fixed(),
                         replace(_fig1(0.5), t_max=1e4), density=True),
    "fig3": ScenarioSpec("fig3", Logistic(1.0), SymmetricBimodal(0.5), Fixed(),
                         SimParams(lam=_S50, gamma=50.0, theta=0.01, dt=0.001, t_max=200.0,
                                   x0=1.0, y0=0.0, record_stride=10), transient=10.0),
    "fig3-coupled": ScenarioSpec("fig3-coupled", Logistic(1.0), SymmetricBimodal(0.5),
                                 HeavisideShift(0.0),
                                 SimParams(lam=_S50, gamma=50.0, theta=0.01, dt=0.001, t_max=200.0,
                                           x0=1.0, y0=0.0, record_stride=10), transient=10.0),
    "fig4": ScenarioSpec("fig4", Logistic(1.0), AsymmetricBimodal(4.0, 0.25), Fixed(),
                         SimParams(lam=_S50, gamma=50.0, theta=0.001, dt=0.001, t_max=1e4,
                                   x0=1.0, y0=0.0, record_stride=10)),
    "fig4-coupled": ScenarioSpec("fig4-coupled", Logistic(1.0), AsymmetricBimodal(4.0, 0.25),
                                 HeavisideShift(0.25),
                                 SimParams(lam=_S50, gamma=50.0, theta=0.001, dt=0.001, t_max=1e4,
                                           x0=1.0, y0=0.0, record_stride=10)),
    "gompertz": ScenarioSpec("gompertz", Gompertz(1.0), Gaussian(), Fixed(), _fig1(0.001),
                             "deterministic-gompertz", n_runs=10, transient=5.0),
}


def preset(name: str) -> ScenarioSpec:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None


def windowed_means(traj: Trajectory, n_windows=10):
    """Means of x over ``n_windows`` disjoint windows covering the run."""
    return np.array([w.mean() for w in np.array_split(traj.xs, n_windows)])


def detect_transitions(traj: Trajectory, low=1.2, high=1.8, window=5.0):
    """Hysteresis detector on the trailing windowed mean of x.

    An upward event fires when the mean rises above ``high`` after having
    been below ``low``; downward events are symmetric.  Event times are the
    centres of the triggering windows.
    """
    if not high > low:
        raise ValueError("high must exceed low")
    t = np.asarray(traj.times)
    dt = t[1] - t[0]
    w = int(round(window / dt))
    if w < 1 or w > t.size:
        raise ValueError(f"window {window} is longer than the trajectory ({t[-1] - t[0]:g})")
    c = np.concatenate(([0.0], np.cumsum(traj.xs)))
    mean = (c[w:] - c[:-w]) / w
    centre = t[w - 1:] - 0.5 * (w - 1) * dt
    below = np.nonzero(mean < low)[0]
    above = np.nonzero(mean > high)[0]

    def first(idx, i):
        j = np.searchsorted(idx, i)
        return int(idx[j]) if j < idx.size else None

    events = []
    up, dn = first(above, 0), first(below, 0)
    if up is None and dn is None:
        return events
    # initial state is whichever band the mean enters first
    state, i = (1, up) if dn is None or (up is not None and up < dn) else (-1, dn)
    while True:
        i = first(below if state == 1 else above, i)
        if i is None:
            return events
        state = -state
        events.append((float(centre[i]), state))


def run_scenario(spec: ScenarioSpec, seed: int | None = None, workers: int | None = None) -> ScenarioReport:
    if seed is not None:
        spec = spec.with_overrides(seed=seed)
    p = spec.params
    trajs = integrate.ensemble(spec.model, spec.env, spec.rule, p, spec.n_runs, workers=workers)
    report = ScenarioReport(spec, trajs)
    if spec.comparison != "none":
        t = trajs[0].times
        K = spec.model.K
        if spec.comparison == "deterministic-logistic":
            ref = integrate.logistic_closed_form(p.x0, p.r, K, t)
        else:
            ref = integrate.gompertz_closed_form(p.x0, p.r, K, t)
        report.comparison = Trajectory(t, ref, None, model=spec.model,
                                       meta={"kind": spec.comparison, "r": p.r})
        late = t > spec.transient
        report.summary["sup_gap"] = (float(np.max(np.abs(report.mean_x[late] - ref[late])))
                                     if late.any() else None)
    if spec.density:
        report.density = verify.compare_density(trajs[0].xs, spec.model, p.theta)
        report.summary["l1_distance"] = report.density.l1_distance
        report.summary["ks_distance"] = report.density.ks_distance
    if isinstance(spec.env, (SymmetricBimodal, AsymmetricBimodal)):
        report.transitions = [detect_transitions(tr) for tr in trajs]
        report.summary["n_transitions"] = [len(e) for e in report.transitions]
        late = trajs[0].times > spec.transient
        report.summary["sync_fraction"] = [
            float(np.mean(np.abs(tr.xs[late] - effective_K(spec.rule, tr.ys[late], spec.model.K)) < 0.3))
            if late.any() else None for tr in trajs]
    report.window_means = [windowed_means(tr) for tr in trajs]
    report.summary["final_window_mean"] = [float(w[-1]) for w in report.window_means]
    report.summary["min_x"] = float(min(tr.xs.min() for tr in trajs))
    return report
