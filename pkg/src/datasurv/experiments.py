"""ODE-vs-ABM comparison, phase portraits and the named figure presets."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from datasurv import abm
from datasurv.abm import AbmConfig, Strategy, StrategyConfig
from datasurv.errors import InvalidParameterError
from datasurv.io_config import OdeRunConfig
from datasurv.model import CompartmentState, ModelParams, ModelVariant
from datasurv.ode import integrate, integrate_batch


def _write(text: str, dest) -> str:
    if dest is not None:
        if hasattr(dest, "write"):
            dest.write(text)
        else:
            Path(dest).write_text(text)
    return text


@dataclass(frozen=True, eq=False)
class Comparison:
    """ODE and seed-averaged ABM fractions on the ABM's integer time grid."""

    t: np.ndarray
    ode: dict
    abm: dict
    seeds: int

    @property
    def ode_peak(self) -> float:
        return float(self.ode["i"].max())

    @property
    def abm_peak(self) -> float:
        return float(self.abm["i"].max())

    def metrics(self) -> dict:
        ode_i, abm_i = self.ode["i"], self.abm["i"]
        pos = ode_i > 0
        rel = np.abs(abm_i[pos] - ode_i[pos]) / ode_i[pos]
        return {
            "ode_peak_i": self.ode_peak,
            "abm_peak_i": self.abm_peak,
            "peak_rel_dev": abs(self.abm_peak - self.ode_peak) / self.ode_peak if self.ode_peak > 0 else 0.0,
            "max_rel_dev": float(rel.max()) if rel.size else 0.0,
            "max_abs_dev": float(np.abs(abm_i - ode_i).max()),
            "final_abs_dev": float(abs(abm_i[-1] - ode_i[-1])),
            "seeds": self.seeds,
        }

    def to_csv(self, dest=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "ode_s", "ode_i", "ode_r", "abm_s", "abm_i", "abm_r", "abm_dead"])
        cols = [self.t, self.ode["s"], self.ode["i"], self.ode["r"],
                self.abm["s"], self.abm["i"], self.abm["r"], self.abm["dead"]]
        for row in zip(*(c.tolist() for c in cols)):
            w.writerow([repr(float(x)) for x in row])
        return _write(buf.getvalue(), dest)


def compare(base: AbmConfig, seeds: int = 32, dt: float = 0.01, workers: int = 1) -> Comparison:
    """Average ``seeds`` mean-field runs and integrate the matching ODE in fractions."""
    if base.strategy.kind is not Strategy.MEAN_FIELD:
        raise InvalidParameterError("strategy.kind", "compare needs the mean-field strategy")
    stride = round(1.0 / dt)
    if stride < 1 or abs(stride * dt - 1.0) > 1e-9:
        raise InvalidParameterError("dt", f"1/dt must be a whole number, got dt={dt!r}")
    mean = abm.mean_trajectory(base, seeds, workers=workers)
    n = base.n
    params = ModelParams(b=base.b, c=base.c, m=base.m, m_prime=base.m_prime)
    i0 = base.n_initial_informed / n
    traj = integrate(base.variant, params, CompartmentState(1.0 - i0, i0, 0.0), base.t_steps, dt)
    ode = {k: getattr(traj, k)[::stride].copy() for k in ("s", "i", "r")}
    frac = {k: mean[k] / n for k in ("s", "i", "r", "dead")}
    return Comparison(t=mean["t"], ode=ode, abm=frac, seeds=seeds)


@dataclass(frozen=True, eq=False)
class PhasePortrait:
    """A fan of (s, i) curves, one per initial condition."""

    curves: list = field(default_factory=list)

    def to_csv(self, dest=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["curve", "t", "s", "i"])
        for idx, (t, s, i) in enumerate(self.curves):
            for row in zip(t.tolist(), s.tolist(), i.tolist()):
                w.writerow([idx, *(repr(x) for x in row)])
        return _write(buf.getvalue(), dest)


def phase_portrait(
    variant: ModelVariant | str,
    params: ModelParams,
    s0_values,
    t_end: float = 100.0,
    dt: float = 0.01,
    every: int = 10,
) -> PhasePortrait:
    """Trajectories started on the line ``s + i = 1``, sampled every ``every`` steps."""
    s0 = np.asarray(s0_values, dtype=float)
    res = integrate_batch(
        variant, params.b, params.c, s0, 1.0 - s0, 0.0,
        m=params.m, m_prime=params.m_prime, l=params.l, t_end=t_end, dt=dt, keep=("s", "i"),
    )
    t = res.t[::every]
    curves = [(t, res.history["s"][::every, j], res.history["i"][::every, j]) for j in range(s0.size)]
    return PhasePortrait(curves)


PHASE_S0 = (0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99)
# Death rates for the death-variant presets; m' >= m as the model expects.
DEFAULT_M = 0.01
DEFAULT_M_PRIME = 0.02


def _ode(cfg: OdeRunConfig):
    return integrate(cfg.variant, cfg.params(), cfg.initial_state(), cfg.t_end, cfg.dt)


def _fig2(seed):
    cfg = OdeRunConfig(variant="classic", b=0.4, c=0.15, s0=0.9, i0=0.1, t_end=100.0, seed=seed)
    return {"fig2.csv": _ode(cfg)}, {"fig2": cfg}


def _fig3(seed):
    params = ModelParams(b=0.4, c=0.15)
    return {"fig3_phase.csv": phase_portrait("classic", params, PHASE_S0)}, {"params": _params_dict(params)}


def _fig5(seed):
    params = ModelParams(b=0.4, c=0.15, m=DEFAULT_M, m_prime=DEFAULT_M_PRIME)
    out = {
        "fig5_s2_phase.csv": phase_portrait("death-s2", params, PHASE_S0, t_end=200.0),
        "fig5_s13_phase.csv": phase_portrait("death-s13", params, PHASE_S0, t_end=200.0),
    }
    return out, {"params": _params_dict(params)}


def _fig6(seed):
    cfg = OdeRunConfig(variant="death-s13", b=0.4, c=0.15, m=DEFAULT_M, m_prime=DEFAULT_M_PRIME,
                       s0=0.9, i0=0.1, t_end=200.0, seed=seed)
    return {"fig6.csv": _ode(cfg)}, {"fig6": cfg}


def _fig8(seed):
    cfg = OdeRunConfig(variant="birth-death", b=0.4, c=0.15, m=0.01, l=0.015,
                       s0=0.9, i0=0.1, t_end=2000.0, dt=0.05, seed=seed)
    return {"fig8.csv": _ode(cfg)}, {"fig8": cfg}


def _abm_runs(configs: dict):
    results = {f"{name}.csv": abm.run(cfg) for name, cfg in configs.items()}
    return results, configs


def _fig9a(seed):
    return _abm_runs({"fig9a": AbmConfig(b=0.001, c=0.9, seed=seed)})


def _fig9b(seed):
    return _abm_runs({"fig9b": AbmConfig(b=0.5, c=0.1, seed=seed)})


def _fig10(seed):
    return _abm_runs({
        "fig10_s2": AbmConfig(b=0.2, c=0.15, m=DEFAULT_M, variant="death-s2", seed=seed),
        "fig10_s13": AbmConfig(b=0.23, c=0.01, m=DEFAULT_M, m_prime=DEFAULT_M_PRIME, variant="death-s13", seed=seed),
    })


def _fig11(seed):
    return _abm_runs({
        f"fig11_k{k}": AbmConfig(c=0.1, seed=seed, strategy=StrategyConfig(kind=Strategy.K_NEIGHBOR, k=k))
        for k in (1, 4)
    })


def _fig12(seed):
    return _abm_runs({
        "fig12a_random": AbmConfig(c=0.1, seed=seed, strategy=StrategyConfig(kind=Strategy.RANDOM_FANOUT)),
        "fig12b_battery": AbmConfig(c=0.1, seed=seed, strategy=StrategyConfig(kind=Strategy.BATTERY_INVERSE)),
    })


def _params_dict(params: ModelParams) -> dict:
    return {k: getattr(params, k) for k in ("b", "c", "m", "m_prime", "l", "n_total")}


PRESETS = {
    "fig2": ("classic SIR time series, b=0.4 c=0.15", _fig2),
    "fig3": ("classic phase portrait, b=0.4 c=0.15", _fig3),
    "fig5": ("phase portraits with natural death, m=0.01", _fig5),
    "fig6": ("situations 1&3 time series with death rates", _fig6),
    "fig8": ("birth-death endemic run, R0=3.75", _fig8),
    "fig9a": ("mean-field ABM, subcritical (0.001, 0.9)", _fig9a),
    "fig9b": ("mean-field ABM, supercritical (0.5, 0.1)", _fig9b),
    "fig10": ("mean-field ABM with death wiring", _fig10),
    "fig11": ("k-neighbour forwarding, k=1 and k=4", _fig11),
    "fig12": ("random fan-out and battery-inverse forwarding", _fig12),
}


def run_preset(name: str, seed: int = 0):
    """Return ``(results, configs)`` for a preset; ``results`` maps file names to results."""
    try:
        _, fn = PRESETS[name]
    except KeyError:
        raise InvalidParameterError("preset", f"unknown preset {name!r} (choose from {', '.join(PRESETS)})") from None
    results, configs = fn(seed)
    return results, {k: (v.to_dict() if hasattr(v, "to_dict") else v) for k, v in configs.items()}
