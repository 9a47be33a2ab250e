"""Exit criteria. Each test records one PASS/FAIL line, listed after the run."""

import time

import numpy as np
import pytest

from datasurv import abm, experiments
from datasurv.abm import AbmConfig, Strategy, StrategyConfig
from datasurv.analytics import Outcome, classify_outcome, conserved_quantity, endemic_equilibrium, max_informed
from datasurv.cli import reproduce, run_command
from datasurv.io_config import OdeRunConfig
from datasurv.model import CompartmentState, ModelParams
from datasurv.ode import integrate, integrate_batch

GRID = np.round(np.arange(1, 19) * 0.05, 10)
S0, I0 = 0.9, 0.1
INIT = CompartmentState(S0, I0, 0.0)


@pytest.fixture(scope="module")
def grid_run():
    b, c = (x.ravel() for x in np.meshgrid(GRID, GRID, indexing="ij"))
    start = time.perf_counter()
    res = integrate_batch("classic", b, c, S0, I0, 0.0, t_end=200.0, dt=0.01, keep=("i",))
    elapsed = time.perf_counter() - start
    return b, c, res, elapsed


def test_threshold_law(grid_run, criterion):
    b, c, res, elapsed = grid_run
    start = time.perf_counter()
    i = res.history["i"]
    mismatches = []
    for j in range(b.size):
        report = classify_outcome("classic", ModelParams(b=b[j], c=c[j]), S0, I0, 1.0)
        col = i[:, j]
        non_increasing = bool(np.all(np.diff(col) <= 1e-9))
        k = int(np.argmax(col))
        interior_peak = 0 < k < len(col) - 1
        if report.outcome is Outcome.DECAY:
            ok = non_increasing and not interior_peak
        else:
            ok = interior_peak and not non_increasing
        if not ok:
            mismatches.append((b[j], c[j], report.outcome.value))
    total = elapsed + time.perf_counter() - start
    ok = criterion(1, "threshold law", not mismatches and total < 30,
                   f"({b.size - len(mismatches)}/{b.size} cells agree, {total:.1f}s)")
    assert ok, mismatches[:5]


def test_peak_formula(grid_run, criterion):
    b, c, res, _ = grid_run
    i = res.history["i"]
    worst = 0.0
    cells = 0
    for j in range(b.size):
        if S0 >= c[j] / b[j]:
            cells += 1
            worst = max(worst, abs(max_informed(ModelParams(b=b[j], c=c[j]), S0, I0) - i[:, j].max()))
    assert criterion(2, "peak formula", worst < 1e-3, f"(max error {worst:.2e} over {cells} cells)")


def test_susceptible_floor(criterion):
    b, c = (x.ravel() for x in np.meshgrid(GRID, GRID, indexing="ij"))
    res = integrate_batch("classic", b, c, S0, I0, 0.0, t_end=500.0, dt=0.01, keep=())
    floor = S0 * np.exp(-b / c)
    margin = res.final[0] - (floor - 1e-9)
    assert criterion(3, "susceptible floor", bool(np.all(margin >= 0)), f"(min margin {margin.min():.3e})")


def test_conserved_quantity(criterion):
    p = ModelParams(b=0.4, c=0.15)
    traj = integrate("classic", p, INIT, 100.0, 0.01)
    f = np.array([conserved_quantity(p, s, i) for s, i in zip(traj.s, traj.i)])
    drift = float(np.max(np.abs(f - f[0])) / abs(f[0]))
    assert criterion(4, "conserved quantity", drift < 1e-6, f"(relative drift {drift:.2e})")


def test_conservation_and_leak(criterion):
    p = ModelParams(b=0.4, c=0.15, m=0.01, m_prime=0.02)
    worst = 0.0
    for variant in ("classic", "death-s2"):
        traj = integrate(variant, p, INIT, 1000.0, 0.01)
        worst = max(worst, float(np.max(np.abs(traj.total - 1.0))))
    leak = integrate("death-s13", p, INIT, 200.0, 0.01).total
    strictly_down = bool(np.all(np.diff(leak) < 0))
    assert criterion(5, "conservation & leak", worst < 1e-9 and strictly_down,
                     f"(max drift {worst:.2e}, death-s13 strictly decreasing={strictly_down})")


def test_endemic_persistence(criterion):
    start = time.perf_counter()
    p = ModelParams(b=0.4, c=0.15, m=0.01, l=0.015)
    eq = np.array(endemic_equilibrium(p))
    assert eq == pytest.approx([0.4, 0.06875, 1.03125])
    traj = integrate("birth-death", p, INIT, 5000.0, 0.01)
    last = np.array([traj.s[-1], traj.i[-1], traj.r[-1]])
    rel = float(np.max(np.abs(last - eq) / eq))

    l_half = 0.5 * 0.01 * 0.16 / 0.4
    dying = integrate("birth-death", ModelParams(b=0.4, c=0.15, m=0.01, l=l_half), INIT, 5000.0, 0.01)
    elapsed = time.perf_counter() - start
    ok = rel < 0.01 and dying.i[-1] < 1e-6 and elapsed < 10
    assert criterion(6, "endemic persistence", ok,
                     f"(rel dev {rel:.2e}, R0=0.5 final i {dying.i[-1]:.1e}, {elapsed:.1f}s)")


def test_stochastic_split(criterion):
    start = time.perf_counter()
    sub = abm.mean_trajectory(AbmConfig(b=0.001, c=0.9), 32)
    sup = abm.mean_trajectory(AbmConfig(b=0.5, c=0.1), 32)
    elapsed = time.perf_counter() - start
    initial = 1000
    sub_peak, sup_peak = sub["peak_i"].mean(), sup["peak_i"].mean()
    ok = sub_peak <= initial and sup_peak >= 3 * initial and elapsed < 60
    assert criterion(7, "stochastic split", ok,
                     f"(mean peaks {sub_peak:.0f} / {sup_peak:.0f} vs initial {initial}, {elapsed:.1f}s)")


def test_mean_field_fidelity(criterion):
    devs = {}
    for b, c in ((0.5, 0.1), (0.2, 0.15)):
        devs[(b, c)] = experiments.compare(AbmConfig(b=b, c=c), seeds=32).metrics()["peak_rel_dev"]
    ok = all(d < 0.10 for d in devs.values())
    detail = ", ".join(f"{k}: {v:.1%}" for k, v in devs.items())
    assert criterion(8, "mean-field fidelity", ok, f"({detail})")


def test_k_tradeoff(criterion):
    base = AbmConfig(c=0.1, strategy=StrategyConfig(kind=Strategy.K_NEIGHBOR))
    agg = abm.sweep(base, "k", [1, 2, 4, 8], 16).aggregates()
    peaks = [r["peak_i"] for r in agg]
    battery = [r["final_mean_battery"] for r in agg]
    ordered = all(a <= b for a, b in zip(peaks, peaks[1:])) and all(a >= b for a, b in zip(battery, battery[1:]))

    inv = abm.mean_trajectory(AbmConfig(c=0.1, strategy=StrategyConfig(kind=Strategy.BATTERY_INVERSE)), 16)
    i_peak = inv["i"].max()
    drop = 1.0 - inv["i"][-1] / i_peak
    rises = int(np.argmax(inv["i"])) > 0
    ok = ordered and rises and drop >= 0.30
    assert criterion(9, "k trade-off", ok,
                     f"(peaks {[round(p) for p in peaks]}, battery {[round(x, 4) for x in battery]}, "
                     f"battery-inverse drop {drop:.0%})")


def test_integrator_order(criterion):
    p = ModelParams(b=0.4, c=0.15)
    ref = integrate("classic", p, INIT, 20.0, 0.2 / 16)
    coarse = integrate("classic", p, INIT, 20.0, 0.4)
    fine = integrate("classic", p, INIT, 20.0, 0.2)
    e1 = max(abs(coarse.s[-1] - ref.s[-1]), abs(coarse.i[-1] - ref.i[-1]))
    e2 = max(abs(fine.s[-1] - ref.s[-1]), abs(fine.i[-1] - ref.i[-1]))
    ratio = e1 / e2
    assert criterion(10, "integrator order", 8 <= ratio <= 32, f"(error ratio {ratio:.2f})")


def test_determinism(tmp_path, criterion):
    ode_cfg = OdeRunConfig(b=0.4, c=0.15, t_end=50.0)
    abm_cfg = AbmConfig(n=2000, seed=3, strategy=StrategyConfig(kind=Strategy.RANDOM_FANOUT))
    jobs = [
        ("ode", ode_cfg, {}),
        ("abm", abm_cfg, {}),
        ("sweep", AbmConfig(n=2000, seed=1, strategy=StrategyConfig(kind=Strategy.K_NEIGHBOR)),
         {"axis": "k", "values": [1, 4], "seeds": 3, "workers": 2}),
        ("compare", AbmConfig(n=2000, b=0.5, c=0.1), {"seeds": 4, "dt": 0.01, "workers": 2}),
        ("repro", None, {"preset": "fig12", "seed": 0}),
    ]
    identical = True
    for idx, (cmd, cfg, args) in enumerate(jobs):
        first = tmp_path / f"{idx}-a"
        paths, _ = run_command(cmd, cfg, args, first)
        second = tmp_path / f"{idx}-b"
        reproduce(first / "manifest.json", second)
        for p in paths:
            if p.suffix == ".csv":
                identical &= p.read_bytes() == (second / p.name).read_bytes()
    assert criterion(11, "determinism", identical, f"({len(jobs)} commands re-run from manifests)")


def test_repro_presets_fast(tmp_path):
    for name in experiments.PRESETS:
        start = time.perf_counter()
        run_command("repro", None, {"preset": name, "seed": 0}, tmp_path / name)
        assert time.perf_counter() - start < 60, name
