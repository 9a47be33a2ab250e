"""Discrete-time stochastic simulation of a sensor network holding one datum.

Each node is Susceptible, Informed, Recovered or Dead and carries a battery.
Time advances in unit steps; every transition in a step is decided from the
state at the start of that step and applied at the end (synchronous update).

Informed nodes spread the datum according to a :class:`Strategy`:

``MEAN_FIELD``
    A susceptible node becomes informed with probability
    ``min(1, b * I / n)``; topology is ignored.
``K_NEIGHBOR``
    A node forwards once, in the step after it became informed, to its ``k``
    nearest live neighbours. Each susceptible recipient accepts with
    probability ``tau``.
``RANDOM_FANOUT``
    On becoming informed a node draws a fan-out ``F`` uniformly from
    ``1..k_max`` and a duration ``D`` from ``1..iter_max`` and spreads its
    ``F`` messages over ``D`` steps, nearest neighbours first.
``BATTERY_INVERSE``
    Every informed node forwards each step to its ``ceil(k * (1 - battery))``
    nearest live neighbours.

Informed nodes leave for R with probability ``c`` per step. The death wiring
follows the ODE variant: ``DEATH_SITUATION2`` moves dying susceptibles into R
(R holds exhausted nodes), ``DEATH_SITUATIONS13`` moves dying S and R nodes
(probability ``m``) and dying I nodes (``m_prime``) into Dead. Independently of
the variant, a node whose battery runs out is Dead.
"""

from __future__ import annotations

import dataclasses
import io
import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path

import numpy as np

from datasurv.errors import InvalidParameterError
from datasurv.model import ModelVariant
from datasurv.topology import Topology, build_topology

ABM_CSV_HEADER = ("t", "s", "i", "r", "dead", "mean_battery")
SUMMARY_FIELDS = (
    "axis", "value", "seed", "peak_i", "t_peak",
    "final_s", "final_i", "final_r", "final_dead", "final_mean_battery",
)
# batteries at or below this are empty (absorbs accumulated rounding of the costs)
EMPTY_BATTERY = 1e-12


class Compartment(IntEnum):
    S = 0
    I = 1  # noqa: E741
    R = 2
    DEAD = 3


class Strategy(str, Enum):
    MEAN_FIELD = "mean-field"
    K_NEIGHBOR = "k-neighbor"
    RANDOM_FANOUT = "random-fanout"
    BATTERY_INVERSE = "battery-inverse"

    @classmethod
    def parse(cls, value) -> "Strategy":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        try:
            return cls(key)
        except ValueError:
            choices = ", ".join(v.value for v in cls)
            raise InvalidParameterError("strategy.kind", f"unknown strategy {value!r} (choose from {choices})") from None


def _check_number(name, value, *, lo=None, hi=None, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
        raise InvalidParameterError(name, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise InvalidParameterError(name, f"expected an integer, got {value!r}")
    if not np.isfinite(value):
        raise InvalidParameterError(name, f"must be finite, got {value!r}")
    if lo is not None and value < lo:
        raise InvalidParameterError(name, f"must be >= {lo}, got {value!r}")
    if hi is not None and value > hi:
        raise InvalidParameterError(name, f"must be <= {hi}, got {value!r}")


@dataclass(frozen=True)
class StrategyConfig:
    kind: Strategy = Strategy.MEAN_FIELD
    k: int = 4
    k_max: int = 8
    iter_max: int = 5
    tx_cost: float = 0.01
    idle_cost: float = 0.001
    tau: float = 1.0
    initial_battery: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Strategy.parse(self.kind))
        for name in ("k", "k_max", "iter_max"):
            _check_number(f"strategy.{name}", getattr(self, name), lo=1, integer=True)
            object.__setattr__(self, name, int(getattr(self, name)))
        for name in ("tx_cost", "idle_cost"):
            _check_number(f"strategy.{name}", getattr(self, name), lo=0)
        _check_number("strategy.tau", self.tau, lo=0, hi=1)
        _check_number("strategy.initial_battery", self.initial_battery, lo=0, hi=1)
        if self.initial_battery <= 0:
            raise InvalidParameterError("strategy.initial_battery", "must be > 0")
        for name in ("tx_cost", "idle_cost", "tau", "initial_battery"):
            object.__setattr__(self, name, float(getattr(self, name)))

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["kind"] = self.kind.value
        return out


@dataclass(frozen=True)
class AbmConfig:
    """One stochastic run. ``b``, ``c``, ``m``, ``m_prime`` are per-step probabilities
    (``b`` is in the fraction convention and may exceed 1; the infection
    probability is clamped)."""

    n: int = 10_000
    init_i_fraction: float = 0.1
    b: float = 0.5
    c: float = 0.1
    m: float = 0.0
    m_prime: float = 0.0
    t_steps: int = 30
    seed: int = 0
    strategy: StrategyConfig = field(default_factory=StrategyConfig)
    variant: ModelVariant = ModelVariant.CLASSIC
    k_topology: int = 8

    def __post_init__(self):
        _check_number("n", self.n, lo=1, integer=True)
        _check_number("t_steps", self.t_steps, lo=0, integer=True)
        _check_number("seed", self.seed, lo=0, integer=True)
        _check_number("k_topology", self.k_topology, lo=1, integer=True)
        for name in ("n", "t_steps", "seed", "k_topology"):
            object.__setattr__(self, name, int(getattr(self, name)))
        _check_number("init_i_fraction", self.init_i_fraction, lo=0, hi=1)
        _check_number("b", self.b, lo=0)
        for name in ("c", "m", "m_prime"):
            _check_number(name, getattr(self, name), lo=0, hi=1)
        for name in ("init_i_fraction", "b", "c", "m", "m_prime"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if isinstance(self.strategy, dict):
            object.__setattr__(self, "strategy", StrategyConfig(**self.strategy))
        variant = ModelVariant.parse(self.variant)
        if variant is ModelVariant.BIRTH_DEATH:
            raise InvalidParameterError("variant", "birth-death has no node-level simulation")
        object.__setattr__(self, "variant", variant)
        if self.strategy.kind is not Strategy.MEAN_FIELD and self.n < self.k_topology + 1:
            raise InvalidParameterError("n", f"network strategies need n >= k_topology + 1 = {self.k_topology + 1}")

    @property
    def n_initial_informed(self) -> int:
        return int(round(self.init_i_fraction * self.n))

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        out["strategy"] = self.strategy.to_dict()
        out["variant"] = self.variant.value
        return out

    def with_value(self, name: str, value) -> "AbmConfig":
        """Copy with one numeric field replaced; strategy fields are addressed by bare name."""
        own = {f.name for f in dataclasses.fields(self)} - {"strategy", "variant"}
        strat = {f.name for f in dataclasses.fields(StrategyConfig)} - {"kind"}
        key = name.removeprefix("strategy.")
        if name in own:
            return dataclasses.replace(self, **{name: value})
        if key in strat:
            return dataclasses.replace(self, strategy=dataclasses.replace(self.strategy, **{key: value}))
        raise InvalidParameterError("axis", f"unknown or non-numeric config field {name!r}")


@dataclass(frozen=True)
class Node:
    id: int
    compartment: Compartment
    battery: float
    position: tuple[float, float] | None


@dataclass(eq=False)
class AbmState:
    """Per-node arrays for one run. ``step`` never mutates its input."""

    t: int
    compartment: np.ndarray
    battery: np.ndarray
    transmissions: np.ndarray
    topology: Topology | None = None
    pending: np.ndarray | None = None
    fanout: np.ndarray | None = None
    duration: np.ndarray | None = None
    elapsed: np.ndarray | None = None
    sent: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.compartment)

    def counts(self) -> tuple[int, int, int, int]:
        c = np.bincount(self.compartment, minlength=4)
        return int(c[0]), int(c[1]), int(c[2]), int(c[3])

    def node(self, v: int) -> Node:
        pos = None if self.topology is None else tuple(float(x) for x in self.topology.positions[v])
        return Node(int(v), Compartment(int(self.compartment[v])), float(self.battery[v]), pos)

    def copy(self) -> "AbmState":
        kw = {}
        for f in dataclasses.fields(self):
            val = getattr(self, f.name)
            kw[f.name] = val.copy() if isinstance(val, np.ndarray) else val
        return AbmState(**kw)


def _draw_fanout(state: AbmState, nodes: np.ndarray, strategy: StrategyConfig, rng) -> None:
    state.fanout[nodes] = rng.integers(1, strategy.k_max + 1, size=len(nodes))
    state.duration[nodes] = rng.integers(1, strategy.iter_max + 1, size=len(nodes))
    state.elapsed[nodes] = 0
    state.sent[nodes] = 0


def initial_state(config: AbmConfig, rng: np.random.Generator, topology: Topology | None = None) -> AbmState:
    """Seeded initial assignment: exactly ``round(init_i_fraction * n)`` informed nodes."""
    n = config.n
    comp = np.full(n, Compartment.S, dtype=np.int8)
    informed = np.sort(rng.permutation(n)[: config.n_initial_informed])
    comp[informed] = Compartment.I
    state = AbmState(
        t=0,
        compartment=comp,
        battery=np.full(n, config.strategy.initial_battery),
        transmissions=np.zeros(n, dtype=np.int64),
        topology=topology,
    )
    kind = config.strategy.kind
    if kind is Strategy.K_NEIGHBOR:
        state.pending = comp == Compartment.I
    elif kind is Strategy.RANDOM_FANOUT:
        for name in ("fanout", "duration", "elapsed", "sent"):
            setattr(state, name, np.zeros(n, dtype=np.int64))
        _draw_fanout(state, informed, config.strategy, rng)
    return state


def _powered(comp: np.ndarray, variant: ModelVariant) -> np.ndarray:
    """Nodes that are alive: not Dead, and not in R when R holds exhausted nodes."""
    alive = comp != Compartment.DEAD
    if variant is ModelVariant.DEATH_SITUATION2:
        alive &= comp != Compartment.R
    return alive


def _send(topology: Topology, senders, lo, hi, alive):
    """Pick recipients ranked ``lo+1 .. hi`` among each sender's live neighbours."""
    nb = topology.neighbors[senders]
    valid = nb >= 0
    valid[valid] = alive[nb[valid]]
    rank = np.cumsum(valid, axis=1)
    sel = valid & (rank > lo[:, None]) & (rank <= hi[:, None])
    return nb[sel], sel.sum(axis=1)


def step(state: AbmState, config: AbmConfig, rng: np.random.Generator) -> AbmState:
    """Advance one synchronous time step and return the new state."""
    strat = config.strategy
    kind = strat.kind
    variant = config.variant
    comp0 = state.compartment
    n = len(comp0)
    is_s = comp0 == Compartment.S
    is_i = comp0 == Compartment.I
    is_r = comp0 == Compartment.R
    powered = _powered(comp0, variant)
    new = state.copy()
    new.t = state.t + 1

    u = rng.random(n)
    msgs = np.zeros(n, dtype=np.int64)
    hit = np.zeros(n, dtype=bool)

    if kind is Strategy.MEAN_FIELD:
        p_inf = min(1.0, config.b * int(is_i.sum()) / n)
        msgs[is_i] = 1
    else:
        p_inf = 0.0
        topo = state.topology
        if kind is Strategy.K_NEIGHBOR:
            senders = np.flatnonzero(is_i & state.pending)
            lo = np.zeros(len(senders), dtype=np.int64)
            hi = np.full(len(senders), strat.k, dtype=np.int64)
        elif kind is Strategy.BATTERY_INVERSE:
            senders = np.flatnonzero(is_i)
            lo = np.zeros(len(senders), dtype=np.int64)
            hi = np.ceil(strat.k * (1.0 - state.battery[senders])).astype(np.int64)
        else:
            senders = np.flatnonzero(is_i & (state.elapsed < state.duration))
            f, d, e = state.fanout[senders], state.duration[senders], state.elapsed[senders]
            lo = state.sent[senders]
            hi = lo + f // d + (e < f % d)
        recipients, per_sender = _send(topo, senders, lo, hi, powered)
        msgs[senders] = per_sender
        accepted = rng.random(len(recipients)) < strat.tau
        targets = recipients[accepted]
        hit[targets[comp0[targets] == Compartment.S]] = True
        if kind is Strategy.K_NEIGHBOR:
            new.pending[:] = False
        elif kind is Strategy.RANDOM_FANOUT:
            new.sent[senders] += per_sender
            new.elapsed[senders] += 1

    comp = new.compartment
    m, mp, c = config.m, config.m_prime, config.c
    if variant is ModelVariant.CLASSIC:
        s_die = np.zeros(n, dtype=bool)
        i_die = np.zeros(n, dtype=bool)
        i_rec = is_i & (u < c)
        r_die = s_die
    elif variant is ModelVariant.DEATH_SITUATION2:
        s_die = is_s & (u < m)
        i_die = np.zeros(n, dtype=bool)
        i_rec = is_i & (u < c)
        r_die = i_die
    else:
        s_die = is_s & (u < m)
        i_die = is_i & (u < mp)
        i_rec = is_i & ~i_die & (u < mp + (1.0 - mp) * c)
        r_die = is_r & (u < m)

    if kind is Strategy.MEAN_FIELD:
        threshold = m + (1.0 - m) * p_inf if variant is not ModelVariant.CLASSIC else p_inf
        s_inf = is_s & ~s_die & (u < threshold)
    else:
        s_inf = is_s & ~s_die & hit

    comp[s_inf] = Compartment.I
    comp[i_rec] = Compartment.R
    comp[i_die | r_die] = Compartment.DEAD
    comp[s_die] = Compartment.R if variant is ModelVariant.DEATH_SITUATION2 else Compartment.DEAD

    cost = np.where(powered, strat.idle_cost, 0.0) + strat.tx_cost * msgs
    battery = state.battery - cost
    empty = powered & (battery <= EMPTY_BATTERY)
    battery[empty] = 0.0
    comp[empty] = Compartment.DEAD
    new.battery = battery
    new.transmissions = state.transmissions + msgs

    newly = np.flatnonzero(s_inf & ~empty)
    if kind is Strategy.K_NEIGHBOR:
        new.pending[newly] = True
    elif kind is Strategy.RANDOM_FANOUT:
        _draw_fanout(new, newly, strat, rng)
    return new


@dataclass(frozen=True, eq=False)
class AbmResult:
    t: np.ndarray
    s: np.ndarray
    i: np.ndarray
    r: np.ndarray
    dead: np.ndarray
    mean_battery: np.ndarray
    config: AbmConfig
    final_battery: np.ndarray | None = None
    transmissions: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.t)

    @property
    def seed(self) -> int:
        return self.config.seed

    def peak(self) -> tuple[int, int]:
        """``(t_peak, i_peak)``, earliest step on ties."""
        k = int(np.argmax(self.i))
        return int(self.t[k]), int(self.i[k])

    def summary(self) -> dict:
        t_peak, i_peak = self.peak()
        return {
            "peak_i": i_peak,
            "t_peak": t_peak,
            "final_s": int(self.s[-1]),
            "final_i": int(self.i[-1]),
            "final_r": int(self.r[-1]),
            "final_dead": int(self.dead[-1]),
            "final_mean_battery": float(self.mean_battery[-1]),
        }

    def to_csv(self, dest=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(ABM_CSV_HEADER)
        cols = (self.t, self.s, self.i, self.r, self.dead)
        for row in zip(*(c.tolist() for c in cols), self.mean_battery.tolist()):
            w.writerow([*row[:5], repr(float(row[5]))])
        text = buf.getvalue()
        if dest is not None:
            if hasattr(dest, "write"):
                dest.write(text)
            else:
                Path(dest).write_text(text)
        return text


def run(config: AbmConfig) -> AbmResult:
    """Simulate ``config.t_steps`` steps; deterministic in ``config`` (seed included)."""
    topo_seq, dyn_seq = np.random.SeedSequence(config.seed).spawn(2)
    topology = None
    if config.strategy.kind is not Strategy.MEAN_FIELD:
        topology = build_topology(config.n, config.k_topology, topo_seq)
    rng = np.random.default_rng(dyn_seq)
    state = initial_state(config, rng, topology)

    rows = np.zeros((config.t_steps + 1, 5), dtype=np.int64)
    battery = np.zeros(config.t_steps + 1)
    rows[0] = (0, *state.counts())
    battery[0] = state.battery.mean()
    for k in range(1, config.t_steps + 1):
        state = step(state, config, rng)
        rows[k] = (k, *state.counts())
        battery[k] = state.battery.mean()
    return AbmResult(
        t=rows[:, 0], s=rows[:, 1], i=rows[:, 2], r=rows[:, 3], dead=rows[:, 4],
        mean_battery=battery, config=config,
        final_battery=state.battery, transmissions=state.transmissions,
    )


def _run_summary(config: AbmConfig) -> dict:
    return run(config).summary()


@dataclass(frozen=True)
class SweepTable:
    axis: str
    rows: list = field(default_factory=list)

    def per_seed(self) -> list[dict]:
        return [r for r in self.rows if r["seed"] != -1]

    def aggregates(self) -> list[dict]:
        return [r for r in self.rows if r["seed"] == -1]

    def to_csv(self, dest=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SUMMARY_FIELDS)
        for row in self.rows:
            w.writerow([row["axis"], _fmt(row["value"]), row["seed"], *(_fmt(row[k]) for k in SUMMARY_FIELDS[3:])])
        text = buf.getvalue()
        if dest is not None:
            if hasattr(dest, "write"):
                dest.write(text)
            else:
                Path(dest).write_text(text)
        return text


def _fmt(x):
    if isinstance(x, tuple):
        return ":".join(_fmt(v) for v in x)
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def sweep(base: AbmConfig, axis: str, values, seeds: int, workers: int = 1) -> SweepTable:
    """Run every (value, seed) cell and summarise.

    ``axis`` names one numeric config field, or several joined by commas
    (``"b,c"``) in which case each value is a tuple swept jointly.

    Seeds are ``base.seed, base.seed + 1, ...``. Rows come out ordered by
    (value, seed) whatever ``workers`` is; after each value's per-seed rows an
    aggregate row with ``seed = -1`` holds the means.
    """
    if seeds < 1:
        raise InvalidParameterError("seeds", f"must be >= 1, got {seeds!r}")
    values = list(values)
    names = [a.strip() for a in axis.split(",")]
    configs = []
    for v in values:
        vals = v if len(names) > 1 else (v,)
        if len(vals) != len(names):
            raise InvalidParameterError("values", f"{v!r} does not match axis {axis!r}")
        cfg = base
        for name, val in zip(names, vals):
            cfg = cfg.with_value(name, val)
        configs.extend(cfg.with_value("seed", base.seed + j) for j in range(seeds))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(_run_summary, configs))
    else:
        summaries = [_run_summary(cfg) for cfg in configs]

    rows = []
    for vi, value in enumerate(values):
        block = summaries[vi * seeds : (vi + 1) * seeds]
        for j, summ in enumerate(block):
            rows.append({"axis": axis, "value": value, "seed": base.seed + j, **summ})
        agg = {key: float(np.mean([s[key] for s in block])) for key in block[0]}
        rows.append({"axis": axis, "value": value, "seed": -1, **agg})
    return SweepTable(axis=axis, rows=rows)


def mean_trajectory(base: AbmConfig, seeds: int, workers: int = 1) -> dict[str, np.ndarray]:
    """Seed-averaged compartment counts over ``base.seed .. base.seed + seeds - 1``."""
    configs = [base.with_value("seed", base.seed + j) for j in range(seeds)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, configs))
    else:
        results = [run(cfg) for cfg in configs]
    out = {"t": results[0].t.astype(float)}
    for name in ("s", "i", "r", "dead", "mean_battery"):
        out[name] = np.mean([getattr(res, name) for res in results], axis=0)
    out["peak_i"] = np.array([res.i.max() for res in results], dtype=float)
    return out
