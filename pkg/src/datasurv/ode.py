"""Fixed-step RK4 integration of the compartmental models.

Every step is followed by clamping negative components to zero. Clamps larger
than ``CLAMP_WARN`` emit a :class:`ClampWarning`; anything non-finite raises
:class:`~datasurv.errors.DivergenceError`.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from datasurv.errors import DivergenceError, InvalidParameterError, InvalidStateError
from datasurv.model import CompartmentState, ModelParams, ModelVariant, check_variant, rhs

DEFAULT_DT = 0.01
CLAMP_WARN = 1e-6
CSV_HEADER = ("t", "s", "i", "r")


class ClampWarning(RuntimeWarning):
    """A component went noticeably negative and was clamped to zero."""


def n_steps(t_end: float, dt: float) -> int:
    """Number of whole steps of size ``dt`` that fit in ``t_end``.

    A relative slack of 1e-9 keeps e.g. ``0.3 / 0.1`` at 3 instead of 2.
    """
    if not (math.isfinite(dt) and dt > 0):
        raise InvalidParameterError("dt", f"must be finite and > 0, got {dt!r}")
    if not (math.isfinite(t_end) and t_end >= 0):
        raise InvalidParameterError("t_end", f"must be finite and >= 0, got {t_end!r}")
    return int(math.floor(t_end / dt * (1 + 1e-9)))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Samples of (S, I, R) on a uniform time grid starting at t = 0."""

    t: np.ndarray
    s: np.ndarray
    i: np.ndarray
    r: np.ndarray
    variant: ModelVariant = ModelVariant.CLASSIC
    params: ModelParams | None = None
    dt: float = DEFAULT_DT
    t_end: float = 0.0
    max_clamp: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        lengths = {len(self.t), len(self.s), len(self.i), len(self.r)}
        if len(lengths) != 1:
            raise ValueError(f"component arrays differ in length: {sorted(lengths)}")
        for name in ("t", "s", "i", "r"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, k: int) -> CompartmentState:
        return CompartmentState(float(self.s[k]), float(self.i[k]), float(self.r[k]), float(self.t[k]))

    @property
    def total(self) -> np.ndarray:
        return self.s + self.i + self.r

    def to_csv(self, dest=None) -> str:
        """Write ``t,s,i,r`` rows with round-trip float formatting.

        Returns the CSV text; also writes it to ``dest`` (path or file) when given.
        """
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in zip(self.t.tolist(), self.s.tolist(), self.i.tolist(), self.r.tolist()):
            writer.writerow([repr(x) for x in row])
        text = buf.getvalue()
        if dest is not None:
            if hasattr(dest, "write"):
                dest.write(text)
            else:
                Path(dest).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "Trajectory":
        if hasattr(source, "read"):
            text = source.read()
        else:
            text = Path(source).read_text()
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise ValueError(f"unexpected header {header!r}")
        rows = [[float(x) for x in row] for row in reader if row]
        arr = np.array(rows, dtype=float).reshape(-1, 4)
        dt = float(arr[1, 0] - arr[0, 0]) if len(arr) > 1 else DEFAULT_DT
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], dt=dt, t_end=float(arr[-1, 0]) if len(arr) else 0.0)


def _clamp(x: float) -> tuple[float, float]:
    if x < 0.0:
        return 0.0, -x
    return x, 0.0


def integrate(
    variant: ModelVariant | str,
    params: ModelParams,
    init: CompartmentState,
    t_end: float,
    dt: float = DEFAULT_DT,
) -> Trajectory:
    """Integrate ``variant`` from ``init`` over ``[0, t_end]`` with classic RK4.

    The trajectory holds ``floor(t_end / dt) + 1`` samples at ``t = k * dt``.
    ``t_end = 0`` returns just the initial condition.
    """
    variant = ModelVariant.parse(variant)
    init.validate()
    check_variant(variant, params)
    steps = n_steps(t_end, dt)

    b, c, m, mp, l = params.b, params.c, params.m, params.m_prime, params.l
    half = 0.5 * dt
    sixth = dt / 6.0
    s, i, r = init.s, init.i, init.r
    ss = [s]
    ii = [i]
    rr = [r]
    max_clamp = 0.0
    isfinite = math.isfinite
    for k in range(1, steps + 1):
        a1, a2, a3 = rhs(variant, b, c, m, mp, l, s, i, r)
        b1, b2, b3 = rhs(variant, b, c, m, mp, l, s + half * a1, i + half * a2, r + half * a3)
        c1, c2, c3 = rhs(variant, b, c, m, mp, l, s + half * b1, i + half * b2, r + half * b3)
        d1, d2, d3 = rhs(variant, b, c, m, mp, l, s + dt * c1, i + dt * c2, r + dt * c3)
        s = s + sixth * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
        i = i + sixth * (a2 + 2.0 * b2 + 2.0 * c2 + d2)
        r = r + sixth * (a3 + 2.0 * b3 + 2.0 * c3 + d3)
        if not (isfinite(s) and isfinite(i) and isfinite(r)):
            raise DivergenceError(k * dt)
        if s < 0.0 or i < 0.0 or r < 0.0:
            s, e1 = _clamp(s)
            i, e2 = _clamp(i)
            r, e3 = _clamp(r)
            max_clamp = max(max_clamp, e1, e2, e3)
        ss.append(s)
        ii.append(i)
        rr.append(r)

    if max_clamp > CLAMP_WARN:
        warnings.warn(f"clamped a negative component of magnitude {max_clamp:.3g}", ClampWarning, stacklevel=2)
    t = np.arange(steps + 1, dtype=float) * dt
    return Trajectory(
        t, np.array(ss), np.array(ii), np.array(rr),
        variant=variant, params=params, dt=float(dt), t_end=float(t_end), max_clamp=max_clamp,
    )


@dataclass(frozen=True, eq=False)
class BatchResult:
    """Output of :func:`integrate_batch`.

    ``history`` maps each kept component name to an array of shape
    ``(n_samples, batch)``; ``final`` has shape ``(3, batch)``.
    """

    t: np.ndarray
    history: dict
    final: np.ndarray
    max_clamp: float


def integrate_batch(
    variant: ModelVariant | str,
    b,
    c,
    s0,
    i0,
    r0=0.0,
    *,
    m=0.0,
    m_prime=0.0,
    l=0.0,
    t_end: float,
    dt: float = DEFAULT_DT,
    keep: tuple[str, ...] = ("s", "i", "r"),
) -> BatchResult:
    """Vectorised RK4 over many parameter sets / initial conditions at once.

    All array arguments broadcast to a common 1-d batch shape. The arithmetic
    matches :func:`integrate` operation for operation, so each column equals
    the corresponding scalar run.
    """
    variant = ModelVariant.parse(variant)
    arrays = np.broadcast_arrays(*(np.atleast_1d(np.asarray(x, dtype=float)) for x in (b, c, m, m_prime, l, s0, i0, r0)))
    b, c, m, mp, l, s, i, r = (np.array(a, dtype=float) for a in arrays)
    if b.ndim != 1:
        raise ValueError("batch arguments must broadcast to one dimension")
    for name, arr in zip(("b", "c", "m", "m_prime", "l"), (b, c, m, mp, l)):
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise InvalidParameterError(name, "must be finite and >= 0")
    for name, arr in zip(("s", "i", "r"), (s, i, r)):
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise InvalidStateError(f"initial {name} must be finite and >= 0")
    for name in keep:
        if name not in ("s", "i", "r"):
            raise ValueError(f"unknown component {name!r}")

    steps = n_steps(t_end, dt)
    half = 0.5 * dt
    sixth = dt / 6.0
    hist = {name: np.empty((steps + 1, b.size)) for name in keep}
    cur = {"s": s, "i": i, "r": r}
    for name in keep:
        hist[name][0] = cur[name]
    max_clamp = 0.0
    for k in range(1, steps + 1):
        a1, a2, a3 = rhs(variant, b, c, m, mp, l, s, i, r)
        b1, b2, b3 = rhs(variant, b, c, m, mp, l, s + half * a1, i + half * a2, r + half * a3)
        c1, c2, c3 = rhs(variant, b, c, m, mp, l, s + half * b1, i + half * b2, r + half * b3)
        d1, d2, d3 = rhs(variant, b, c, m, mp, l, s + dt * c1, i + dt * c2, r + dt * c3)
        s = s + sixth * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
        i = i + sixth * (a2 + 2.0 * b2 + 2.0 * c2 + d2)
        r = r + sixth * (a3 + 2.0 * b3 + 2.0 * c3 + d3)
        lowest = min(s.min(), i.min(), r.min())
        if not math.isfinite(lowest) or not math.isfinite(max(s.max(), i.max(), r.max())):
            raise DivergenceError(k * dt)
        if lowest < 0.0:
            max_clamp = max(max_clamp, -lowest)
            s = np.where(s < 0.0, 0.0, s)
            i = np.where(i < 0.0, 0.0, i)
            r = np.where(r < 0.0, 0.0, r)
        if keep:
            cur = {"s": s, "i": i, "r": r}
            for name in keep:
                hist[name][k] = cur[name]

    if max_clamp > CLAMP_WARN:
        warnings.warn(f"clamped a negative component of magnitude {max_clamp:.3g}", ClampWarning, stacklevel=2)
    t = np.arange(steps + 1, dtype=float) * dt
    return BatchResult(t=t, history=hist, final=np.vstack([s, i, r]), max_clamp=max_clamp)


def peak_informed(traj: Trajectory) -> tuple[float, float]:
    """``(t_peak, i_peak)``: the maximum of I, earliest sample on ties."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    k = int(np.argmax(traj.i))
    return float(traj.t[k]), float(traj.i[k])


def final_state(traj: Trajectory) -> CompartmentState:
    if len(traj) == 0:
        raise ValueError("empty trajectory has no final state")
    return traj[-1]
