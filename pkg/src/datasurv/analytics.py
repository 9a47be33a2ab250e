"""Closed-form thresholds, peaks, floors and equilibria."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from datasurv.errors import InvalidParameterError, UndefinedThresholdError
from datasurv.model import ModelParams, ModelVariant

# Reproduction numbers within this relative distance of 1 count as "<= 1", so a
# grid cell like b*s0 == c is not flipped by a last-bit rounding error.
THRESHOLD_RTOL = 1e-12


class Outcome(str, Enum):
    DECAY = "decay"
    EPIDEMIC = "epidemic"
    ENDEMIC = "endemic"


@dataclass(frozen=True)
class OutcomeReport:
    r0: float
    re: float
    outcome: Outcome
    i_max: float | None = None
    s_floor: float | None = None
    equilibrium: tuple[float, float, float] | None = None

    def to_dict(self) -> dict:
        out = {"r0": self.r0, "re": self.re, "outcome": self.outcome.value}
        if self.i_max is not None:
            out["i_max"] = self.i_max
        if self.s_floor is not None:
            out["s_floor"] = self.s_floor
        if self.equilibrium is not None:
            out["equilibrium"] = list(self.equilibrium)
        return out


def basic_reproduction_number(variant: ModelVariant | str, params: ModelParams) -> float:
    """R0: ``beta / c``, or ``b*l / (m*(c+m))`` for the birth-death model."""
    variant = ModelVariant.parse(variant)
    if variant is ModelVariant.BIRTH_DEATH:
        if params.m <= 0:
            raise UndefinedThresholdError("birth-death R0 needs m > 0")
        denom = params.m * (params.c + params.m)
        return params.b * params.l / denom
    if params.c <= 0:
        raise UndefinedThresholdError("R0 needs c > 0")
    return params.beta / params.c


def effective_reproduction_number(params: ModelParams, s0: float, n: float) -> float:
    """Re = S(0) * beta / (N * c)."""
    if params.c <= 0:
        raise UndefinedThresholdError("Re needs c > 0")
    if n <= 0:
        raise InvalidParameterError("n", f"must be > 0, got {n!r}")
    if s0 < 0:
        raise InvalidParameterError("s0", f"must be >= 0, got {s0!r}")
    return s0 * params.beta / (n * params.c)


def max_informed(params: ModelParams, s0: float, i0: float) -> float:
    """Peak of I for the classic model starting from ``(s0, i0)``.

    I is largest when S has fallen to ``c/b``. If ``s0`` already sits at or
    below that level I only decreases and the peak is ``i0``.
    """
    b, c = params.b, params.c
    if b <= 0:
        raise UndefinedThresholdError("max_informed needs b > 0")
    if s0 < 0 or i0 < 0:
        raise InvalidParameterError("s0" if s0 < 0 else "i0", "must be >= 0")
    if c == 0:
        return i0 + s0
    rho = c / b
    if s0 <= rho:
        return i0
    return i0 + s0 - rho * math.log(s0) - rho * (1.0 - math.log(rho))


def susceptible_floor(params: ModelParams, s0: float, variant: ModelVariant | str = ModelVariant.CLASSIC) -> float:
    """Lower bound ``s0 * exp(-R0)`` on the susceptible pool left at the end."""
    if s0 < 0:
        raise InvalidParameterError("s0", f"must be >= 0, got {s0!r}")
    return s0 * math.exp(-basic_reproduction_number(variant, params))


def conserved_quantity(params: ModelParams, s: float, i: float) -> float:
    """``s + i - (c/b) ln s``, constant along classic trajectories."""
    if s <= 0:
        raise InvalidParameterError("s", f"log domain needs s > 0, got {s!r}")
    if params.c == 0:
        return s + i
    if params.b <= 0:
        raise UndefinedThresholdError("conserved quantity needs b > 0 when c > 0")
    return s + i - (params.c / params.b) * math.log(s)


def endemic_equilibrium(params: ModelParams) -> tuple[float, float, float]:
    """Steady state of the birth-death model.

    Returns the endemic point when it has I > 0 and the information-free point
    ``(l/m, 0, 0)`` otherwise.
    """
    b, c, m, l = params.b, params.c, params.m, params.l
    if m <= 0:
        raise UndefinedThresholdError("no finite equilibrium when m = 0")
    numer = b * l - m * (c + m)
    if numer <= 0 or b <= 0:
        return (l / m, 0.0, 0.0)
    s_star = (c + m) / b
    i_star = numer / (b * (c + m))
    return (s_star, i_star, c * i_star / m)


def classify_outcome(
    variant: ModelVariant | str, params: ModelParams, s0: float, i0: float, n: float | None = None
) -> OutcomeReport:
    """Decide whether the datum dies out, spreads then dies, or persists.

    ``n`` is the population the initial state is measured against; it defaults
    to ``params.n_total``.
    """
    variant = ModelVariant.parse(variant)
    n = params.n_total if n is None else n
    if n <= 0:
        raise InvalidParameterError("n", f"must be > 0, got {n!r}")
    r0 = basic_reproduction_number(variant, params)

    if variant is ModelVariant.BIRTH_DEATH:
        re = r0 * s0 / n
        eq = endemic_equilibrium(params)
        outcome = Outcome.ENDEMIC if r0 > 1 + THRESHOLD_RTOL else Outcome.DECAY
        return OutcomeReport(r0=r0, re=re, outcome=outcome, equilibrium=eq)

    re = effective_reproduction_number(params, s0, n)
    outcome = Outcome.EPIDEMIC if re > 1 + THRESHOLD_RTOL else Outcome.DECAY
    i_max = s_floor = None
    if variant is ModelVariant.CLASSIC:
        if params.b > 0:
            i_max = max_informed(params, s0, i0)
        s_floor = susceptible_floor(params, s0)
    return OutcomeReport(r0=r0, re=re, outcome=outcome, i_max=i_max, s_floor=s_floor)
