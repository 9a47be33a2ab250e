"""Parameters, states and vector fields of the four compartmental models.

The compartments are S (susceptible: live nodes without the datum),
I (informed: nodes holding and forwarding it) and R. What R means depends on
the deployment being modelled; the dynamics are identical in all three:

* compromised nodes whose copy was destroyed by an attacker,
* nodes whose battery was emptied by forwarding,
* live nodes that stopped forwarding to preserve energy.

``ModelVariant`` selects the right-hand side:

=====================  ==============================================
``CLASSIC``            S' = -bIS,         I' = bIS - cI,      R' = cI
``DEATH_SITUATION2``   S' = -bIS - mS,    I' = bIS - cI,      R' = cI + mS
``DEATH_SITUATIONS13`` S' = -bIS - mS,    I' = bIS - cI - m'I, R' = cI - mR
``BIRTH_DEATH``        S' = l - bIS - mS, I' = bIS - cI - mI,  R' = cI - mR
=====================  ==============================================

``b`` acts directly on whatever magnitudes are stored. When states are
fractions of the network, pass the per-fraction contact rate; when they are
node counts, pass ``beta / N`` (see :func:`ModelParams.from_beta`).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

from datasurv.errors import InvalidParameterError, InvalidStateError


class ModelVariant(str, Enum):
    CLASSIC = "classic"
    DEATH_SITUATION2 = "death-s2"
    DEATH_SITUATIONS13 = "death-s13"
    BIRTH_DEATH = "birth-death"

    @classmethod
    def parse(cls, value: "ModelVariant | str") -> "ModelVariant":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {
            "situation2": cls.DEATH_SITUATION2,
            "s2": cls.DEATH_SITUATION2,
            "situations13": cls.DEATH_SITUATIONS13,
            "s13": cls.DEATH_SITUATIONS13,
            "birthdeath": cls.BIRTH_DEATH,
        }
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            choices = ", ".join(v.value for v in cls)
            raise InvalidParameterError("variant", f"unknown variant {value!r} (choose from {choices})") from None


@dataclass(frozen=True)
class ModelParams:
    """Rate constants shared by all variants.

    Parameters
    ----------
    b : float
        Contact rate, already scaled to the stored magnitudes.
    c : float
        Rate of leaving I for R (compromise or exhaustion). ``1 / c`` is the
        expected survival time of one stored copy.
    m : float
        Natural death rate of S (and of R, and of I under birth-death).
    m_prime : float
        Death rate of I under ``DEATH_SITUATIONS13``.
    l : float
        Inflow of newly connected nodes into S (birth-death only).
    n_total : float
        Population size, or 1.0 when working in fractions.
    """

    b: float
    c: float
    m: float = 0.0
    m_prime: float = 0.0
    l: float = 0.0
    n_total: float = 1.0

    def __post_init__(self):
        for name in ("b", "c", "m", "m_prime", "l", "n_total"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise InvalidParameterError(name, f"expected a number, got {value!r}")
            if not math.isfinite(value):
                raise InvalidParameterError(name, f"must be finite, got {value!r}")
            if value < 0:
                raise InvalidParameterError(name, f"must be >= 0, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.n_total <= 0:
            raise InvalidParameterError("n_total", f"must be > 0, got {self.n_total!r}")

    @classmethod
    def from_beta(cls, beta: float, c: float, n_total: float, **rates) -> "ModelParams":
        """Build count-convention parameters from an unscaled rate ``beta`` (b = beta / N)."""
        if n_total <= 0:
            raise InvalidParameterError("n_total", f"must be > 0, got {n_total!r}")
        return cls(b=beta / n_total, c=c, n_total=n_total, **rates)

    @property
    def beta(self) -> float:
        """Unscaled contact rate ``b * n_total``."""
        return self.b * self.n_total


def check_variant(variant: ModelVariant, params: ModelParams) -> None:
    """Warn about parameter combinations the model does not expect."""
    if variant is ModelVariant.DEATH_SITUATIONS13 and params.m_prime < params.m:
        warnings.warn(
            f"m_prime={params.m_prime} is below m={params.m}; informed nodes are "
            "expected to die at least as fast as idle ones",
            RuntimeWarning,
            stacklevel=2,
        )


@dataclass(frozen=True)
class CompartmentState:
    """Sizes of S, I and R at time ``t`` (counts or fractions)."""

    s: float
    i: float
    r: float
    t: float = 0.0

    def validate(self) -> "CompartmentState":
        for name in ("s", "i", "r", "t"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidStateError(f"{name} must be finite, got {value!r}")
        for name in ("s", "i", "r"):
            if getattr(self, name) < 0:
                raise InvalidStateError(f"{name} must be >= 0, got {getattr(self, name)!r}")
        return self

    @property
    def total(self) -> float:
        return self.s + self.i + self.r

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.s, self.i, self.r)


def rhs(variant: ModelVariant, b, c, m, m_prime, l, s, i, r):
    """Unchecked vector field.

    Works on floats and, element-wise, on numpy arrays of matching shapes;
    the integrators rely on both paths performing the same float operations.
    """
    bis = b * i * s
    ci = c * i
    if variant is ModelVariant.CLASSIC:
        return -bis, bis - ci, ci
    if variant is ModelVariant.DEATH_SITUATION2:
        ms = m * s
        return -bis - ms, bis - ci, ci + ms
    if variant is ModelVariant.DEATH_SITUATIONS13:
        return -bis - m * s, bis - ci - m_prime * i, ci - m * r
    if variant is ModelVariant.BIRTH_DEATH:
        return l - bis - m * s, bis - ci - m * i, ci - m * r
    raise InvalidParameterError("variant", f"unsupported variant {variant!r}")


def derivative(
    variant: ModelVariant | str, params: ModelParams, state: CompartmentState
) -> tuple[float, float, float]:
    """Return ``(dS/dt, dI/dt, dR/dt)`` of the selected system at ``state``."""
    variant = ModelVariant.parse(variant)
    state.validate()
    return rhs(variant, params.b, params.c, params.m, params.m_prime, params.l, state.s, state.i, state.r)
