"""Explicit desk-scale values for the constants of the asymptotic argument.

The proofs only fix an ordering between constants, never their values, so
every threshold used by the library is read from a :class:`DeskParams`
instance and recorded in the outputs that depend on it.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from fractions import Fraction

_RATIONALS = ("gamma", "epsilon", "eta", "rho", "alpha", "beta")


def _frac(value) -> Fraction:
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


@dataclass(frozen=True)
class DeskParams:
    gamma: Fraction = Fraction(1, 20)
    epsilon: Fraction = Fraction(1, 100)
    eta: Fraction = Fraction(1, 100)
    rho: Fraction = Fraction(1, 10)
    alpha: Fraction = Fraction(1, 50)
    beta: Fraction = Fraction(1, 20)
    c: int = 4
    # None means "derive from n": ceil(eta * n^3)
    tau_connectors: int | None = None
    seed: int = 0
    # test-family size for the absorbing builder; all 4-sets are used below this
    absorb_family_cap: int = 600

    def __post_init__(self) -> None:
        for name in _RATIONALS:
            value = _frac(getattr(self, name))
            if not 0 < value < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {value}")
            object.__setattr__(self, name, value)
        if self.c < 1:
            raise ValueError(f"c must be a positive integer, got {self.c}")
        if self.tau_connectors is not None and self.tau_connectors < 0:
            raise ValueError("tau_connectors must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def tau(self, n: int, c: int = 1) -> int:
        """Connector-count threshold for closeness at length ``c``.

        Length 1 uses ``tau_connectors`` (default ceil(eta n^3)). Each further
        length divides by C(4c+3, 4), the most ways a (4c+3)-set splits into a
        length-c connector plus one extra 4-set; this keeps closeness
        monotone under connector extension.
        """
        base = self.tau_connectors
        if base is None:
            base = math.ceil(self.eta * n**3)
        tau = max(base, 1)
        for k in range(1, c):
            tau = max(1, -(-tau // math.comb(4 * k + 3, 4)))
        return tau

    @property
    def gamma_chain(self) -> tuple[Fraction, Fraction, Fraction]:
        cap = Fraction(99, 100)
        return self.gamma, min(4 * self.gamma, cap), min(16 * self.gamma, cap)

    def with_(self, **changes) -> "DeskParams":
        return replace(self, **changes)

    def to_json(self) -> dict:
        out = asdict(self)
        for name in _RATIONALS:
            out[name] = str(out[name])
        return out
