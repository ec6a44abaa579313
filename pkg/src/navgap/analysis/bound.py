"""Target-error bound for a hypothesis trained on the source domain."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class BoundInputs:
    eps_s_hat: float
    d_a: float
    lam: float = 0.0
    d: int = 1
    m: int = 1
    m_prime: int = 2
    delta: float = 0.05

    def validate(self) -> None:
        if not 0.0 <= self.eps_s_hat <= 1.0:
            raise ValueError("eps_s_hat must lie in [0, 1]")
        if not 0.0 <= self.d_a <= 2.0:
            raise ValueError("d_a must lie in [0, 2]")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.d < 1:
            raise ValueError("VC dimension d must be >= 1")
        if self.m < self.d:
            raise ValueError("need m >= d labeled source samples")
        if self.m_prime < 2:
            raise ValueError("need m_prime >= 2 unlabeled samples per domain")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> "BoundInputs":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown bound inputs: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


@dataclass(frozen=True)
class BoundTerms:
    eps_s_hat: float
    d_a: float
    lam: float
    source_complexity: float
    divergence_complexity: float

    @property
    def total(self) -> float:
        return self.eps_s_hat + self.d_a + self.lam + self.source_complexity + self.divergence_complexity


def bound_terms(inp: BoundInputs) -> BoundTerms:
    inp.validate()
    d, m, mp, delta = inp.d, inp.m, inp.m_prime, inp.delta
    src = (4.0 / m) * math.sqrt(d * math.log(2.0 * math.e * m / d) + math.log(4.0 / delta))
    div = 4.0 * math.sqrt((d * math.log(2.0 * mp) + math.log(4.0 / delta)) / mp)
    return BoundTerms(inp.eps_s_hat, inp.d_a, inp.lam, src, div)


def generalization_bound(inp: BoundInputs) -> float:
    """eps_S + d_A + lambda + (4/m) sqrt(d ln(2em/d) + ln(4/delta)) + 4 sqrt((d ln(2m') + ln(4/delta)) / m')."""
    return bound_terms(inp).total
