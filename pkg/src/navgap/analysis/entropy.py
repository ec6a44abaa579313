"""Entropy bookkeeping for a finite Markov chain X -> Y -> Z (all in nats)."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

SUM_TOL = 1e-12
MARKOV_TOL = 1e-9


class NotMarkovError(ValueError):
    def __init__(self, violation: float):
        super().__init__(f"joint table does not factor as p(x)p(y|x)p(z|y): max violation {violation:.3e}")
        self.violation = violation


@dataclass(frozen=True)
class EntropyReport:
    H_Z_given_X: float
    H_Z_given_Y: float
    H_Y_given_X: float
    H_Y: float
    H_Z: float
    I_ZY: float
    log_card_Z: float

    @property
    def bound_rhs(self) -> float:
        return self.log_card_Z - self.I_ZY + self.H_Y

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bound_rhs"] = self.bound_rhs
        return d


def _h(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def _h_cond(p_ab: np.ndarray, p_a: np.ndarray) -> float:
    # H(B|A) = -sum p(a,b) log p(b|a); every term is >= 0 since p(a,b) <= p(a)
    mask = p_ab > 0
    den = np.broadcast_to(p_a[:, None], p_ab.shape)
    return float(-(p_ab[mask] * np.log(p_ab[mask] / den[mask])).sum())


def markov_violation(joint: np.ndarray) -> float:
    p_xy = joint.sum(axis=2)
    p_yz = joint.sum(axis=0)
    p_y = p_xy.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        expected = np.where(p_y[None, :, None] > 0,
                            p_xy[:, :, None] * p_yz[None, :, :] / p_y[None, :, None], 0.0)
    return float(np.abs(joint - expected).max())


def markov_chain_report(joint) -> EntropyReport:
    """All entropies of a joint table ``p[x, y, z]`` by exhaustive summation.

    The table must sum to one and factor as p(x) p(y|x) p(z|y); both are
    checked, not assumed.
    """
    p = np.asarray(joint, dtype=np.float64)
    if p.ndim != 3:
        raise ValueError("joint table must be 3-D, indexed [x, y, z]")
    if (p < 0).any():
        raise ValueError("joint table has negative entries")
    if abs(p.sum() - 1.0) > SUM_TOL:
        raise ValueError(f"joint table sums to {p.sum()!r}, not 1")
    v = markov_violation(p)
    if v > MARKOV_TOL:
        raise NotMarkovError(v)
    p_x = p.sum(axis=(1, 2))
    p_y = p.sum(axis=(0, 2))
    p_z = p.sum(axis=(0, 1))
    p_xy = p.sum(axis=2)
    p_xz = p.sum(axis=1)
    p_yz = p.sum(axis=0)
    H_Y, H_Z = _h(p_y), _h(p_z)
    H_Z_Y = _h_cond(p_yz, p_y)
    return EntropyReport(
        H_Z_given_X=_h_cond(p_xz, p_x),
        H_Z_given_Y=H_Z_Y,
        H_Y_given_X=_h_cond(p_xy, p_x),
        H_Y=H_Y,
        H_Z=H_Z,
        I_ZY=max(0.0, H_Z - H_Z_Y),
        log_card_Z=math.log(p.shape[2]),
    )
