"""Monte Carlo verification of the supervision-SNR improvement guarantees.

The substitution target (y + x_hat)/2 carries error (n + e)/2. With
||e|| = delta * ||n|| and delta < 1, the triangle inequality forces
SNR((y + x_hat)/2) >= 2/(1 + delta) * SNR(y) > SNR(y), with equality in the
bound exactly when e is a positive multiple of n. The lab samples error
directions and checks both facts numerically, plus the exact worst/best
cases and the monotone-improvement sequence for shrinking error norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imaging import Prng
from .metrics import snr

_BOUND_RTOL = 1e-12


@dataclass
class TheoremTrial:
    """One sampled (x, n, e) triple with its SNR outcome."""

    delta: float
    snr_y: float
    snr_y_next: float
    bound: float

    @property
    def ratio(self) -> float:
        return self.snr_y_next / self.snr_y


@dataclass
class Theorem1Report:
    delta: float
    dim: int
    trials: int
    seed: int
    all_hold: bool
    min_ratio: float
    bound_violations: int
    improvement_violations: int
    min_bound_margin: float  # min over trials of SNR(y_next) / bound; 1.0 = tight


@dataclass
class RemarkReport:
    dim: int
    seed: int
    worst_case_ratio: float
    best_case_ratio: float
    worst_exact: bool
    best_exact: bool


@dataclass
class CorollaryReport:
    deltas: list[float]
    dim: int
    seed: int
    monotone: bool
    snr_sequence: list[float]
    monotone_rate: float = 1.0
    aligned: bool = True


def _check_delta(delta: float) -> None:
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


def _unit_trial(rng: Prng, dim: int, delta: float) -> TheoremTrial:
    x = rng.normals(dim)
    n = rng.normals(dim)
    e = rng.normals(dim)
    e *= delta * np.linalg.norm(n) / np.linalg.norm(e)
    snr_y = snr(x, n)
    snr_next = snr(x, (n + e) / 2.0)
    return TheoremTrial(delta=delta, snr_y=snr_y, snr_y_next=snr_next,
                        bound=2.0 / (1.0 + delta) * snr_y)


def run_theorem1(dim: int, delta: float, trials: int, seed: int) -> Theorem1Report:
    """Sample random error directions at fixed ||e||/||n|| and check both claims."""
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    _check_delta(delta)
    base = Prng(seed)
    min_ratio = math.inf
    min_margin = math.inf
    bound_violations = 0
    improvement_violations = 0
    for t in range(trials):
        trial = _unit_trial(base.derive(t), dim, delta)
        min_ratio = min(min_ratio, trial.ratio)
        min_margin = min(min_margin, trial.snr_y_next / trial.bound)
        if not trial.snr_y_next > trial.snr_y:
            improvement_violations += 1
        if trial.snr_y_next < trial.bound * (1.0 - _BOUND_RTOL):
            bound_violations += 1
    return Theorem1Report(delta=delta, dim=dim, trials=trials, seed=seed,
                          all_hold=improvement_violations == 0 and bound_violations == 0,
                          min_ratio=min_ratio, bound_violations=bound_violations,
                          improvement_violations=improvement_violations,
                          min_bound_margin=min_margin)


def run_remark_cases(dim: int, seed: int) -> RemarkReport:
    """Exact extremes: prediction equal to the observation, and zero error."""
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    rng = Prng(seed)
    x = rng.normals(dim)
    n = rng.normals(dim)
    snr_y = snr(x, n)
    # x_hat = y means e = n: the blended target is y again.
    worst = snr(x, (n + n) / 2.0) / snr_y
    # e = 0 means x_hat = x: the blended error is n/2.
    best = snr(x, n / 2.0) / snr_y
    return RemarkReport(dim=dim, seed=seed, worst_case_ratio=worst,
                        best_case_ratio=best,
                        worst_exact=abs(worst - 1.0) <= 1e-12,
                        best_exact=abs(best - 2.0) <= 1e-12)


def run_corollary(deltas: list[float], dim: int, seed: int,
                  aligned: bool = True, trials: int = 1) -> CorollaryReport:
    """Check the substituted-supervision SNR rises as the error norm shrinks.

    Aligned mode uses e_k = delta_k * n, making each SNR the closed form
    2/(1+delta_k) * SNR(y). The randomized mode samples error directions and
    reports how often the whole sequence stays strictly increasing.
    """
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    if len(deltas) < 1:
        raise ValueError("deltas must be non-empty")
    for d in deltas:
        _check_delta(d)
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError(f"deltas must be strictly decreasing, got {deltas}")

    rng = Prng(seed)
    x = rng.normals(dim)
    n = rng.normals(dim)

    def sequence(stream: Prng) -> list[float]:
        seq = []
        for d in deltas:
            if aligned:
                e = d * n
            else:
                e = stream.normals(dim)
                e *= d * np.linalg.norm(n) / np.linalg.norm(e)
            seq.append(snr(x, (n + e) / 2.0))
        return seq

    if aligned:
        seq = sequence(rng)
        monotone = all(b > a for a, b in zip(seq, seq[1:]))
        return CorollaryReport(deltas=list(deltas), dim=dim, seed=seed,
                               monotone=monotone, snr_sequence=seq, aligned=True)

    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    hits = 0
    first_seq: list[float] = []
    for t in range(trials):
        seq = sequence(rng.derive(t))
        if t == 0:
            first_seq = seq
        if all(b > a for a, b in zip(seq, seq[1:])):
            hits += 1
    return CorollaryReport(deltas=list(deltas), dim=dim, seed=seed,
                           monotone=hits == trials, snr_sequence=first_seq,
                           monotone_rate=hits / trials, aligned=False)
