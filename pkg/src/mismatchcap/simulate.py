"""Monte-Carlo verification that the second decoder's errors contain the first's.

For an eligible coupling, a trial in which the score decoder is right
while the comparison decoder is wrong must never happen; the simulator
counts the four joint outcomes so that claim is falsifiable. Ties are
scored as errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .cc_bounds import gamma_cc_membership
from .errors import DimensionMismatchError, EmptyFeasibleSetError, MalformedInputError
from .metrics import DEFAULT_TIE_TOL, AdditiveMetric, gamma_membership
from .optim import DEFAULT_CONFIG, SolverConfig
from .probability import BroadcastChannel, ProbVector

_WILSON_Z = 1.959963984540054  # two-sided 95%

MODE_CONSTANT_COMPOSITION = "cc"
MODE_IID = "iid"


@dataclass(frozen=True)
class SimConfig:
    """Blocklength, codebook size, composition, trial count, seed.

    The composition must be an exact type of the blocklength. Codebook
    size 1 is allowed for the no-competitor sanity case.
    """

    blocklength: int
    codebook_size: int
    composition: ProbVector
    trials: int
    seed: int

    def __post_init__(self):
        if self.blocklength < 1:
            raise MalformedInputError("blocklength must be at least 1")
        if self.codebook_size < 1:
            raise MalformedInputError("codebook size must be at least 1")
        if self.trials < 1:
            raise MalformedInputError("trial count must be at least 1")
        if not 0 <= int(self.seed) < 2**64:
            raise MalformedInputError("seed must fit in an unsigned 64-bit integer")
        counts = self.composition.probs * self.blocklength
        if np.abs(counts - np.rint(counts)).max() > 1e-9:
            raise MalformedInputError(
                "composition is not an exact type of the blocklength"
            )

    def letter_counts(self) -> np.ndarray:
        return np.rint(self.composition.probs * self.blocklength).astype(int)


@dataclass(frozen=True)
class SimReport:
    both_correct: int
    q_correct_rho_wrong: int
    q_wrong_rho_correct: int
    both_wrong: int
    q_ties: int
    rho_ties: int
    trials: int

    def __post_init__(self):
        total = (
            self.both_correct
            + self.q_correct_rho_wrong
            + self.q_wrong_rho_correct
            + self.both_wrong
        )
        if total != self.trials:
            raise ValueError("joint outcome counts do not sum to the trial count")

    @property
    def containment_violations(self) -> int:
        return self.q_correct_rho_wrong


@dataclass(frozen=True)
class ErrorRateReport:
    q_errors: int
    rho_errors: int
    trials: int
    q_rate: float
    q_interval: Tuple[float, float]
    rho_rate: float
    rho_interval: Tuple[float, float]


def _wilson(errors: int, n: int) -> Tuple[float, float]:
    z2 = _WILSON_Z * _WILSON_Z
    phat = errors / n
    denom = 1.0 + z2 / n
    center = (phat + z2 / (2 * n)) / denom
    half = _WILSON_Z * math.sqrt(phat * (1 - phat) / n + z2 / (4 * n * n)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def _decode(scores: np.ndarray) -> Tuple[bool, bool]:
    """(correct, tied) for the codeword at index 0 under highest-sum rule."""
    top = scores.max()
    winners = int((scores == top).sum())
    if winners > 1:
        return False, True
    return bool(scores[0] == top), False


def _run_trials(
    channel: BroadcastChannel,
    q: AdditiveMetric,
    rho: AdditiveMetric,
    sim: SimConfig,
    mode: str,
):
    nx, ny, nz = channel.shape
    n, m = sim.blocklength, sim.codebook_size
    base_word = np.repeat(np.arange(nx), sim.letter_counts())
    # per-x inverse-cdf tables over the flattened (y,z) cells
    cdfs = np.cumsum(channel.tensor.reshape(nx, ny * nz), axis=1)
    qs, rs = q.scores, rho.scores
    probs = sim.composition.probs

    counts = {"cc": 0, "cw": 0, "wc": 0, "ww": 0, "qt": 0, "rt": 0}
    for t in range(sim.trials):
        # one counter-based stream per trial: reproducible under any schedule
        rng = np.random.Generator(np.random.Philox(key=[int(sim.seed), t]))
        if mode == MODE_CONSTANT_COMPOSITION:
            book = rng.permuted(np.tile(base_word, (m, 1)), axis=1)
        else:
            book = rng.choice(nx, size=(m, n), p=probs)
        sent = book[0]
        u = rng.random(n)
        flat = (cdfs[sent] <= u[:, None]).sum(axis=1)
        flat = np.minimum(flat, ny * nz - 1)
        ys, zs = flat // nz, flat % nz
        q_tot = qs[book, ys[None, :]].sum(axis=1)
        r_tot = rs[book, zs[None, :]].sum(axis=1)
        q_ok, q_tie = _decode(q_tot)
        r_ok, r_tie = _decode(r_tot)
        counts["qt"] += q_tie
        counts["rt"] += r_tie
        if q_ok and r_ok:
            counts["cc"] += 1
        elif q_ok:
            counts["cw"] += 1
        elif r_ok:
            counts["wc"] += 1
        else:
            counts["ww"] += 1
    return counts


def _check_dims(channel, q, rho, sim):
    nx, ny, nz = channel.shape
    if (q.num_inputs, q.num_outputs) != (nx, ny):
        raise DimensionMismatchError("metric q does not match the coupling")
    if (rho.num_inputs, rho.num_outputs) != (nx, nz):
        raise DimensionMismatchError("metric rho does not match the coupling")
    if len(sim.composition) != nx:
        raise DimensionMismatchError("composition does not match the input alphabet")


def simulate_containment(
    channel: BroadcastChannel,
    q: AdditiveMetric,
    rho: AdditiveMetric,
    sim: SimConfig,
    mode: str = MODE_CONSTANT_COMPOSITION,
    require_membership: bool = True,
    cfg: SolverConfig = DEFAULT_CONFIG,
    tie_tol: float = DEFAULT_TIE_TOL,
) -> SimReport:
    """Count joint decode outcomes over seeded random codebooks.

    Constant-composition mode draws codewords uniformly from the type
    class; iid mode draws letters independently from the composition
    (eligibility is then checked composition-free, since containment
    must hold for every codebook). Membership checking can be disabled
    for negative controls.
    """
    if mode not in (MODE_CONSTANT_COMPOSITION, MODE_IID):
        raise MalformedInputError(f"unknown sampling mode {mode!r}")
    _check_dims(channel, q, rho, sim)
    if require_membership:
        if mode == MODE_IID:
            mem = gamma_membership(channel, q, rho, tie_tol)
            if not mem:
                raise EmptyFeasibleSetError(
                    "coupling is not eligible: mass off the allowed support",
                    certificate=mem.witness,
                )
        else:
            mem = gamma_cc_membership(channel, q, rho, sim.composition, cfg)
            if not mem:
                raise EmptyFeasibleSetError(
                    "coupling is not eligible at this composition "
                    f"(score-gap LP value {mem.lp_value:.3e})",
                    certificate=mem.witness,
                )
    counts = _run_trials(channel, q, rho, sim, mode)
    return SimReport(
        both_correct=counts["cc"],
        q_correct_rho_wrong=counts["cw"],
        q_wrong_rho_correct=counts["wc"],
        both_wrong=counts["ww"],
        q_ties=counts["qt"],
        rho_ties=counts["rt"],
        trials=sim.trials,
    )


def estimate_error_rates(
    channel: BroadcastChannel,
    q: AdditiveMetric,
    rho: AdditiveMetric,
    sim: SimConfig,
    mode: str = MODE_CONSTANT_COMPOSITION,
) -> ErrorRateReport:
    """Per-decoder error frequencies with Wilson 95% intervals.

    No eligibility requirement: this is plain measurement plumbing.
    """
    if mode not in (MODE_CONSTANT_COMPOSITION, MODE_IID):
        raise MalformedInputError(f"unknown sampling mode {mode!r}")
    _check_dims(channel, q, rho, sim)
    counts = _run_trials(channel, q, rho, sim, mode)
    q_err = counts["wc"] + counts["ww"]
    r_err = counts["cw"] + counts["ww"]
    n = sim.trials
    return ErrorRateReport(
        q_errors=q_err,
        rho_errors=r_err,
        trials=n,
        q_rate=q_err / n,
        q_interval=_wilson(q_err, n),
        rho_rate=r_err / n,
        rho_interval=_wilson(r_err, n),
    )
