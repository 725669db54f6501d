"""Additive decoding metrics, tilt values, and support-set machinery.

The central objects: for metrics q (on X x Y) and rho (on X x Z), the
tilt of a pair (y,z) is the largest score advantage rho(x,z) - q(x,y)
over inputs, and the support set collects the inputs attaining it. A
broadcast channel is "surely degraded" when it only places mass where
the input attains the tilt; then an error by the rho-decoder on Z
implies an error by the q-decoder on Y, for every codebook.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import DimensionMismatchError, MalformedInputError, SizeCapError
from .probability import BroadcastChannel, StochasticMatrix

MASS_TOL = 1e-12
DEFAULT_TIE_TOL = 1e-9

_NEG_INF = -math.inf


class AdditiveMetric:
    """Per-letter score matrix, summed over a block by the decoder.

    Entries must be finite unless the metric is flagged as a log
    metric, in which case -inf marks structural zeros of a likelihood.
    """

    __slots__ = ("scores", "log_metric")

    def __init__(self, scores, log_metric: bool = False):
        a = np.asarray(scores, dtype=float).copy()
        if a.ndim != 2 or a.size == 0:
            raise MalformedInputError("metric must be a 2-D matrix")
        if np.isnan(a).any() or np.isposinf(a).any():
            raise MalformedInputError("metric entries must not be NaN or +inf")
        if not log_metric and np.isneginf(a).any():
            raise MalformedInputError(
                "-inf scores require the log_metric flag (structural zeros)"
            )
        a.setflags(write=False)
        self.scores = a
        self.log_metric = bool(log_metric)

    @property
    def num_inputs(self) -> int:
        return self.scores.shape[0]

    @property
    def num_outputs(self) -> int:
        return self.scores.shape[1]

    def __getitem__(self, xy):
        return float(self.scores[xy])

    def __eq__(self, other):
        return isinstance(other, AdditiveMetric) and np.array_equal(
            self.scores, other.scores
        )

    def __repr__(self):
        return f"AdditiveMetric({self.scores.tolist()})"


def log_likelihood_metric(channel: StochasticMatrix) -> AdditiveMetric:
    """Natural-log likelihood scores; zero transitions become -inf."""
    w = channel.rows
    with np.errstate(divide="ignore"):
        return AdditiveMetric(np.where(w > 0.0, np.log(np.where(w > 0.0, w, 1.0)), _NEG_INF),
                              log_metric=True)


def add_input_score(q: AdditiveMetric, b) -> AdditiveMetric:
    """Shift every row by a per-input offset; decoding on fixed-composition
    codebooks is unaffected because the offset contributes a constant."""
    b = np.asarray(b, dtype=float)
    if b.shape != (q.num_inputs,):
        raise DimensionMismatchError("offset vector does not match input alphabet")
    return AdditiveMetric(q.scores + b[:, None], log_metric=q.log_metric)


def _diff_table(q: AdditiveMetric, rho: AdditiveMetric) -> np.ndarray:
    """Extended-arithmetic table d[x,y,z] = rho(x,z) - q(x,y).

    A -inf rho entry can never support mass, so it dominates and the
    difference is -inf; otherwise a -inf q entry makes the advantage
    unbounded (+inf).
    """
    if q.num_inputs != rho.num_inputs:
        raise DimensionMismatchError("metrics disagree on the input alphabet")
    r = rho.scores[:, None, :]
    s = q.scores[:, :, None]
    with np.errstate(invalid="ignore"):
        d = r - s
    d = np.where(np.isneginf(r), _NEG_INF, np.where(np.isneginf(s), math.inf, d))
    return np.broadcast_to(d, (q.num_inputs, q.num_outputs, rho.num_outputs)).copy()


def tau(q: AdditiveMetric, rho: AdditiveMetric, y: int, z: int) -> float:
    """Largest score advantage rho(x,z) - q(x,y) over inputs."""
    return float(_diff_table(q, rho)[:, y, z].max())


def tau_table(q: AdditiveMetric, rho: AdditiveMetric) -> np.ndarray:
    return _diff_table(q, rho).max(axis=0)


@dataclass(frozen=True)
class SupportSet:
    """Inputs attaining the tilt for one (y,z) pair."""

    members: frozenset

    def __contains__(self, x):
        return x in self.members

    def __iter__(self):
        return iter(sorted(self.members))

    def __len__(self):
        return len(self.members)


def support_set(
    q: AdditiveMetric,
    rho: AdditiveMetric,
    y: int,
    z: int,
    tie_tol: float = DEFAULT_TIE_TOL,
) -> SupportSet:
    if tie_tol < 0.0:
        raise ValueError("tie_tol must be nonnegative")
    d = _diff_table(q, rho)[:, y, z]
    bar = d.max() - tie_tol  # -inf and +inf survive this arithmetic unchanged
    return SupportSet(frozenset(int(x) for x in np.flatnonzero(d >= bar)))


@dataclass(frozen=True)
class SupportPattern:
    """Boolean tensor of triples allowed to carry mass."""

    allowed: np.ndarray

    @staticmethod
    def from_metrics(
        q: AdditiveMetric, rho: AdditiveMetric, tie_tol: float = DEFAULT_TIE_TOL
    ) -> "SupportPattern":
        d = _diff_table(q, rho)
        bar = d.max(axis=0, keepdims=True) - tie_tol
        a = d >= bar
        a.setflags(write=False)
        return SupportPattern(a)


@dataclass(frozen=True)
class GammaMembership:
    member: bool
    witness: Optional[Tuple[int, int, int]] = None
    witness_mass: Optional[float] = None

    def __bool__(self):
        return self.member


def gamma_membership(
    channel: BroadcastChannel,
    q: AdditiveMetric,
    rho: AdditiveMetric,
    tie_tol: float = DEFAULT_TIE_TOL,
) -> GammaMembership:
    """Does the broadcast channel place mass only on tilt-attaining triples?"""
    nx, ny, nz = channel.shape
    if (q.num_inputs, q.num_outputs) != (nx, ny) or (
        rho.num_inputs,
        rho.num_outputs,
    ) != (nx, nz):
        raise DimensionMismatchError("metrics do not match the broadcast alphabets")
    allowed = SupportPattern.from_metrics(q, rho, tie_tol).allowed
    bad = (~allowed) & (channel.tensor > MASS_TOL)
    if not bad.any():
        return GammaMembership(True)
    x, y, z = (int(v) for v in np.argwhere(bad)[0])
    return GammaMembership(False, (x, y, z), float(channel.tensor[x, y, z]))


@dataclass(frozen=True)
class GammaFeasibility:
    nonempty: bool
    certificate: Optional[BroadcastChannel] = None
    blocking: Optional[Tuple[int, int]] = None

    def __bool__(self):
        return self.nonempty


def gamma_nonempty_given_marginal(
    w: StochasticMatrix,
    q: AdditiveMetric,
    rho: AdditiveMetric,
    tie_tol: float = DEFAULT_TIE_TOL,
) -> GammaFeasibility:
    """Is there a surely-degraded channel whose first marginal equals w?

    Only row sums are pinned, so the per-input transportation problem is
    feasible exactly when every positive-probability output row has at
    least one admissible z column; the certificate spreads each row's
    mass evenly over its admissible columns.
    """
    if (q.num_inputs, q.num_outputs) != (w.num_inputs, w.num_outputs):
        raise DimensionMismatchError("metric q does not match the channel")
    allowed = SupportPattern.from_metrics(q, rho, tie_tol).allowed
    nx, ny = w.num_inputs, w.num_outputs
    nz = rho.num_outputs
    tensor = np.zeros((nx, ny, nz))
    for x in range(nx):
        for y in range(ny):
            if w.rows[x, y] <= 0.0:
                continue
            cols = np.flatnonzero(allowed[x, y])
            if cols.size == 0:
                return GammaFeasibility(False, blocking=(x, y))
            tensor[x, y, cols] = w.rows[x, y] / cols.size
    return GammaFeasibility(True, certificate=BroadcastChannel(tensor))


def lift_metric(q: AdditiveMetric, k: int, size_cap: int = 1_000_000) -> AdditiveMetric:
    """Average per-letter scores over k-tuples (row-major tuple indexing)."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if (q.num_inputs * q.num_outputs) ** k > size_cap:
        raise SizeCapError("lifted metric exceeds the size cap")
    s = q.scores
    for _ in range(k - 1):
        s = (s[:, None, :, None] + q.scores[None, :, None, :]).reshape(
            s.shape[0] * q.num_inputs, s.shape[1] * q.num_outputs
        )
    return AdditiveMetric(s / k, log_metric=q.log_metric)


def gamma_k_membership(
    channel_k: BroadcastChannel,
    q: AdditiveMetric,
    rho: AdditiveMetric,
    k: int,
    tie_tol: float = DEFAULT_TIE_TOL,
) -> GammaMembership:
    """Per-tuple membership test with letterwise tilt thresholds.

    A k-tuple triple is forbidden when its summed score advantage falls
    short of the summed per-letter tilts.
    """
    nx, ny, nz = q.num_inputs, q.num_outputs, rho.num_outputs
    if channel_k.shape != (nx**k, ny**k, nz**k):
        raise DimensionMismatchError("tuple channel does not match metric alphabets")
    d = _diff_table(q, rho)
    taus = d.max(axis=0)

    def digits(idx, base):
        out = []
        for _ in range(k):
            out.append(idx % base)
            idx //= base
        return out[::-1]

    def mixed_sum(values, what):
        vals = list(values)
        if _NEG_INF in vals and math.inf in vals:
            raise MalformedInputError(f"mixed infinite {what} terms in one tuple")
        if _NEG_INF in vals:
            return _NEG_INF
        if math.inf in vals:
            return math.inf
        return math.fsum(vals)

    for xk, yk, zk in np.argwhere(channel_k.tensor > MASS_TOL):
        xs = digits(int(xk), nx)
        ys = digits(int(yk), ny)
        zs = digits(int(zk), nz)
        tau_sum = mixed_sum((float(taus[y, z]) for y, z in zip(ys, zs)), "tilt")
        if tau_sum == _NEG_INF:
            continue  # some letter is unconstrained, so the tuple is too
        dk = mixed_sum(
            (float(d[x, y, z]) for x, y, z in zip(xs, ys, zs)),
            "score-advantage",
        )
        if dk < tau_sum - tie_tol:
            return GammaMembership(
                False,
                (int(xk), int(yk), int(zk)),
                float(channel_k.tensor[xk, yk, zk]),
            )
    return GammaMembership(True)
