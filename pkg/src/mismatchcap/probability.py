"""Distributions, channels, information measures, capacity, exponents.

All information quantities are computed internally in nats; RateValue
carries the unit and converts at presentation boundaries only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from . import optim
from .errors import (
    ConvergenceError,
    DimensionMismatchError,
    InvalidDistributionError,
    SizeCapError,
)

NATS = "nats-per-use"
BITS = "bits-per-use"
LOG2E = math.log2(math.e)

_SUM_TOL = 1e-9
_NEG_TOL = 1e-12


def _clean_pmf(a, what):
    """Validate nonnegativity and normalization, then renormalize exactly."""
    if not np.isfinite(a).all():
        raise InvalidDistributionError(f"{what} has non-finite entries")
    if a.min() < -_NEG_TOL:
        raise InvalidDistributionError(f"{what} has a negative entry: {a.min()}")
    total = a.sum()
    if abs(total - 1.0) > _SUM_TOL:
        raise InvalidDistributionError(f"{what} sums to {total}, not 1")
    a = np.clip(a, 0.0, None)
    return a / a.sum()


@dataclass(frozen=True)
class RateValue:
    """A nonnegative rate with an explicit unit."""

    value: float
    unit: str = NATS

    def __post_init__(self):
        if self.unit not in (NATS, BITS):
            raise ValueError(f"unknown unit {self.unit!r}")
        v = float(self.value)
        if v < 0.0:
            if v < -1e-9:
                raise ValueError(f"rate must be nonnegative, got {v}")
            v = 0.0
        object.__setattr__(self, "value", v)

    def in_nats(self) -> "RateValue":
        if self.unit == NATS:
            return self
        return RateValue(self.value / LOG2E, NATS)

    def in_bits(self) -> "RateValue":
        if self.unit == BITS:
            return self
        return RateValue(self.value * LOG2E, BITS)

    @property
    def nats(self) -> float:
        return self.in_nats().value

    @property
    def bits(self) -> float:
        return self.in_bits().value


class ProbVector:
    """Probability vector over a finite alphabet."""

    __slots__ = ("probs",)

    def __init__(self, probs):
        a = np.asarray(probs, dtype=float).copy()
        if a.ndim != 1 or a.size == 0:
            raise InvalidDistributionError("probability vector must be 1-D, nonempty")
        a = _clean_pmf(a, "probability vector")
        a.setflags(write=False)
        self.probs = a

    def __len__(self):
        return self.probs.size

    def __getitem__(self, i):
        return float(self.probs[i])

    def __eq__(self, other):
        return isinstance(other, ProbVector) and np.array_equal(self.probs, other.probs)

    def __repr__(self):
        return f"ProbVector({self.probs.tolist()})"

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probs > 0.0)

    @staticmethod
    def uniform(n: int) -> "ProbVector":
        return ProbVector(np.full(n, 1.0 / n))


class StochasticMatrix:
    """Row-stochastic matrix: one output law per input symbol."""

    __slots__ = ("rows",)

    def __init__(self, rows):
        a = np.asarray(rows, dtype=float).copy()
        if a.ndim != 2 or a.size == 0:
            raise InvalidDistributionError("channel matrix must be 2-D, nonempty")
        for i in range(a.shape[0]):
            a[i] = _clean_pmf(a[i], f"channel row {i}")
        a.setflags(write=False)
        self.rows = a

    @property
    def num_inputs(self) -> int:
        return self.rows.shape[0]

    @property
    def num_outputs(self) -> int:
        return self.rows.shape[1]

    def row(self, x: int) -> np.ndarray:
        return self.rows[x]

    def output_law(self, input_law: ProbVector) -> ProbVector:
        if len(input_law) != self.num_inputs:
            raise DimensionMismatchError("input law does not match channel inputs")
        return ProbVector(input_law.probs @ self.rows)

    def __eq__(self, other):
        return isinstance(other, StochasticMatrix) and np.array_equal(
            self.rows, other.rows
        )

    def __repr__(self):
        return f"StochasticMatrix({self.rows.tolist()})"


class BroadcastChannel:
    """Conditional joint law on two output alphabets given the input."""

    __slots__ = ("tensor",)

    def __init__(self, tensor):
        a = np.asarray(tensor, dtype=float).copy()
        if a.ndim != 3 or a.size == 0:
            raise InvalidDistributionError("broadcast tensor must be 3-D, nonempty")
        for x in range(a.shape[0]):
            a[x] = _clean_pmf(a[x].ravel(), f"broadcast slice {x}").reshape(a[x].shape)
        a.setflags(write=False)
        self.tensor = a

    @property
    def shape(self):
        return self.tensor.shape

    def y_marginal(self) -> StochasticMatrix:
        return StochasticMatrix(self.tensor.sum(axis=2))

    def z_marginal(self) -> StochasticMatrix:
        return StochasticMatrix(self.tensor.sum(axis=1))

    @staticmethod
    def splice(channel: StochasticMatrix) -> "BroadcastChannel":
        """Duplicate the output: z is a copy of y."""
        w = channel.rows
        ny = channel.num_outputs
        t = np.zeros((channel.num_inputs, ny, ny))
        for y in range(ny):
            t[:, y, y] = w[:, y]
        return BroadcastChannel(t)

    @staticmethod
    def independent(
        first: StochasticMatrix, second: StochasticMatrix
    ) -> "BroadcastChannel":
        """Outputs drawn independently given the input."""
        if first.num_inputs != second.num_inputs:
            raise DimensionMismatchError("channels disagree on the input alphabet")
        return BroadcastChannel(first.rows[:, :, None] * second.rows[:, None, :])

    def __repr__(self):
        return f"BroadcastChannel(shape={self.tensor.shape})"


class JointPmf:
    """Joint pmf over several finite variables, stored flat in row-major order."""

    __slots__ = ("arity", "dims", "mass")

    def __init__(self, dims: Sequence[int], mass):
        dims = tuple(int(d) for d in dims)
        a = np.asarray(mass, dtype=float).copy().ravel()
        if a.size != int(np.prod(dims)):
            raise DimensionMismatchError("mass length does not match dims")
        a = _clean_pmf(a, "joint pmf")
        a.setflags(write=False)
        self.arity = len(dims)
        self.dims = dims
        self.mass = a

    @staticmethod
    def from_array(arr) -> "JointPmf":
        arr = np.asarray(arr, dtype=float)
        return JointPmf(arr.shape, arr.ravel())

    def as_array(self) -> np.ndarray:
        return self.mass.reshape(self.dims)

    def marginalize(self, keep: Iterable[int]) -> "JointPmf":
        keep = tuple(keep)
        if list(keep) != sorted(set(keep)) or any(
            k < 0 or k >= self.arity for k in keep
        ):
            raise ValueError("keep must be strictly increasing valid axes")
        drop = tuple(i for i in range(self.arity) if i not in keep)
        return JointPmf.from_array(self.as_array().sum(axis=drop))

    def __repr__(self):
        return f"JointPmf(dims={self.dims})"


def _mass_of(obj) -> np.ndarray:
    if isinstance(obj, JointPmf):
        return obj.mass
    if isinstance(obj, ProbVector):
        return obj.probs
    return np.asarray(obj, dtype=float).ravel()


def entropy(p) -> float:
    """Shannon entropy in nats."""
    a = _mass_of(p)
    pos = a[a > 0.0]
    return float(-(pos * np.log(pos)).sum())


def kl_divergence(p, q) -> float:
    """D(p||q) in nats; +inf when p puts mass where q has none."""
    a = _mass_of(p)
    b = _mass_of(q)
    if a.shape != b.shape:
        raise DimensionMismatchError("divergence operands have different sizes")
    pos = a > 0.0
    if np.any(b[pos] <= 0.0):
        return math.inf
    return float((a[pos] * np.log(a[pos] / b[pos])).sum())


def conditional_kl(v: StochasticMatrix, w: StochasticMatrix, p: ProbVector) -> float:
    """Average divergence between rows, weighted by the input law."""
    if v.rows.shape != w.rows.shape or len(p) != v.num_inputs:
        raise DimensionMismatchError("conditional divergence dimensions disagree")
    total = 0.0
    for x in p.support():
        d = kl_divergence(v.rows[x], w.rows[x])
        if d == math.inf:
            return math.inf
        total += p[x] * d
    return total


def mutual_information(input_law: ProbVector, channel: StochasticMatrix) -> RateValue:
    """I(X;Y) in nats for the joint law input x channel."""
    if len(input_law) != channel.num_inputs:
        raise DimensionMismatchError("input law does not match channel")
    p = input_law.probs
    w = channel.rows
    out = p @ w
    joint = p[:, None] * w
    pos = joint > 0.0
    ref = (p[:, None] * out[None, :])[pos]
    val = float((joint[pos] * np.log(joint[pos] / ref)).sum())
    return RateValue(max(0.0, val), NATS)


def channel_capacity(
    channel: StochasticMatrix,
    tol: float = 1e-9,
    max_iters: int = 100_000,
) -> Tuple[RateValue, ProbVector]:
    """Alternating maximization of I(X;Y) with the standard bracket.

    Stops once max_x D(W_x || rW) - I(r) < tol; the lower end I(r) is
    achieved by the returned input law, so it is reported as the value.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    w = channel.rows
    n = channel.num_inputs
    r = np.full(n, 1.0 / n)
    lower = upper = None
    logw = np.where(w > 0.0, np.log(np.where(w > 0.0, w, 1.0)), 0.0)
    for _ in range(max_iters):
        out = r @ w
        # D(W_x || out), finite because supp(out) covers every row's support
        with np.errstate(divide="ignore"):
            logout = np.where(out > 0.0, np.log(np.where(out > 0.0, out, 1.0)), 0.0)
        d = (w * (logw - logout[None, :])).sum(axis=1)
        lower = float(r @ d)
        upper = float(d.max())
        if upper - lower < tol:
            return RateValue(max(0.0, lower), NATS), ProbVector(r)
        r = r * np.exp(d - d.max())
        r /= r.sum()
    raise ConvergenceError(
        "capacity iteration cap reached", lower=lower, upper=upper
    )


def compose_channels(
    first: BroadcastChannel, second: BroadcastChannel, middle_tol: float = 1e-7
) -> BroadcastChannel:
    """Chain two broadcast channels through their shared middle output.

    The middle marginals must agree; where they are zero the composition
    contributes zero mass.
    """
    if first.shape[0] != second.shape[0]:
        raise DimensionMismatchError("composition inputs disagree on X")
    if first.shape[2] != second.shape[1]:
        raise DimensionMismatchError("middle alphabets disagree")
    mid_first = first.tensor.sum(axis=1)
    mid_second = second.tensor.sum(axis=2)
    if np.max(np.abs(mid_first - mid_second)) > middle_tol:
        raise InvalidDistributionError("middle marginals disagree beyond tolerance")
    safe = np.where(mid_second > 0.0, mid_second, 1.0)
    cond = second.tensor / safe[:, :, None]
    cond[mid_second <= 0.0] = 0.0
    return BroadcastChannel(np.einsum("xab,xbc->xac", first.tensor, cond))


def product_channel(
    channel: BroadcastChannel, k: int, size_cap: int = 1_000_000
) -> BroadcastChannel:
    """Memoryless k-letter extension; tuple indices are row-major."""
    if k < 1:
        raise ValueError("k must be at least 1")
    nx, ny, nz = channel.shape
    if (nx * ny * nz) ** k > size_cap:
        raise SizeCapError("product channel exceeds the size cap")
    t = channel.tensor
    for _ in range(k - 1):
        t = np.einsum("xyz,abc->xaybzc", t, channel.tensor).reshape(
            t.shape[0] * nx, t.shape[1] * ny, t.shape[2] * nz
        )
    return BroadcastChannel(t)


def correct_decoding_exponent(
    composition: ProbVector,
    channel: StochasticMatrix,
    rate: RateValue,
    cfg: optim.SolverConfig = optim.DEFAULT_CONFIG,
) -> float:
    """Exponential decay rate of the probability of correct decoding.

    Evaluates min over conditional laws V of
    D(V||channel|composition) + |R - I(composition x V)|_+, in nats.
    The positive part is handled by maximizing over its slope in [0,1];
    for each slope the inner problem is smooth and convex and is solved
    by conditional gradient over the product of row simplices.
    """
    if len(composition) != channel.num_inputs:
        raise DimensionMismatchError("composition does not match channel")
    r_nats = rate.nats
    if r_nats < 0.0:
        raise ValueError("rate must be nonnegative")
    p = composition.probs
    w = channel.rows
    i_full = mutual_information(composition, channel).nats
    if r_nats <= i_full + 1e-12:
        return 0.0

    sup = np.flatnonzero(p > 0.0)
    # V rows are only meaningful on supp(composition), and each row must
    # stay inside the support of the matching channel row (else D = +inf)
    row_support = [np.flatnonzero(w[x] > 0.0) for x in sup]
    slots = [(x, z) for xi, x in enumerate(sup) for z in row_support[xi]]
    index = {sz: i for i, sz in enumerate(slots)}
    nvar = len(slots)
    nz = channel.num_outputs

    def unpack(vec):
        v = np.zeros((channel.num_inputs, nz))
        for i, (x, z) in enumerate(slots):
            v[x, z] = vec[i]
        return v

    x0 = np.array([w[x, z] for (x, z) in slots])

    def lmo(grad):
        # independent row simplices: all row mass on the cheapest slot
        out = np.zeros(nvar)
        for xi, x in enumerate(sup):
            ids = [index[(x, z)] for z in row_support[xi]]
            out[ids[int(np.argmin(grad[ids]))]] = 1.0
        return out

    floor = 1e-300

    def make_objective(lam):
        def f(vec):
            v = unpack(vec)
            pv = p @ v
            val = 0.0
            grad = np.empty(nvar)
            logpv = np.log(np.maximum(pv, floor))
            for i, (x, z) in enumerate(slots):
                lw = math.log(w[x, z])
                lv = math.log(max(v[x, z], floor))
                val += p[x] * v[x, z] * ((1.0 - lam) * (lv - lw) + lam * (logpv[z] - lw))
                grad[i] = p[x] * ((1.0 - lam) * (lv - lw) + lam * (logpv[z] - lw) + 1.0)
            # the +1 terms cancel inside each fixed-mass row; keep them for the
            # gap computation to stay a valid linearization
            return val, grad

        return f

    inner_cfg = optim.SolverConfig(
        feas_tol=cfg.feas_tol,
        opt_tol=min(cfg.opt_tol, 1e-8),
        max_iters=cfg.max_iters,
        grid_resolution=cfg.grid_resolution,
    )

    def g(lam):
        res = optim.min_convex_over_polytope(
            make_objective(lam), cfg=inner_cfg, x0=x0, lmo=lmo
        )
        return lam * r_nats + res.value

    # golden-section maximization of the concave dual in the slope
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    lo, hi = 0.0, 1.0
    a = hi - inv * (hi - lo)
    b = lo + inv * (hi - lo)
    ga, gb = g(a), g(b)
    for _ in range(40):
        if ga < gb:
            lo, a, ga = a, b, gb
            b = lo + inv * (hi - lo)
            gb = g(b)
        else:
            hi, b, gb = b, a, ga
            a = hi - inv * (hi - lo)
            ga = g(a)
        if hi - lo < 1e-7:
            break
    best = max(ga, gb, g(0.0), g(1.0))
    return max(0.0, float(best))
