"""Achievable rates for mismatched decoding.

Both rates are minima of the divergence D(P~ || Q x P_Y) over joint laws
P~ that keep the decoder's expected score at least as large as under the
true joint. The first pins only the output marginal; the second pins
both marginals, so it can only be larger. The outer problem (choice of
input law) is handled by a simplex scan with a local ascent polish.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import DimensionMismatchError
from .metrics import AdditiveMetric
from .optim import DEFAULT_CONFIG, LinearProgram, SolverConfig, min_convex_over_polytope, simplex_grid
from .probability import ProbVector, RateValue, StochasticMatrix

_FLOOR = 1e-300


@dataclass(frozen=True)
class RateProblem:
    """A channel, a decoding metric, and optionally a fixed input law."""

    channel: StochasticMatrix
    metric: AdditiveMetric
    input_law: Optional[ProbVector] = None

    def __post_init__(self):
        if (self.metric.num_inputs, self.metric.num_outputs) != (
            self.channel.num_inputs,
            self.channel.num_outputs,
        ):
            raise DimensionMismatchError("metric does not match the channel")
        if self.input_law is not None and len(self.input_law) != self.channel.num_inputs:
            raise DimensionMismatchError("input law does not match the channel")


def _as_law(input_law, n: int) -> np.ndarray:
    vec = input_law.probs if isinstance(input_law, ProbVector) else ProbVector(input_law).probs
    if vec.size != n:
        raise DimensionMismatchError("input law does not match the channel")
    return np.asarray(vec, dtype=float)


def _solve_rate(
    channel: StochasticMatrix,
    metric: AdditiveMetric,
    law: np.ndarray,
    pin_input_marginal: bool,
    cfg: SolverConfig,
) -> float:
    """Shared inner program; returns the optimal divergence in nats."""
    w = channel.rows
    qs = metric.scores
    joint = law[:, None] * w
    p_y = joint.sum(axis=0)
    ref = law[:, None] * p_y[None, :]

    # Expected score under the true joint, with structural zeros dominating.
    if np.any((joint > 0.0) & np.isneginf(qs)):
        score_floor = -math.inf
    else:
        score_floor = float(np.sum(np.where(joint > 0.0, joint * np.where(np.isneginf(qs), 0.0, qs), 0.0)))

    active = ref > 0.0
    if score_floor > -math.inf:
        # mass on a -inf cell would violate the score constraint outright
        active &= ~np.isneginf(qs)
    cells = np.argwhere(active)
    ncell = cells.shape[0]
    has_row = score_floor > -math.inf
    nvar = ncell + (1 if has_row else 0)

    rows = []
    rhs = []
    for y in np.flatnonzero(p_y > 0.0):
        r = np.zeros(nvar)
        r[: ncell][cells[:, 1] == y] = 1.0
        rows.append(r)
        rhs.append(p_y[y])
    if pin_input_marginal:
        for x in np.flatnonzero(law > 0.0):
            r = np.zeros(nvar)
            r[: ncell][cells[:, 0] == x] = 1.0
            rows.append(r)
            rhs.append(law[x])
    if has_row:
        r = np.zeros(nvar)
        r[:ncell] = qs[cells[:, 0], cells[:, 1]]
        r[ncell] = -1.0
        rows.append(r)
        rhs.append(score_floor)
    a = np.vstack(rows)
    b = np.array(rhs)

    log_ref = np.log(ref[cells[:, 0], cells[:, 1]])

    def objective(v):
        m = v[:ncell]
        safe = np.maximum(m, _FLOOR)
        logs = np.log(safe)
        val = float(m @ (logs - log_ref))
        grad = np.zeros(nvar)
        grad[:ncell] = logs - log_ref + 1.0
        return val, grad

    x0 = np.zeros(nvar)
    x0[:ncell] = joint[cells[:, 0], cells[:, 1]]
    res = min_convex_over_polytope(
        objective, polytope=LinearProgram(np.zeros(nvar), a, b), cfg=cfg, x0=x0
    )
    return res.value


def gmi_rate(
    channel: StochasticMatrix,
    metric: AdditiveMetric,
    input_law,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> RateValue:
    """Decoder-aware rate with only the output marginal pinned."""
    RateProblem(channel, metric)  # alphabet validation
    law = _as_law(input_law, channel.num_inputs)
    return RateValue(_solve_rate(channel, metric, law, False, cfg))


def lm_rate(
    channel: StochasticMatrix,
    metric: AdditiveMetric,
    input_law,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> RateValue:
    """Decoder-aware rate with both marginals pinned; never below gmi_rate."""
    RateProblem(channel, metric)
    law = _as_law(input_law, channel.num_inputs)
    return RateValue(_solve_rate(channel, metric, law, True, cfg))


def _golden_max(fn, lo: float, hi: float, iters: int = 16) -> Tuple[float, float]:
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = fn(d)
    return (c, fc) if fc >= fd else (d, fd)


def _pairwise_ascent(fn, law: np.ndarray, best: float, passes: int = 3):
    """Polish an input law by 1-D transfers of mass between coordinates."""
    n = law.size
    law = law.copy()
    for _ in range(passes):
        gained = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                lo, hi = -law[j], law[i]
                if hi - lo < 1e-12:
                    continue

                def slice_val(t, _i=i, _j=j):
                    cand = law.copy()
                    cand[_i] -= t
                    cand[_j] += t
                    np.clip(cand, 0.0, None, out=cand)
                    return fn(cand / cand.sum())

                t_star, v_star = _golden_max(slice_val, lo, hi)
                if v_star > best + 1e-9:
                    gained += v_star - best
                    best = v_star
                    law[i] -= t_star
                    law[j] += t_star
                    np.clip(law, 0.0, None, out=law)
                    law /= law.sum()
        if gained < 1e-8:
            break
    return law, best


def lm_rate_max(
    channel: StochasticMatrix,
    metric: AdditiveMetric,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> Tuple[RateValue, ProbVector]:
    """Maximize lm_rate over the input law.

    Scans a simplex grid (1/200 for two inputs, 1/50 for three), then
    polishes the best point with pairwise golden-section ascent. Larger
    alphabets skip the grid and ascend from several starts instead.
    """
    RateProblem(channel, metric)
    n = channel.num_inputs
    if n == 1:
        law = np.array([1.0])
        return lm_rate(channel, metric, law, cfg), ProbVector(law)

    scan_cfg = dataclasses.replace(cfg, opt_tol=max(cfg.opt_tol, 1e-5))

    def coarse(law):
        return _solve_rate(channel, metric, law, True, scan_cfg)

    if n == 2:
        starts = [np.asarray(p) for p in simplex_grid(2, 200)]
    elif n == 3:
        starts = [np.asarray(p) for p in simplex_grid(3, 50)]
    else:
        rng = np.random.default_rng(0)
        starts = [np.full(n, 1.0 / n)]
        starts += [np.eye(n)[i] for i in range(n)]
        starts += [rng.dirichlet(np.ones(n)) for _ in range(8)]

    best_law, best_val = None, -math.inf
    for law in starts:
        v = coarse(law)
        if v > best_val:
            best_val, best_law = v, law

    best_law, _ = _pairwise_ascent(coarse, best_law, best_val)
    final = lm_rate(channel, metric, best_law, cfg)
    return final, ProbVector(best_law)
