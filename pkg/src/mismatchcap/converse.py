"""Upper bounds on the mismatch capacity via surely degraded channels.

The bound: over all broadcast channels that (a) reproduce the observed
channel as their first marginal and (b) only put mass where the second
score attains the tilt, the capacity of the second marginal upper-bounds
the mismatch capacity. Computing it is a max-min: maximize mutual
information over the input law, minimize over the eligible broadcast
channels. The feasible set is a product of scaled sub-simplices (one
per input/output pair), so the inner minimization has a closed-form
linear oracle and conditional gradient applies; the outer step is a
damped multiplicative capacity-style update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .errors import ConvergenceError, EmptyFeasibleSetError
from .metrics import AdditiveMetric, DEFAULT_TIE_TOL, SupportPattern, gamma_nonempty_given_marginal
from .optim import DEFAULT_CONFIG, SolverConfig, min_convex_over_polytope
from .probability import (
    BroadcastChannel,
    ProbVector,
    RateValue,
    StochasticMatrix,
    channel_capacity,
)

_FLOOR = 1e-300
_OUTER_CAP = 2000
_STREAK = 10  # consecutive near-equal saddle values required to stop
_GAMMA_FLOOR = 1e-4


@dataclass(frozen=True)
class BoundResult:
    rate: RateValue
    argmin_channel: BroadcastChannel
    argmax_input: ProbVector
    trace: List[Tuple[int, float]]  # (iteration, saddle value in nats)
    bracket: Optional[Tuple[float, float]] = None  # certified (lower, upper), nats


def export_trace(result: BoundResult) -> List[Tuple[int, float]]:
    """Per-iteration saddle values converted to bits."""
    scale = 1.0 / math.log(2.0)
    return [(t, v * scale) for t, v in result.trace]


def _inner_min(law, cells, groups, nx, nz, cfg, x0):
    """Minimize I(law; z-marginal) over the eligible broadcast channels.

    cells: (n,3) allowed (x,y,z) triples carrying the variables.
    groups: per (x,y) pair with positive channel mass, the variable
    indices and the mass to distribute among them.
    """
    cx, cz = cells[:, 0], cells[:, 2]

    def objective(v):
        t = np.zeros((nx, nz))
        np.add.at(t, (cx, cz), v)
        out = law @ t
        ratio = np.log(np.maximum(t, _FLOOR)) - np.log(np.maximum(out, _FLOOR))[None, :]
        val = float(np.sum(law[:, None] * np.where(t > 0.0, t * ratio, 0.0)))
        grad = law[cx] * ratio[cx, cz]
        return val, grad

    def lmo(grad):
        v = np.zeros(cells.shape[0])
        for mass, idx in groups:
            v[idx[np.argmin(grad[idx])]] = mass
        return v

    return min_convex_over_polytope(objective, cfg=cfg, x0=x0, lmo=lmo)


def sd_bound(
    channel: StochasticMatrix,
    q: AdditiveMetric,
    rho: AdditiveMetric,
    cfg: SolverConfig = DEFAULT_CONFIG,
    tie_tol: float = DEFAULT_TIE_TOL,
) -> BoundResult:
    feas = gamma_nonempty_given_marginal(channel, q, rho, tie_tol)
    if not feas:
        raise EmptyFeasibleSetError(
            f"no eligible broadcast channel reproduces this marginal; "
            f"blocked at input/output pair {feas.blocking}",
            certificate=feas.blocking,
        )
    allowed = SupportPattern.from_metrics(q, rho, tie_tol).allowed
    nx, ny = channel.num_inputs, channel.num_outputs
    nz = rho.num_outputs

    cell_list = []
    groups = []
    for x in range(nx):
        for y in range(ny):
            mass = channel.rows[x, y]
            if mass <= 0.0:
                continue
            zs = np.flatnonzero(allowed[x, y])
            idx = np.arange(len(cell_list), len(cell_list) + zs.size)
            cell_list.extend((x, y, int(z)) for z in zs)
            groups.append((float(mass), idx))
    cells = np.array(cell_list, dtype=int)

    # start from the even-spread feasible point
    v = np.concatenate([np.full(idx.size, mass / idx.size) for mass, idx in groups])

    inner_cfg = SolverConfig(
        feas_tol=cfg.feas_tol,
        opt_tol=min(cfg.opt_tol, 1e-6),
        max_iters=cfg.max_iters,
        grid_resolution=cfg.grid_resolution,
    )
    law = np.full(nx, 1.0 / nx)
    gamma = 1.0
    prev = None
    streak = 0
    trace: List[Tuple[int, float]] = []
    converged = False
    saddle = math.inf
    gap = math.inf
    for t in range(1, _OUTER_CAP + 1):
        res = _inner_min(law, cells, groups, nx, nz, inner_cfg, v)
        v, saddle, gap = res.point, res.value, res.gap
        trace.append((t, saddle))
        if prev is not None:
            if saddle < prev - cfg.opt_tol:
                gamma = max(gamma / 2.0, _GAMMA_FLOOR)
            streak = streak + 1 if abs(saddle - prev) < cfg.opt_tol else 0
            if streak >= _STREAK:
                converged = True
                break
        prev = saddle

        t_marg = np.zeros((nx, nz))
        np.add.at(t_marg, (cells[:, 0], cells[:, 2]), v)
        out = law @ t_marg
        logr = np.log(np.maximum(t_marg, _FLOOR)) - np.log(np.maximum(out, _FLOOR))[None, :]
        d = np.sum(np.where(t_marg > 0.0, t_marg * logr, 0.0), axis=1)
        law = law * np.exp(gamma * (d - d.max()))
        law = law / law.sum()

    tensor = np.zeros((nx, ny, nz))
    tensor[cells[:, 0], cells[:, 1], cells[:, 2]] = v
    final = BroadcastChannel(tensor)
    cap_upper, _ = channel_capacity(final.z_marginal())
    lower = saddle - gap
    upper = cap_upper.nats
    slack = max(1e-6, 50.0 * cfg.opt_tol)
    if not converged or saddle < lower - slack or saddle > upper + slack:
        raise ConvergenceError(
            "saddle iteration did not settle", lower=lower, upper=upper
        )
    return BoundResult(
        rate=RateValue(saddle),
        argmin_channel=final,
        argmax_input=ProbVector(law),
        trace=trace,
        bracket=(lower, upper),
    )


def kg_bound(
    channel: StochasticMatrix,
    q: AdditiveMetric,
    cfg: SolverConfig = DEFAULT_CONFIG,
    tie_tol: float = DEFAULT_TIE_TOL,
) -> BoundResult:
    """Special case with the second score equal to the decoder's own."""
    return sd_bound(channel, q, q, cfg, tie_tol)
