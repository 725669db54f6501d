"""Composition-dependent eligibility tests and the support-enumeration bound.

Membership here is a linear program over four-variable joint laws V on
(X, Y, Z, X~): both X-marginals equal the composition, the (X,Y,Z) part
is absolutely continuous w.r.t. the composition times the channel, and
the comparison row ties the scores of the true and impostor inputs. The
channel enters only through its support, which is what makes exhaustive
support-pattern enumeration exact at desk scale.

Metrics with -inf entries are handled by a limiting argument (replace
-inf by -M and let M grow): the comparison row splits into a mass
comparison plus a finite-part row, and the objective's -inf cells turn
into an auxiliary mass-balance maximization that either blows up to
+infinity or pins the optimum to the balanced face.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .converse import _inner_min
from .errors import DimensionMismatchError, SizeCapError
from .metrics import MASS_TOL, AdditiveMetric
from .optim import DEFAULT_CONFIG, INFEASIBLE, LinearProgram, SolverConfig, lp_solve, simplex_grid
from .probability import BroadcastChannel, ProbVector, RateValue, StochasticMatrix

_ENUM_CELL_CAP = 12  # 2^12 = 4096 support patterns


@dataclass(frozen=True)
class CcMembership:
    member: bool
    lp_value: float
    witness: Optional[np.ndarray] = None  # dense (nx,ny,nz,nx) on failure

    def __bool__(self):
        return self.member


def _finite_and_mask(scores: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    neg = np.isneginf(scores)
    return np.where(neg, 0.0, scores), neg


class _MembershipProgram:
    """One membership question: fixed composition, support cells, metrics."""

    def __init__(self, p_vec, cells, q: AdditiveMetric, rho: Optional[AdditiveMetric],
                 nz: int, cfg: SolverConfig):
        self.cfg = cfg
        self.p = np.asarray(p_vec, dtype=float)
        self.supp = np.flatnonzero(self.p > MASS_TOL)
        self.cells = list(cells)
        self.nz = nz
        self.q = q
        self.rho = rho
        self.vars = [
            (x, y, z, xt) for (x, y, z) in self.cells for xt in self.supp
        ]
        n = len(self.vars)
        vx = np.array([v[0] for v in self.vars], dtype=int)
        vy = np.array([v[1] for v in self.vars], dtype=int)
        vz = np.array([v[2] for v in self.vars], dtype=int)
        vt = np.array([v[3] for v in self.vars], dtype=int)
        self._vx, self._vy, self._vz, self._vt = vx, vy, vz, vt

        rows = []
        rhs = []
        for a in self.supp:
            r = (vx == a).astype(float)
            rows.append(r)
            rhs.append(self.p[a])
        for a in self.supp:
            r = (vt == a).astype(float)
            rows.append(r)
            rhs.append(self.p[a])
        self.base_rows = rows
        self.base_rhs = rhs

        qfin, qneg = _finite_and_mask(q.scores)
        self.obj = qfin[vx, vy] - qfin[vt, vy]
        # positive where only the impostor side sits on a -inf score cell
        self.obj_blowup = qneg[vt, vy].astype(float) - qneg[vx, vy].astype(float)
        self.has_q_inf = bool(qneg[vx, vy].any() or qneg[vt, vy].any())

        if rho is not None:
            rfin, rneg = _finite_and_mask(rho.scores)
            self.score_row = rfin[vx, vz] - rfin[vt, vz]
            self.mass_row = rneg[vx, vz].astype(float) - rneg[vt, vz].astype(float)
            self.has_rho_inf = bool(rneg[vx, vz].any() or rneg[vt, vz].any())
        self.n = n

    def _solve(self, objective, extra_eq=(), extra_le=(), extra_ge=()):
        """Maximize objective under base rows plus extra constraint rows.

        extra_le rows mean row @ v <= rhs; slacks are appended internally.
        Returns (value, v) with value -inf if the system is infeasible.
        """
        n = self.n
        nle, nge = len(extra_le), len(extra_ge)
        width = n + nle + nge
        rows = []
        rhs = []
        for r, b in zip(self.base_rows, self.base_rhs):
            rows.append(np.concatenate([r, np.zeros(nle + nge)]))
            rhs.append(b)
        for r, b in extra_eq:
            rows.append(np.concatenate([r, np.zeros(nle + nge)]))
            rhs.append(b)
        for i, (r, b) in enumerate(extra_le):
            s = np.zeros(nle + nge)
            s[i] = 1.0
            rows.append(np.concatenate([r, s]))
            rhs.append(b)
        for i, (r, b) in enumerate(extra_ge):
            s = np.zeros(nle + nge)
            s[nle + i] = -1.0
            rows.append(np.concatenate([r, s]))
            rhs.append(b)
        c = np.concatenate([objective, np.zeros(nle + nge)])
        res = lp_solve(
            LinearProgram(c, np.vstack(rows), np.asarray(rhs, dtype=float)), self.cfg
        )
        if res.status == INFEASIBLE:
            return -math.inf, None
        return float(res.value), res.x[:n]

    def _branch_value(self, extra_eq, extra_le, extra_ge):
        """Max of the score-gap objective on one feasible branch."""
        if self.has_q_inf:
            t, v = self._solve(self.obj_blowup, extra_eq, extra_le, extra_ge)
            if t > self.cfg.feas_tol:
                return math.inf, v
            if t == -math.inf:
                return -math.inf, None
            extra_eq = list(extra_eq) + [(self.obj_blowup, 0.0)]
        return self._solve(self.obj, extra_eq, extra_le, extra_ge)

    def value(self) -> Tuple[float, Optional[np.ndarray]]:
        if not self.cells:
            # composition mass has nowhere to sit: vacuous membership
            return (-math.inf, None) if self.supp.size else (0.0, None)
        if self.rho is None:
            extra_eq = []
            for a in self.supp:
                for c in range(self.nz):
                    r = ((self._vx == a) & (self._vz == c)).astype(float) - (
                        (self._vt == a) & (self._vz == c)
                    ).astype(float)
                    if np.any(r != 0.0):
                        extra_eq.append((r, 0.0))
            return self._branch_value(extra_eq, [], [])
        if not self.has_rho_inf:
            return self._branch_value([], [(self.score_row, 0.0)], [])
        best, best_w = -math.inf, None
        t_star, _ = self._solve(self.mass_row, [], [], [])
        if t_star > self.cfg.feas_tol:
            v, w = self._branch_value([], [], [(self.mass_row, 0.0)])
            if v > best:
                best, best_w = v, w
        v, w = self._branch_value(
            [(self.mass_row, 0.0)], [(self.score_row, 0.0)], []
        )
        if v > best:
            best, best_w = v, w
        return best, best_w

    def dense_witness(self, v, nx: int, ny: int) -> np.ndarray:
        out = np.zeros((nx, ny, self.nz, nx))
        for val, (x, y, z, xt) in zip(v, self.vars):
            out[x, y, z, xt] = val
        return out


def _supported_cells(p_vec, tensor) -> List[Tuple[int, int, int]]:
    mask = (np.asarray(p_vec)[:, None, None] > MASS_TOL) & (tensor > MASS_TOL)
    return [tuple(int(i) for i in t) for t in np.argwhere(mask)]


def gamma_cc_membership(
    channel: BroadcastChannel,
    q: AdditiveMetric,
    rho: AdditiveMetric,
    composition,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> CcMembership:
    """Composition-relative eligibility of a broadcast channel.

    True iff no joint law with both X-marginals equal to the composition
    can strictly raise the first decoder's expected score while keeping
    the second decoder's expected score from rising.
    """
    nx, ny, nz = channel.shape
    if (q.num_inputs, q.num_outputs) != (nx, ny):
        raise DimensionMismatchError("metric q does not match the channel")
    if (rho.num_inputs, rho.num_outputs) != (nx, nz):
        raise DimensionMismatchError("metric rho does not match the channel")
    p = composition.probs if isinstance(composition, ProbVector) else ProbVector(composition).probs
    if p.size != nx:
        raise DimensionMismatchError("composition does not match the input alphabet")
    prog = _MembershipProgram(p, _supported_cells(p, channel.tensor), q, rho, nz, cfg)
    val, wit = prog.value()
    if val <= cfg.feas_tol:
        return CcMembership(True, val)
    dense = prog.dense_witness(wit, nx, ny) if wit is not None else None
    return CcMembership(False, val, dense)


def gamma_star_membership(
    channel: BroadcastChannel,
    q: AdditiveMetric,
    composition,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> CcMembership:
    """Metric-free variant: the impostor must copy the (X,Z) statistics."""
    nx, ny, nz = channel.shape
    if (q.num_inputs, q.num_outputs) != (nx, ny):
        raise DimensionMismatchError("metric q does not match the channel")
    p = composition.probs if isinstance(composition, ProbVector) else ProbVector(composition).probs
    if p.size != nx:
        raise DimensionMismatchError("composition does not match the input alphabet")
    prog = _MembershipProgram(p, _supported_cells(p, channel.tensor), q, None, nz, cfg)
    val, wit = prog.value()
    if val <= cfg.feas_tol:
        return CcMembership(True, val)
    dense = prog.dense_witness(wit, nx, ny) if wit is not None else None
    return CcMembership(False, val, dense)


def pattern_admissible(
    p_vec,
    cells: Sequence[Tuple[int, int, int]],
    q: AdditiveMetric,
    rho: Optional[AdditiveMetric],
    nz: int,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> bool:
    """Would any channel supported exactly inside these cells be a member?

    Membership depends on the channel only through its support, so this
    is the per-pattern admissibility test of the enumeration solver.
    """
    val, _ = _MembershipProgram(p_vec, cells, q, rho, nz, cfg).value()
    return val <= cfg.feas_tol


def maximal_admissible_patterns(
    p_vec,
    universe: Sequence[Tuple[int, int, int]],
    q: AdditiveMetric,
    rho: Optional[AdditiveMetric],
    nz: int,
    cfg: SolverConfig = DEFAULT_CONFIG,
    cache: Optional[dict] = None,
) -> List[Tuple[Tuple[int, int, int], ...]]:
    """All admissible cell sets not contained in a larger admissible one.

    Enumerated in decreasing cardinality (lexicographic within), so the
    returned order is deterministic.
    """
    universe = sorted(universe)
    if len(universe) > _ENUM_CELL_CAP:
        raise SizeCapError(
            f"{len(universe)} support cells exceed the enumeration cap of {_ENUM_CELL_CAP}"
        )
    supp_key = tuple(np.flatnonzero(np.asarray(p_vec) > MASS_TOL))
    maximal: List[Tuple[Tuple[int, int, int], ...]] = []
    for size in range(len(universe), 0, -1):
        for combo in itertools.combinations(universe, size):
            cell_set = set(combo)
            if any(cell_set <= set(m) for m in maximal):
                continue
            key = (supp_key, combo)
            if cache is not None and key in cache:
                ok = cache[key]
            else:
                ok = pattern_admissible(p_vec, combo, q, rho, nz, cfg)
                if cache is not None:
                    cache[key] = ok
            if ok:
                maximal.append(combo)
    return maximal


@dataclass(frozen=True)
class CcBoundResult:
    rate: RateValue
    argmax_input: ProbVector
    argmin_channel: Optional[BroadcastChannel]
    pattern: Optional[np.ndarray]  # boolean (nx,ny,nz) support of the argmin
    caveat: str


def _grid_resolution(nx: int) -> int:
    if nx == 2:
        return 50
    if nx == 3:
        return 20
    return 10


def cc_bound_desk(
    channel: StochasticMatrix,
    q: AdditiveMetric,
    rho: Optional[AdditiveMetric] = None,
    cfg: SolverConfig = DEFAULT_CONFIG,
    num_z: Optional[int] = None,
) -> CcBoundResult:
    """Support-enumeration converse bound at desk scale.

    rho=None runs the metric-free (equal (X,Z)-statistics) variant. The
    outer input-law maximization is a simplex grid, so the reported rate
    carries a grid-granularity caveat. An input law admitting no
    eligible support at all drives the bound to +infinity.
    """
    nx, ny = channel.num_inputs, channel.num_outputs
    if (q.num_inputs, q.num_outputs) != (nx, ny):
        raise DimensionMismatchError("metric q does not match the channel")
    if rho is not None and rho.num_inputs != nx:
        raise DimensionMismatchError("metric rho does not match the input alphabet")
    nz = num_z if num_z is not None else (rho.num_outputs if rho is not None else ny)
    if rho is not None and rho.num_outputs != nz:
        raise DimensionMismatchError("metric rho does not match the z alphabet")
    if nx * ny * nz > _ENUM_CELL_CAP:
        raise SizeCapError(
            f"alphabet product {nx * ny * nz} exceeds the enumeration cap of {_ENUM_CELL_CAP}"
        )

    resolution = _grid_resolution(nx)
    caveat = f"outer input-law grid at resolution 1/{resolution}"
    cache: dict = {}
    best_val = -math.inf
    best: Optional[tuple] = None  # (law, cells, fw_point, fw_cells_arr)

    for law in simplex_grid(nx, resolution):
        supp = np.flatnonzero(law > MASS_TOL)
        universe = [
            (int(x), int(y), int(z))
            for x in supp
            for y in np.flatnonzero(channel.rows[x] > 0.0)
            for z in range(nz)
        ]
        patterns = maximal_admissible_patterns(law, universe, q, rho, nz, cfg, cache)
        p_best = math.inf
        p_pick = None
        for cells in patterns:
            by_xy = {}
            for (x, y, z) in cells:
                by_xy.setdefault((x, y), []).append(z)
            if any(
                (x, y) not in by_xy
                for x in supp
                for y in np.flatnonzero(channel.rows[x] > 0.0)
            ):
                continue  # no channel with this support matches the Y-marginal
            groups = []
            pos = 0
            ordered = []
            for (x, y), zs in sorted(by_xy.items()):
                idx = np.arange(pos, pos + len(zs))
                ordered.extend((x, y, z) for z in sorted(zs))
                groups.append((float(channel.rows[x, y]), idx))
                pos += len(zs)
            cell_arr = np.array(ordered, dtype=int)
            x0 = np.concatenate(
                [np.full(idx.size, mass / idx.size) for mass, idx in groups]
            )
            res = _inner_min(law, cell_arr, groups, nx, nz, cfg, x0)
            if res.value < p_best - 1e-12:
                p_best = res.value
                p_pick = (cells, res.point, cell_arr)
        if p_pick is None:
            # nothing eligible at this law: the bound degenerates
            return CcBoundResult(
                rate=RateValue(math.inf),
                argmax_input=ProbVector(law),
                argmin_channel=None,
                pattern=None,
                caveat=caveat + "; an input law admitted no eligible support",
            )
        if p_best > best_val + 1e-12:
            best_val = p_best
            best = (law, *p_pick)

    law, cells, point, cell_arr = best
    # paranoia: the cache was filled at a same-support representative law;
    # re-certify the winning pattern at the winning law itself
    if not pattern_admissible(law, cells, q, rho, nz, cfg):
        raise RuntimeError("support-pattern admissibility failed its re-check")
    # off-support inputs carry no mass in the bound; give them a valid row
    tensor = np.broadcast_to(
        channel.rows[:, :, None] / nz, (nx, ny, nz)
    ).copy()
    supp = np.flatnonzero(law > MASS_TOL)
    tensor[supp] = 0.0
    tensor[cell_arr[:, 0], cell_arr[:, 1], cell_arr[:, 2]] = point
    mask = np.zeros((nx, ny, nz), dtype=bool)
    for (x, y, z) in cells:
        mask[x, y, z] = True
    return CcBoundResult(
        rate=RateValue(best_val),
        argmax_input=ProbVector(law),
        argmin_channel=BroadcastChannel(tensor),
        pattern=mask,
        caveat=caveat,
    )
