"""Dense linear programming and convex minimization over polytopes.

Everything here is sized for desk-scale problems (tens of variables, a
handful of constraints): a two-phase tableau simplex, an away-step
conditional-gradient loop, and brute-force simplex-grid search used as
test-time ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import ConvergenceError, EmptyFeasibleSetError, SizeCapError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_PIVOT_TOL = 1e-9
# consecutive degenerate pivots tolerated before switching to Bland's rule
_DEGENERATE_LIMIT = 50


@dataclass(frozen=True)
class SolverConfig:
    """Shared numeric knobs for every solver in the package."""

    feas_tol: float = 1e-9
    opt_tol: float = 1e-6
    max_iters: int = 100_000
    grid_resolution: int = 50

    def __post_init__(self):
        if self.feas_tol <= 0.0 or self.opt_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1 or self.grid_resolution < 1:
            raise ValueError("iteration and grid limits must be positive")


DEFAULT_CONFIG = SolverConfig()


@dataclass(frozen=True)
class LinearProgram:
    """maximize objective @ x  s.t.  equality_matrix @ x = equality_rhs, x >= 0."""

    objective: np.ndarray
    equality_matrix: np.ndarray
    equality_rhs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float)
        a = np.atleast_2d(np.asarray(self.equality_matrix, dtype=float))
        b = np.atleast_1d(np.asarray(self.equality_rhs, dtype=float))
        if c.ndim != 1 or a.shape != (b.size, c.size):
            raise ValueError(
                "inconsistent LP dimensions: c %s, A %s, b %s"
                % (c.shape, a.shape, b.shape)
            )
        if not (np.isfinite(a).all() and np.isfinite(b).all() and np.isfinite(c).all()):
            raise ValueError("LP data must be finite")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "equality_matrix", a)
        object.__setattr__(self, "equality_rhs", b)


@dataclass(frozen=True)
class LpResult:
    status: str
    value: Optional[float] = None
    x: Optional[np.ndarray] = None
    residual: Optional[float] = None


class _Unbounded(Exception):
    pass


def _pivot(tab, basis, row, col):
    tab[row] /= tab[row, col]
    hit = np.flatnonzero(np.abs(tab[:, col]) > 0.0)
    for i in hit:
        if i != row:
            tab[i] -= tab[i, col] * tab[row]
    basis[row] = col


def _run_simplex(tab, obj, basis, cfg, allowed, monotone=False):
    """Pivot until no allowed column has positive reduced cost.

    tab: m x (n+1) constraint rows [B^-1 A | B^-1 b]; obj: length n+1
    reduced-cost row [c - c_B B^-1 A | -value]. Both mutated in place.
    """
    degenerate = 0
    bland = False
    value = -obj[-1]
    for _ in range(cfg.max_iters):
        reduced = obj[:-1]
        cand = np.flatnonzero(allowed & (reduced > _PIVOT_TOL))
        if cand.size == 0:
            return
        col = int(cand[0]) if bland else int(cand[np.argmax(reduced[cand])])
        colvals = tab[:, col]
        pos = np.flatnonzero(colvals > _PIVOT_TOL)
        if pos.size == 0:
            raise _Unbounded()
        ratios = tab[pos, -1] / colvals[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-12]
        basis_arr = np.asarray(basis)
        row = int(ties[np.argmin(basis_arr[ties])])
        if best <= 1e-12:
            degenerate += 1
            if degenerate > _DEGENERATE_LIMIT:
                bland = True
        else:
            degenerate = 0
        # the objective row transforms like any other row
        if abs(obj[col]) > 0.0:
            fac = obj[col] / tab[row, col]
            obj -= fac * tab[row]
            obj[col] = 0.0
        _pivot(tab, basis, row, col)
        new_value = -obj[-1]
        if monotone and new_value < value - 1e-7 * max(1.0, abs(value)):
            raise ConvergenceError("simplex objective decreased; numerical drift")
        value = new_value
    raise ConvergenceError("simplex iteration cap reached")


def lp_solve(lp: LinearProgram, cfg: SolverConfig = DEFAULT_CONFIG) -> LpResult:
    """Two-phase dense simplex for small equality-form LPs."""
    a0 = lp.equality_matrix
    b0 = lp.equality_rhs
    c = lp.objective
    m, n = a0.shape

    a = a0.copy()
    b = b0.copy()
    flip = b < 0
    a[flip] *= -1.0
    b[flip] *= -1.0

    # phase 1: artificial variable per row, maximize minus their sum
    tab = np.hstack([a, np.eye(m), b[:, None]])
    basis = list(range(n, n + m))
    obj = np.zeros(n + m + 1)
    obj[:n] = tab[:, :n].sum(axis=0)
    obj[-1] = b.sum()
    allowed = np.zeros(n + m, dtype=bool)
    allowed[:n] = True
    try:
        _run_simplex(tab, obj, basis, cfg, allowed)
    except _Unbounded:  # cannot happen: phase-1 objective is bounded by 0
        raise ConvergenceError("phase-1 reported unbounded; numerical drift")

    residual = float(obj[-1])
    scale = max(1.0, float(np.max(np.abs(b)))) if m else 1.0
    if residual > cfg.feas_tol * scale:
        return LpResult(INFEASIBLE, residual=residual)

    # drive artificials out of the basis; rows that cannot pivot are redundant
    drop = []
    for i in range(m):
        if basis[i] < n:
            continue
        piv = np.flatnonzero(np.abs(tab[i, :n]) > 1e-9)
        piv = [j for j in piv if j not in basis]
        if piv:
            _pivot(tab, basis, i, int(piv[0]))
        else:
            drop.append(i)
    keep = [i for i in range(m) if i not in drop]
    tab2 = np.hstack([tab[keep][:, :n], tab[keep][:, -1:]])
    basis = [basis[i] for i in keep]

    # phase 2: rebuild the reduced-cost row for the real objective
    obj2 = np.empty(n + 1)
    cb = c[basis] if basis else np.zeros(0)
    obj2[:n] = c - cb @ tab2[:, :n]
    obj2[-1] = -float(cb @ tab2[:, -1])
    obj2[basis] = 0.0
    try:
        _run_simplex(tab2, obj2, basis, cfg, np.ones(n, dtype=bool), monotone=True)
    except _Unbounded:
        return LpResult(UNBOUNDED)

    x = np.zeros(n)
    x[basis] = tab2[:, -1]
    if x.min() < -cfg.feas_tol:
        raise ConvergenceError("simplex produced a negative basic value")
    x = np.clip(x, 0.0, None)
    err = float(np.max(np.abs(a0 @ x - b0))) if m else 0.0
    if err > 1e3 * cfg.feas_tol * scale:
        raise ConvergenceError("simplex solution violates constraints; drift")
    return LpResult(OPTIMAL, value=float(c @ x), x=x)


class FwResult(NamedTuple):
    value: float
    point: np.ndarray
    gap: float
    iterations: int


def _vertex_key(v):
    return np.round(v, 12).tobytes()


def _search_step(f, x, d, gmax, g0d):
    """Minimize the convex restriction gamma -> f(x + gamma d) on [0, gmax].

    Root-finds the directional derivative with a secant/bisection hybrid;
    g0d is the (negative) derivative at 0, already known by the caller.
    """
    _, ghi = f(x + gmax * d)
    hi_d = float(ghi @ d)
    if hi_d <= 0.0:
        return gmax
    lo, hi = 0.0, gmax
    lo_d, cur_hi_d = g0d, hi_d
    for _ in range(60):
        # secant guess, guarded to stay inside the bracket
        denom = cur_hi_d - lo_d
        mid = hi - cur_hi_d * (hi - lo) / denom if denom > 0 else 0.5 * (lo + hi)
        if not (lo < mid < hi):
            mid = 0.5 * (lo + hi)
        _, gm = f(x + mid * d)
        md = float(gm @ d)
        if md > 0.0:
            hi, cur_hi_d = mid, md
        else:
            lo, lo_d = mid, md
        if hi - lo < 1e-12 * max(1.0, gmax):
            break
    return 0.5 * (lo + hi)


def min_convex_over_polytope(
    f: Callable[[np.ndarray], tuple],
    polytope: Optional[LinearProgram] = None,
    cfg: SolverConfig = DEFAULT_CONFIG,
    x0: Optional[np.ndarray] = None,
    lmo: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> FwResult:
    """Away-step conditional gradient.

    f(x) must return (value, gradient). Stops once the linearization gap
    falls below cfg.opt_tol, which for convex f brackets the true minimum.
    Either a polytope (equality form, x >= 0) or a custom linear
    minimization oracle must be supplied.
    """
    if lmo is None:
        if polytope is None:
            raise ValueError("need a polytope or a custom lmo")
        a, b = polytope.equality_matrix, polytope.equality_rhs

        def lmo(g, _a=a, _b=b):
            res = lp_solve(LinearProgram(-g, _a, _b), cfg)
            if res.status == INFEASIBLE:
                raise EmptyFeasibleSetError(
                    "feasible set is empty", certificate=res.residual
                )
            if res.status == UNBOUNDED:
                raise ValueError("polytope is unbounded")
            return res.x

    if x0 is None:
        if polytope is None:
            raise ValueError("x0 is required when only an lmo is given")
        x0 = lmo(np.zeros(polytope.objective.size))

    x = np.array(x0, dtype=float)
    active = {_vertex_key(x): [x.copy(), 1.0]}
    gap = math.inf
    val, grad = f(x)
    it = 0
    for it in range(1, cfg.max_iters + 1):
        s = lmo(grad)
        gap = float(grad @ (x - s))
        if gap < cfg.opt_tol:
            break
        # away vertex: worst active atom under the current gradient
        away_key = max(active, key=lambda k: float(grad @ active[k][0]))
        a_vec, a_w = active[away_key]
        use_fw = float(grad @ (x - s)) >= float(grad @ (a_vec - x))
        if use_fw:
            d = s - x
            gmax = 1.0
        else:
            d = x - a_vec
            gmax = a_w / (1.0 - a_w) if a_w < 1.0 else 0.0
            if gmax <= 0.0:
                d = s - x
                gmax = 1.0
                use_fw = True
        g0d = float(grad @ d)
        if g0d >= 0.0:
            break  # no descent available in either direction
        gamma = _search_step(f, x, d, gmax, g0d)
        if gamma <= 0.0:
            break
        if use_fw:
            for rec in active.values():
                rec[1] *= 1.0 - gamma
            key = _vertex_key(s)
            if key in active:
                active[key][1] += gamma
            else:
                active[key] = [s.copy(), gamma]
        else:
            for rec in active.values():
                rec[1] *= 1.0 + gamma
            active[away_key][1] -= gamma
        for key in [k for k, rec in active.items() if rec[1] < 1e-15]:
            del active[key]
        total = sum(rec[1] for rec in active.values())
        x = sum(rec[0] * (rec[1] / total) for rec in active.values())
        val, grad = f(x)
    else:
        raise ConvergenceError(
            "conditional gradient hit the iteration cap",
            lower=val - gap,
            upper=val,
        )
    return FwResult(float(val), x, float(gap), it)


def _count_grid(dim, resolution):
    return math.comb(resolution + dim - 1, dim - 1)


def simplex_grid(dim: int, resolution: int):
    """Yield every probability vector with entries i/resolution, lexicographic."""
    if dim < 1:
        raise ValueError("dim must be positive")

    def rec(total, parts):
        if parts == 1:
            yield (total,)
            return
        for head in range(total + 1):
            for rest in rec(total - head, parts - 1):
                yield (head,) + rest

    for combo in rec(resolution, dim):
        yield np.asarray(combo, dtype=float) / resolution


def grid_minimax_oracle(
    inner_value: Callable[[np.ndarray], float],
    dim: int,
    resolution: int,
    cap: int = 10_000_000,
) -> float:
    """Brute-force outer maximization over a gridded input simplex.

    inner_value(p) must itself solve (or lower-bound) the inner
    minimization; this routine only supplies the outer grid sweep.
    """
    if _count_grid(dim, resolution) > cap:
        raise SizeCapError("input-law grid exceeds the size cap")
    best = -math.inf
    for p in simplex_grid(dim, resolution):
        best = max(best, float(inner_value(p)))
    return best
