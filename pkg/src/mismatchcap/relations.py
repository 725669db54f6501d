"""Comparisons between channel-metric pairs via surely-degraded couplings.

A pair (W1, q) dominates (W2, rho) when some broadcast channel couples
W1 and W2 so that every mass-carrying triple lets the first input win
both score comparisons; the coupling is the certificate. Domination in
both directions is an isomorphism, and a two-link isomorphism chain to
a channel equipped with its own log-likelihood metric pins the metric's
capacity exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .cc_bounds import gamma_cc_membership, maximal_admissible_patterns
from .errors import CompositionOrderError, DimensionMismatchError, SizeCapError
from .metrics import (
    DEFAULT_TIE_TOL,
    MASS_TOL,
    AdditiveMetric,
    SupportPattern,
    gamma_membership,
    log_likelihood_metric,
)
from .optim import DEFAULT_CONFIG, OPTIMAL, LinearProgram, SolverConfig, lp_solve, simplex_grid
from .probability import (
    BroadcastChannel,
    ProbVector,
    RateValue,
    StochasticMatrix,
    channel_capacity,
    compose_channels,
)

_MARGINAL_TOL = 1e-8


@dataclass(frozen=True)
class RelationCertificate:
    """A coupling witnessing domination, with its bookkeeping."""

    direction: str  # "forward" | "backward" | "both"
    coupling: BroadcastChannel
    residuals: np.ndarray  # per-input worst marginal deviation
    composition: Optional[ProbVector] = None  # set for composition-relative couplings


@dataclass(frozen=True)
class SuperiorResult:
    holds: bool
    certificate: Optional[RelationCertificate]
    blocking: Optional[int] = None  # first input whose coupling slice is infeasible

    def __bool__(self):
        return self.holds

    def __iter__(self):
        return iter((self.holds, self.certificate))


@dataclass(frozen=True)
class IsomorphicResult:
    holds: bool
    forward: Optional[RelationCertificate]
    backward: Optional[RelationCertificate]

    def __bool__(self):
        return self.holds

    def __iter__(self):
        return iter((self.holds, (self.forward, self.backward)))


def _residuals(coupling: BroadcastChannel, first: StochasticMatrix,
               second: StochasticMatrix) -> np.ndarray:
    ry = np.abs(coupling.y_marginal().rows - first.rows).max(axis=1)
    rz = np.abs(coupling.z_marginal().rows - second.rows).max(axis=1)
    res = np.maximum(ry, rz)
    if res.max() > _MARGINAL_TOL:
        raise RuntimeError(
            f"certificate marginals drifted to {res.max():.2e}; solver bug"
        )
    return res


def _transport_slice(row_marg, col_marg, allowed, cfg: SolverConfig):
    """Joint (ny, nz) law with the given marginals supported inside allowed.

    Returns None when no such law exists.
    """
    ny, nz = allowed.shape
    rows_pos = np.flatnonzero(row_marg > 0.0)
    cols_pos = np.flatnonzero(col_marg > 0.0)
    cells = [
        (int(y), int(z)) for y in rows_pos for z in cols_pos if allowed[y, z]
    ]
    have_rows = {y for y, _ in cells}
    have_cols = {z for _, z in cells}
    if any(int(y) not in have_rows for y in rows_pos):
        return None
    if any(int(z) not in have_cols for z in cols_pos):
        return None
    n = len(cells)
    eq = []
    rhs = []
    for y in rows_pos:
        eq.append([1.0 if cy == y else 0.0 for cy, _ in cells])
        rhs.append(float(row_marg[y]))
    for z in cols_pos:
        eq.append([1.0 if cz == z else 0.0 for _, cz in cells])
        rhs.append(float(col_marg[z]))
    res = lp_solve(
        LinearProgram(np.zeros(n), np.asarray(eq), np.asarray(rhs)), cfg
    )
    if res.status != OPTIMAL:
        return None
    out = np.zeros((ny, nz))
    for v, (y, z) in zip(res.x, cells):
        out[y, z] = v
    return out


def superior(
    first: StochasticMatrix,
    q: AdditiveMetric,
    second: StochasticMatrix,
    rho: AdditiveMetric,
    cfg: SolverConfig = DEFAULT_CONFIG,
    tie_tol: float = DEFAULT_TIE_TOL,
) -> SuperiorResult:
    """Does (first, q) dominate (second, rho)?

    Decided one input at a time: each slice is a transportation problem
    between the two output rows restricted to tilt-attaining triples.
    """
    nx = first.num_inputs
    if second.num_inputs != nx:
        raise DimensionMismatchError("channels disagree on the input alphabet")
    if (q.num_inputs, q.num_outputs) != (nx, first.num_outputs):
        raise DimensionMismatchError("metric q does not match the first channel")
    if (rho.num_inputs, rho.num_outputs) != (nx, second.num_outputs):
        raise DimensionMismatchError("metric rho does not match the second channel")
    allowed = SupportPattern.from_metrics(q, rho, tie_tol).allowed
    tensor = np.zeros((nx, first.num_outputs, second.num_outputs))
    for x in range(nx):
        piece = _transport_slice(first.rows[x], second.rows[x], allowed[x], cfg)
        if piece is None:
            return SuperiorResult(False, None, blocking=x)
        tensor[x] = piece
    coupling = BroadcastChannel(tensor)
    mem = gamma_membership(coupling, q, rho, tie_tol)
    if not mem:
        raise RuntimeError(
            f"transportation solution left the eligible support at {mem.witness}"
        )
    cert = RelationCertificate(
        direction="forward",
        coupling=coupling,
        residuals=_residuals(coupling, first, second),
    )
    return SuperiorResult(True, cert)


def isomorphic(
    first: StochasticMatrix,
    q: AdditiveMetric,
    second: StochasticMatrix,
    rho: AdditiveMetric,
    cfg: SolverConfig = DEFAULT_CONFIG,
    tie_tol: float = DEFAULT_TIE_TOL,
) -> IsomorphicResult:
    """Domination in both directions."""
    fwd = superior(first, q, second, rho, cfg, tie_tol)
    if not fwd.holds:
        return IsomorphicResult(False, None, None)
    bwd = superior(second, rho, first, q, cfg, tie_tol)
    if not bwd.holds:
        return IsomorphicResult(False, fwd.certificate, None)
    back = RelationCertificate(
        direction="backward",
        coupling=bwd.certificate.coupling,
        residuals=bwd.certificate.residuals,
    )
    return IsomorphicResult(True, fwd.certificate, back)


def compose_superiority(
    cert12: RelationCertificate,
    cert23: RelationCertificate,
    q1: AdditiveMetric,
    q3: AdditiveMetric,
    cfg: SolverConfig = DEFAULT_CONFIG,
    tie_tol: float = DEFAULT_TIE_TOL,
) -> RelationCertificate:
    """Chain two domination certificates through the shared middle alphabet.

    The composed coupling must again be eligible for (q1, q3); a failure
    here means a corrupted certificate, not a routine infeasibility.
    """
    composed = compose_channels(cert12.coupling, cert23.coupling)
    mem = gamma_membership(composed, q1, q3, tie_tol)
    if not mem:
        raise CompositionOrderError(
            f"composed coupling left the eligible support at {mem.witness} "
            f"(mass {mem.witness_mass:.3e})"
        )
    return RelationCertificate(
        direction="forward",
        coupling=composed,
        residuals=_residuals(
            composed, cert12.coupling.y_marginal(), cert23.coupling.z_marginal()
        ),
    )


def superior_cc(
    composition,
    first: StochasticMatrix,
    q: AdditiveMetric,
    second: StochasticMatrix,
    rho: AdditiveMetric,
    cfg: SolverConfig = DEFAULT_CONFIG,
    tie_tol: float = DEFAULT_TIE_TOL,
) -> SuperiorResult:
    """Composition-relative domination of (second, rho) by (first, q).

    Cheap couplings are tried first (a plain dominating coupling, the
    duplicated-output one, the independent product); only when all of
    them miss does the solver fall back to exhaustive support-pattern
    enumeration, which is capped at desk scale.
    """
    nx = first.num_inputs
    if second.num_inputs != nx:
        raise DimensionMismatchError("channels disagree on the input alphabet")
    p = composition if isinstance(composition, ProbVector) else ProbVector(composition)
    if len(p) != nx:
        raise DimensionMismatchError("composition does not match the input alphabet")
    ny, nz = first.num_outputs, second.num_outputs

    guesses = []
    rect = superior(first, q, second, rho, cfg, tie_tol)
    if rect.holds:
        guesses.append(rect.certificate.coupling)
    if ny == nz and np.allclose(first.rows, second.rows):
        guesses.append(BroadcastChannel.splice(first))
    guesses.append(BroadcastChannel.independent(first, second))
    for coupling in guesses:
        if gamma_cc_membership(coupling, q, rho, p, cfg):
            cert = RelationCertificate(
                direction="forward",
                coupling=coupling,
                residuals=_residuals(coupling, first, second),
                composition=p,
            )
            return SuperiorResult(True, cert)

    supp = [x for x in range(nx) if p[x] > MASS_TOL]
    universe = [
        (x, int(y), int(z))
        for x in supp
        for y in np.flatnonzero(first.rows[x] > 0.0)
        for z in np.flatnonzero(second.rows[x] > 0.0)
    ]
    patterns = maximal_admissible_patterns(p.probs, universe, q, rho, nz, cfg)
    for cells in patterns:
        mask = np.zeros((nx, ny, nz), dtype=bool)
        for (x, y, z) in cells:
            mask[x, y, z] = True
        tensor = np.zeros((nx, ny, nz))
        ok = True
        for x in range(nx):
            if x not in supp:
                # membership never sees this input; any coupling row works
                tensor[x] = first.rows[x][:, None] * second.rows[x][None, :]
                continue
            piece = _transport_slice(first.rows[x], second.rows[x], mask[x], cfg)
            if piece is None:
                ok = False
                break
            tensor[x] = piece
        if not ok:
            continue
        coupling = BroadcastChannel(tensor)
        mem = gamma_cc_membership(coupling, q, rho, p, cfg)
        if not mem:
            raise RuntimeError(
                "coupling built inside an eligible support failed membership; "
                f"LP value {mem.lp_value:.3e}"
            )
        cert = RelationCertificate(
            direction="forward",
            coupling=coupling,
            residuals=_residuals(coupling, first, second),
            composition=p,
        )
        return SuperiorResult(True, cert)
    return SuperiorResult(False, None)


def tightness_certificate(
    channel: StochasticMatrix,
    q: AdditiveMetric,
    candidate: StochasticMatrix,
    cfg: SolverConfig = DEFAULT_CONFIG,
    tie_tol: float = DEFAULT_TIE_TOL,
) -> Tuple[bool, RateValue]:
    """Certify that the metric's capacity equals the candidate's capacity.

    Two links are checked: (channel, q) equivalent to (candidate, q), and
    (candidate, q) equivalent to (candidate, log candidate). Links that
    fail as plain relations are retried relative to the candidate's
    capacity-achieving input law, which is the composition the chain is
    ultimately evaluated at. Returns the candidate's capacity either way;
    it certifies the metric's capacity only when the flag is true.
    """
    if candidate.num_inputs != channel.num_inputs:
        raise DimensionMismatchError("candidate disagrees on the input alphabet")
    matched = log_likelihood_metric(candidate)
    capacity, p_star = channel_capacity(candidate)

    def link(w1, m1, w2, m2) -> bool:
        if isomorphic(w1, m1, w2, m2, cfg, tie_tol).holds:
            return True
        try:
            if not superior_cc(p_star, w1, m1, w2, m2, cfg, tie_tol).holds:
                return False
            return superior_cc(p_star, w2, m2, w1, m1, cfg, tie_tol).holds
        except SizeCapError:
            return False

    ok = link(channel, q, candidate, q) and link(candidate, q, candidate, matched)
    return ok, capacity


def matched_pair_scan(
    channel: StochasticMatrix,
    q: AdditiveMetric,
    cfg: SolverConfig = DEFAULT_CONFIG,
    resolution: int = 20,
) -> Optional[Tuple[StochasticMatrix, RateValue]]:
    """Grid search for a binary candidate that certifies tightness.

    Only binary-input channels with binary candidates are scanned; the
    grid walks both candidate rows. Returns the first certified hit.
    """
    if channel.num_inputs != 2:
        raise SizeCapError("matched-pair scan supports binary input alphabets only")
    rows = [g for g in simplex_grid(2, resolution)]
    for r0 in rows:
        for r1 in rows:
            candidate = StochasticMatrix(np.vstack([r0, r1]))
            ok, capacity = tightness_certificate(channel, q, candidate, cfg)
            if ok:
                return candidate, capacity
    return None
