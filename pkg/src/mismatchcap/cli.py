"""Command-line front end: problem files, dispatch, trace serialization.

A problem file is one JSON document holding the channel, the decoding
metric, optional named comparison metrics, and optional extras (input
law, candidate channel, coupling). Scores may be the string "-inf".

Exit codes: 0 success, 1 infeasible or false relation (certificate is
printed), 2 malformed input, 3 solver non-convergence (bracket printed).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from typing import Optional

import numpy as np

from .achievable import gmi_rate, lm_rate, lm_rate_max
from .cc_bounds import cc_bound_desk, gamma_cc_membership, gamma_star_membership
from .converse import BoundResult, export_trace, kg_bound, sd_bound
from .errors import (
    ConvergenceError,
    DimensionMismatchError,
    EmptyFeasibleSetError,
    InvalidDistributionError,
    MalformedInputError,
    SizeCapError,
)
from .metrics import AdditiveMetric, gamma_membership, gamma_nonempty_given_marginal
from .optim import DEFAULT_CONFIG, SolverConfig
from .probability import (
    LOG2E,
    BroadcastChannel,
    ProbVector,
    RateValue,
    StochasticMatrix,
    channel_capacity,
    correct_decoding_exponent,
)
from .relations import isomorphic, superior, tightness_certificate
from .simulate import (
    MODE_CONSTANT_COMPOSITION,
    MODE_IID,
    SimConfig,
    simulate_containment,
)


@dataclasses.dataclass(frozen=True)
class Problem:
    """Parsed problem file."""

    num_x: int
    num_y: int
    num_z: Optional[int]
    channel: StochasticMatrix
    metric: AdditiveMetric
    rhos: dict  # name -> AdditiveMetric
    composition: Optional[ProbVector]
    candidate: Optional[StochasticMatrix]
    coupling: Optional[BroadcastChannel]


def _score_array(raw, what: str) -> AdditiveMetric:
    def conv(v):
        if isinstance(v, str):
            if v.strip().lower() in ("-inf", "-infinity"):
                return -math.inf
            raise MalformedInputError(f"{what} has a non-numeric entry {v!r}")
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise MalformedInputError(f"{what} has a non-numeric entry {v!r}")
        return float(v)

    try:
        arr = np.array([[conv(v) for v in row] for row in raw], dtype=float)
    except (TypeError, ValueError) as exc:
        raise MalformedInputError(f"{what} is not a rectangular matrix") from exc
    return AdditiveMetric(arr, log_metric=bool(np.isneginf(arr).any()))


def _shape_check(name, got, want):
    if got != want:
        raise MalformedInputError(f"{name} has shape {got}, declared sizes need {want}")


def parse_problem(text: str) -> Problem:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInputError(f"problem file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedInputError("problem file must be a JSON object")
    for key in ("X", "Y", "W", "q"):
        if key not in doc:
            raise MalformedInputError(f"problem file is missing the {key!r} field")
    nx, ny = int(doc["X"]), int(doc["Y"])
    nz = int(doc["Z"]) if "Z" in doc else None

    try:
        channel = StochasticMatrix(doc["W"])
    except (InvalidDistributionError, ValueError) as exc:
        raise MalformedInputError(f"W is not a channel matrix: {exc}") from exc
    _shape_check("W", (channel.num_inputs, channel.num_outputs), (nx, ny))

    metric = _score_array(doc["q"], "q")
    _shape_check("q", (metric.num_inputs, metric.num_outputs), (nx, ny))

    rhos = {}
    if "rho" in doc:
        raw = doc["rho"]
        if not isinstance(raw, dict):
            raw = {"rho": raw}  # a bare matrix gets a default name
        for name, mat in raw.items():
            m = _score_array(mat, f"rho[{name}]")
            if nz is None:
                nz = m.num_outputs
            _shape_check(f"rho[{name}]", (m.num_inputs, m.num_outputs), (nx, nz))
            rhos[name] = m

    composition = None
    if "P" in doc:
        try:
            composition = ProbVector(doc["P"])
        except (InvalidDistributionError, ValueError) as exc:
            raise MalformedInputError(f"P is not a probability vector: {exc}") from exc
        if len(composition) != nx:
            raise MalformedInputError("P length does not match the input alphabet")

    candidate = None
    if "candidate" in doc:
        try:
            candidate = StochasticMatrix(doc["candidate"])
        except (InvalidDistributionError, ValueError) as exc:
            raise MalformedInputError(f"candidate is not a channel matrix: {exc}") from exc
        if nz is None:
            nz = candidate.num_outputs
        _shape_check("candidate", (candidate.num_inputs, candidate.num_outputs), (nx, nz))

    coupling = None
    if "coupling" in doc:
        try:
            coupling = BroadcastChannel(np.array(doc["coupling"], dtype=float))
        except (InvalidDistributionError, ValueError) as exc:
            raise MalformedInputError(f"coupling is not a broadcast tensor: {exc}") from exc
        if nz is None:
            nz = coupling.shape[2]
        _shape_check("coupling", coupling.shape, (nx, ny, nz))

    return Problem(nx, ny, nz, channel, metric, rhos, composition, candidate, coupling)


def serialize_problem(problem: Problem) -> str:
    def scores(metric):
        return [
            ["-inf" if math.isinf(v) else v for v in row] for row in metric.scores
        ]

    doc = {
        "X": problem.num_x,
        "Y": problem.num_y,
        "W": problem.channel.rows.tolist(),
        "q": scores(problem.metric),
    }
    if problem.num_z is not None:
        doc["Z"] = problem.num_z
    if problem.rhos:
        doc["rho"] = {name: scores(m) for name, m in problem.rhos.items()}
    if problem.composition is not None:
        doc["P"] = problem.composition.probs.tolist()
    if problem.candidate is not None:
        doc["candidate"] = problem.candidate.rows.tolist()
    if problem.coupling is not None:
        doc["coupling"] = problem.coupling.tensor.tolist()
    return json.dumps(doc, indent=2)


def emit_trace(path: str, result: BoundResult) -> None:
    """CSV trace: header t,value_bits; LF endings; 10 significant digits."""
    lines = ["t,value_bits"]
    for t, bits in export_trace(result):
        lines.append("%d,%.10g" % (t, bits))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        if math.isnan(obj):
            return "nan"
        return obj
    if isinstance(obj, (np.floating, np.integer)):
        return _jsonable(obj.item())
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    return obj


class _Reporter:
    """Accumulates the structured record; prints text or JSON at the end."""

    def __init__(self, command: str, unit_bits: bool, as_json: bool):
        self.record = {"command": command, "unit": "bits-per-use" if unit_bits else "nats-per-use"}
        self.unit_bits = unit_bits
        self.as_json = as_json
        self.lines = []

    def rate(self, key: str, value: RateValue, label: Optional[str] = None):
        shown = value.bits if self.unit_bits else value.nats
        self.record[key + "_bits"] = value.bits
        self.record[key + "_nats"] = value.nats
        self.record[key] = shown
        unit = "bits" if self.unit_bits else "nats"
        self.lines.append("%s: %.10g %s" % (label or key, shown, unit))

    def field(self, key: str, value, text: Optional[str] = None):
        self.record[key] = _jsonable(value)
        self.lines.append(text if text is not None else f"{key}: {value}")

    def matrix(self, key: str, arr, label: Optional[str] = None):
        self.record[key] = _jsonable(np.asarray(arr))
        self.lines.append((label or key) + ":")
        for row in np.atleast_2d(np.asarray(arr)):
            self.lines.append("  " + " ".join("%.6f" % v for v in row))

    def emit(self) -> None:
        if self.as_json:
            print(json.dumps(_jsonable(self.record), indent=2))
        else:
            print("\n".join(self.lines))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mismatchcap",
        description="Decode-metric capacity bounds, relations, and simulations.",
    )
    p.add_argument("command", choices=[
        "capacity", "gmi", "lm", "bound-kg", "bound-sd", "bound-cc",
        "gamma-check", "gamma-cc-check", "superior", "isomorphic",
        "tightness", "simulate", "exponent",
    ])
    p.add_argument("problem", help="path to a JSON problem file")
    units = p.add_mutually_exclusive_group()
    units.add_argument("--bits", dest="bits", action="store_true", default=True)
    units.add_argument("--nats", dest="bits", action="store_false")
    p.add_argument("--tol", type=float, default=None, help="solver optimization tolerance")
    p.add_argument("--trace", default=None, help="write an iteration trace CSV here")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (required for simulate)")
    p.add_argument("--json", dest="as_json", action="store_true", help="machine-readable output")
    p.add_argument("--rho", default=None, help="name of the comparison metric to use")
    p.add_argument("--star", action="store_true", help="bound-cc: equal-statistics variant")
    p.add_argument("--rate", type=float, default=None, help="exponent: rate in the selected unit")
    p.add_argument("--blocklength", type=int, default=20)
    p.add_argument("--codebook-size", type=int, default=8)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--mode", choices=[MODE_CONSTANT_COMPOSITION, MODE_IID],
                   default=MODE_CONSTANT_COMPOSITION)
    p.add_argument("--no-membership-check", dest="check_membership",
                   action="store_false", default=True)
    return p


def _pick_rho(problem: Problem, args, required: bool = True):
    if args.rho is not None:
        if args.rho not in problem.rhos:
            raise MalformedInputError(f"no comparison metric named {args.rho!r} in the file")
        return {args.rho: problem.rhos[args.rho]}
    if problem.rhos:
        return dict(problem.rhos)
    if required:
        raise MalformedInputError("this command needs a rho entry in the problem file")
    return {}


def _need(problem_field, name: str):
    if problem_field is None:
        raise MalformedInputError(f"this command needs a {name} entry in the problem file")
    return problem_field


def _cfg(args) -> SolverConfig:
    if args.tol is None:
        return DEFAULT_CONFIG
    if args.tol <= 0:
        raise MalformedInputError("--tol must be positive")
    return dataclasses.replace(DEFAULT_CONFIG, opt_tol=float(args.tol))


def _bound_report(rep: _Reporter, result: BoundResult):
    rep.rate("rate", result.rate)
    rep.matrix("argmax_input", result.argmax_input.probs, "argmax input law")
    rep.matrix("argmin_z_marginal", result.argmin_channel.z_marginal().rows,
               "argmin z-marginal")
    if result.bracket is not None:
        lo, hi = result.bracket
        scale = LOG2E if rep.unit_bits else 1.0
        rep.field("bracket", [lo * scale, hi * scale],
                  "bracket: [%.10g, %.10g]" % (lo * scale, hi * scale))


def _dispatch(args, problem: Problem) -> int:
    cfg = _cfg(args)
    rep = _Reporter(args.command, args.bits, args.as_json)
    cmd = args.command

    if cmd == "capacity":
        value, achiever = channel_capacity(problem.channel)
        rep.rate("rate", value)
        rep.matrix("argmax_input", achiever.probs, "argmax input law")

    elif cmd == "gmi":
        law = _need(problem.composition, "P")
        rep.rate("rate", gmi_rate(problem.channel, problem.metric, law, cfg))

    elif cmd == "lm":
        if problem.composition is not None:
            rep.rate("rate", lm_rate(problem.channel, problem.metric,
                                     problem.composition, cfg))
        else:
            value, law = lm_rate_max(problem.channel, problem.metric, cfg)
            rep.rate("rate", value)
            rep.matrix("argmax_input", law.probs, "argmax input law")

    elif cmd == "bound-kg":
        result = kg_bound(problem.channel, problem.metric, cfg)
        _bound_report(rep, result)
        if args.trace:
            emit_trace(args.trace, result)

    elif cmd == "bound-sd":
        rhos = _pick_rho(problem, args)
        best_name, best_result, empties = None, None, {}
        for name, rho in sorted(rhos.items()):
            try:
                result = sd_bound(problem.channel, problem.metric, rho, cfg)
            except EmptyFeasibleSetError as exc:
                empties[name] = exc.certificate
                rep.field(f"candidate_{name}", "empty",
                          f"candidate {name}: empty feasible set "
                          f"(blocking pair {exc.certificate})")
                continue
            rep.rate(f"candidate_{name}", result.rate, f"candidate {name}")
            if best_result is None or result.rate.nats < best_result.rate.nats:
                best_name, best_result = name, result
        if best_result is None:
            rep.field("status", "empty", "every candidate produced an empty feasible set")
            rep.emit()
            return 1
        rep.rate("rate", best_result.rate, f"minimum (candidate {best_name})")
        rep.field("argmin_candidate", best_name)
        _bound_report(rep, best_result)
        if args.trace:
            emit_trace(args.trace, best_result)

    elif cmd == "bound-cc":
        if args.star:
            result = cc_bound_desk(problem.channel, problem.metric, None, cfg,
                                   num_z=problem.num_z)
        else:
            rhos = _pick_rho(problem, args)
            if len(rhos) != 1:
                raise MalformedInputError(
                    "bound-cc needs exactly one rho (use --rho to select)")
            ((name, rho),) = rhos.items()
            rep.field("rho", name)
            result = cc_bound_desk(problem.channel, problem.metric, rho, cfg)
        if math.isinf(result.rate.nats):
            rep.field("rate", "inf",
                      "rate: unbounded (an input law admitted no eligible support)")
            rep.matrix("argmax_input", result.argmax_input.probs, "argmax input law")
        else:
            rep.rate("rate", result.rate)
            rep.matrix("argmax_input", result.argmax_input.probs, "argmax input law")
            rep.matrix("argmin_z_marginal",
                       result.argmin_channel.z_marginal().rows, "argmin z-marginal")
            rep.field("pattern", np.argwhere(result.pattern),
                      "pattern cells: " + " ".join(
                          str(tuple(c)) for c in np.argwhere(result.pattern)))
        rep.field("caveat", result.caveat, f"caveat: {result.caveat}")

    elif cmd == "gamma-check":
        rhos = _pick_rho(problem, args)
        if len(rhos) != 1:
            raise MalformedInputError(
                "gamma-check needs exactly one rho (use --rho to select)")
        ((name, rho),) = rhos.items()
        feas = gamma_nonempty_given_marginal(problem.channel, problem.metric, rho)
        if not feas:
            rep.field("feasible", False)
            rep.field("blocking", list(feas.blocking),
                      f"blocking pair (x, y) = {feas.blocking}")
            rep.emit()
            return 1
        rep.field("feasible", True)
        rep.field("certificate", feas.certificate.tensor,
                  "a coupling with the given first marginal exists")

    elif cmd == "gamma-cc-check":
        coupling = _need(problem.coupling, "coupling")
        law = _need(problem.composition, "P")
        rhos = _pick_rho(problem, args)
        if len(rhos) != 1:
            raise MalformedInputError(
                "gamma-cc-check needs exactly one rho (use --rho to select)")
        ((name, rho),) = rhos.items()
        mem = gamma_cc_membership(coupling, problem.metric, rho, law, cfg)
        rep.field("member", bool(mem))
        rep.field("lp_value", mem.lp_value,
                  "score-gap LP value: %.3e" % mem.lp_value)
        if not mem:
            if mem.witness is not None:
                rep.field("witness", mem.witness)
            rep.emit()
            return 1

    elif cmd in ("superior", "isomorphic"):
        candidate = _need(problem.candidate, "candidate")
        rhos = _pick_rho(problem, args)
        if len(rhos) != 1:
            raise MalformedInputError(
                f"{cmd} needs exactly one rho (use --rho to select)")
        ((name, rho),) = rhos.items()
        if cmd == "superior":
            res = superior(problem.channel, problem.metric, candidate, rho, cfg)
            rep.field("holds", res.holds)
            if not res.holds:
                rep.field("blocking_input", res.blocking,
                          f"blocking input x = {res.blocking}")
                rep.emit()
                return 1
            rep.field("coupling", res.certificate.coupling.tensor,
                      "a dominating coupling exists")
        else:
            res = isomorphic(problem.channel, problem.metric, candidate, rho, cfg)
            rep.field("holds", res.holds)
            if not res.holds:
                rep.emit()
                return 1
            rep.field("forward_coupling", res.forward.coupling.tensor,
                      "couplings exist in both directions")
            rep.field("backward_coupling", res.backward.coupling.tensor, "")

    elif cmd == "tightness":
        candidate = _need(problem.candidate, "candidate")
        ok, capacity = tightness_certificate(problem.channel, problem.metric,
                                             candidate, cfg)
        rep.field("certified", ok)
        rep.rate("capacity", capacity, "candidate capacity")
        if not ok:
            rep.emit()
            return 1

    elif cmd == "simulate":
        if args.seed is None:
            raise MalformedInputError("simulate requires an explicit --seed")
        coupling = _need(problem.coupling, "coupling")
        law = _need(problem.composition, "P")
        rhos = _pick_rho(problem, args)
        if len(rhos) != 1:
            raise MalformedInputError(
                "simulate needs exactly one rho (use --rho to select)")
        ((name, rho),) = rhos.items()
        sim = SimConfig(args.blocklength, args.codebook_size, law,
                        args.trials, args.seed)
        report = simulate_containment(
            coupling, problem.metric, rho, sim, mode=args.mode,
            require_membership=args.check_membership, cfg=cfg)
        for key in ("both_correct", "q_correct_rho_wrong", "q_wrong_rho_correct",
                    "both_wrong", "q_ties", "rho_ties", "trials"):
            rep.field(key, getattr(report, key))

    elif cmd == "exponent":
        law = _need(problem.composition, "P")
        if args.rate is None:
            raise MalformedInputError("exponent requires --rate")
        unit_scale = LOG2E if args.bits else 1.0
        rate = RateValue(args.rate / unit_scale)
        value = correct_decoding_exponent(law, problem.channel, rate, cfg)
        rep.rate("exponent", RateValue(value), "exponent")

    else:  # pragma: no cover - argparse restricts the choices
        raise MalformedInputError(f"unknown command {cmd!r}")

    rep.emit()
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 2
        return code
    try:
        with open(args.problem, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read problem file: {exc}", file=sys.stderr)
        return 2
    try:
        problem = parse_problem(text)
        return _dispatch(args, problem)
    except (MalformedInputError, InvalidDistributionError,
            DimensionMismatchError, SizeCapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EmptyFeasibleSetError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        if exc.certificate is not None:
            print(f"certificate: {exc.certificate}", file=sys.stderr)
        return 1
    except ConvergenceError as exc:
        print(f"did not converge: {exc}", file=sys.stderr)
        if exc.lower is not None and exc.upper is not None:
            print("bracket: [%.10g, %.10g] bits"
                  % (exc.lower * LOG2E, exc.upper * LOG2E), file=sys.stderr)
        return 3


def entry_point() -> None:  # console_scripts hook
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
