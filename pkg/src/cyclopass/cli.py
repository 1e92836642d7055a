"""Command-line front end.

Scenarios are YAML documents (see ``docs/scenario.md``). Every run writes a
YAML report and any trajectory CSVs into ``<out>/<scenario name>/``.

Exit codes: 0 pass or complete, 2 verdict failure (a verdict differs from
the ``expect`` field, or a named tolerance check failed), 1 execution error.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import math
import sys as _sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

from . import __version__
from .core import PortHamiltonianSystem, StatePartition, check_invariants
from .dissipativity import (
    SearchOptions,
    StorageSearchOptions,
    cyclic_supply,
    estimate_storage_bounds,
    falsify_one_port,
    verify_storage,
)
from .errors import CyclopassError, ScenarioError, SingularHessian
from .io import write_trajectory_csv
from .legendre import double_transform, partial_legendre, verify_legendre_identities
from .models import REGISTRY, make_model
from .simulate import (
    FourierSignal,
    IntegratorOptions,
    constrained_simulate_x1,
    constrained_simulate_y1,
    integrate,
)
from .structure import check_theorem_form

MODES = ("check", "simulate", "constrained-y1", "constrained-x1", "legendre", "verify",
         "falsify", "storage")
STOCHASTIC = {"check", "verify", "falsify", "storage"}
POINTWISE_TOL = 1e-6

_TOP_KEYS = {"name", "model", "mode", "partition", "constraint", "constraint_mode", "x0",
             "t_span", "inputs", "integrator", "search", "storage", "legendre", "expect",
             "seed", "samples"}


# -- scenario ----------------------------------------------------------------


@dataclasses.dataclass
class Scenario:
    name: str
    model: str
    mode: str
    params: dict = dataclasses.field(default_factory=dict)
    custom: Optional[dict] = None
    partition: Optional[str] = None
    constraint: Optional[list] = None
    constraint_mode: str = "y1"
    x0: Optional[list] = None
    t_span: list = dataclasses.field(default_factory=lambda: [0.0, 1.0])
    inputs: Optional[dict] = None
    integrator: dict = dataclasses.field(default_factory=dict)
    search: dict = dataclasses.field(default_factory=dict)
    storage: dict = dataclasses.field(default_factory=dict)
    legendre: dict = dataclasses.field(default_factory=dict)
    expect: Optional[str] = None
    seed: Optional[int] = None
    samples: int = 64

    def to_dict(self) -> dict:
        model = {"name": self.model}
        if self.params:
            model["params"] = self.params
        if self.custom is not None:
            model["custom"] = self.custom
        out = {"name": self.name, "model": model, "mode": self.mode}
        for key in ("partition", "constraint", "x0", "inputs", "expect", "seed"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        out["constraint_mode"] = self.constraint_mode
        out["t_span"] = self.t_span
        out["samples"] = self.samples
        for key in ("integrator", "search", "storage", "legendre"):
            if getattr(self, key):
                out[key] = getattr(self, key)
        return _plain(out)


def _key_lines(text) -> Dict[str, int]:
    """Dotted key path -> 1-based line number, for diagnostics."""
    lines = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return lines

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                path = f"{prefix}.{k.value}" if prefix else str(k.value)
                lines[path] = k.start_mark.line + 1
                walk(v, path)

    walk(root, "")
    return lines


def _fail(field, msg, lines):
    where = ""
    probe = field
    while probe:
        if probe in lines:
            where = f"line {lines[probe]}: "
            break
        probe = probe.rpartition(".")[0]
    raise ScenarioError(f"{where}field '{field}': {msg}")


def _floats(value, field, lines, length=None):
    try:
        arr = [float(v) for v in np.atleast_1d(np.asarray(value, dtype=float)).ravel()]
    except (TypeError, ValueError):
        _fail(field, f"expected a list of numbers, got {value!r}", lines)
    if length is not None and len(arr) != length:
        _fail(field, f"expected {length} values, got {len(arr)}", lines)
    return arr


def parse_scenario(text: str, seed_override=None) -> Scenario:
    """Parse and validate a YAML scenario; raises :class:`ScenarioError` with line info."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}: " if mark else ""
        raise ScenarioError(f"{where}YAML parse error: {getattr(exc, 'problem', exc)}") from None
    lines = _key_lines(text)
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a mapping at the top level")
    return scenario_from_dict(data, lines, seed_override)


def scenario_from_dict(data: dict, lines=None, seed_override=None) -> Scenario:
    lines = lines or {}
    unknown = sorted(set(data) - _TOP_KEYS)
    if unknown:
        _fail(unknown[0], f"unknown field (allowed: {sorted(_TOP_KEYS)})", lines)
    model = data.get("model")
    if isinstance(model, str):
        model = {"name": model}
    if not isinstance(model, dict) or "name" not in model:
        _fail("model", "expected a mapping with 'name' (and optional 'params' or 'custom')", lines)
    name = str(model["name"])
    custom = model.get("custom")
    if custom is None and name not in REGISTRY:
        _fail("model.name", f"unknown model {name!r}; known: {sorted(REGISTRY)}", lines)
    params = dict(model.get("params") or {})
    mode = data.get("mode")
    if mode not in MODES:
        _fail("mode", f"expected one of {list(MODES)}, got {mode!r}", lines)
    seed = data.get("seed") if seed_override is None else seed_override
    if seed is not None:
        if isinstance(seed, bool) or not isinstance(seed, int):
            _fail("seed", f"expected an integer, got {seed!r}", lines)
    elif mode in STOCHASTIC:
        _fail("seed", f"mode {mode!r} is stochastic and needs an explicit seed", lines)
    sc = Scenario(name=str(data.get("name", f"{name}-{mode}")), model=name, mode=mode,
                  params=params, custom=custom, seed=seed)
    sc.partition = data.get("partition")
    if data.get("constraint") is not None:
        sc.constraint = _floats(data["constraint"], "constraint", lines)
    sc.constraint_mode = str(data.get("constraint_mode", "y1"))
    if sc.constraint_mode not in ("y1", "x1"):
        _fail("constraint_mode", "expected 'y1' or 'x1'", lines)
    if data.get("x0") is not None:
        sc.x0 = _floats(data["x0"], "x0", lines)
    sc.t_span = _floats(data.get("t_span", [0.0, 1.0]), "t_span", lines, 2)
    if not sc.t_span[1] > sc.t_span[0]:
        _fail("t_span", "end time must exceed start time", lines)
    if data.get("inputs") is not None:
        inp = data["inputs"]
        if not isinstance(inp, dict):
            _fail("inputs", "expected a mapping with period/offset/cos/sin", lines)
        bad = sorted(set(inp) - {"period", "offset", "cos", "sin"})
        if bad:
            _fail(f"inputs.{bad[0]}", "unknown field", lines)
        sc.inputs = {"period": float(inp.get("period", sc.t_span[1] - sc.t_span[0])),
                     "offset": _floats(inp.get("offset", []), "inputs.offset", lines)}
        for key in ("cos", "sin"):
            if key in inp:
                sc.inputs[key] = [_floats(row, f"inputs.{key}", lines) for row in inp[key]]
    for key, allowed in (("integrator", {f.name for f in dataclasses.fields(IntegratorOptions)}),
                         ("search", {f.name for f in dataclasses.fields(SearchOptions)} - {"seed"}),
                         ("storage", {"x_star", "grid", "axes", "horizon"}
                          | {f.name for f in dataclasses.fields(StorageSearchOptions)} - {"seed"}),
                         ("legendre", {"e1", "x2", "x1_guess", "points"})):
        block = data.get(key) or {}
        if not isinstance(block, dict):
            _fail(key, "expected a mapping", lines)
        bad = sorted(set(block) - allowed)
        if bad:
            _fail(f"{key}.{bad[0]}", f"unknown field (allowed: {sorted(allowed)})", lines)
        setattr(sc, key, dict(block))
    sc.expect = data.get("expect")
    sc.samples = int(data.get("samples", 64))
    try:
        sys = build_system(sc)
    except (KeyError, ValueError, TypeError) as exc:
        _fail("model", str(exc), lines)
    if sc.partition is not None and sc.partition not in sys.partitions:
        _fail("partition", f"unknown partition {sc.partition!r}; known: {sorted(sys.partitions)}",
              lines)
    if mode in ("constrained-y1", "constrained-x1", "falsify") and sc.partition is None:
        _fail("partition", f"mode {mode!r} needs a partition", lines)
    if mode in ("constrained-y1", "constrained-x1", "falsify") and sc.constraint is None:
        _fail("constraint", f"mode {mode!r} needs a constraint value", lines)
    if sc.x0 is not None and len(sc.x0) != sys.n:
        _fail("x0", f"expected {sys.n} values for model {name!r}", lines)
    return sc


def build_system(sc: Scenario) -> PortHamiltonianSystem:
    if sc.custom is None:
        return make_model(sc.model, sc.params)
    c = sc.custom
    parts = {}
    for pname, pd in (c.get("partitions") or {}).items():
        parts[pname] = StatePartition(tuple(pd["x1"]), tuple(pd["x2"]), tuple(pd["port1"]),
                                      tuple(pd["port2"]), pname)
    Q = np.asarray(c["Q"], dtype=float)
    nominal = np.asarray(c.get("nominal", np.zeros(Q.shape[0])), dtype=float)
    return PortHamiltonianSystem.from_linear(sc.model, Q, c.get("J", np.zeros_like(Q)),
                                             c.get("R", np.zeros_like(Q)), c["G"],
                                             partitions=parts, nominal=nominal)


# -- report helpers ------------------------------------------------------------


def _plain(obj):
    """Convert numpy scalars/arrays and tuples to plain YAML-safe types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def _check(name, passed, value, tolerance, note=""):
    d = {"name": name, "passed": bool(passed), "value": float(value), "tolerance": float(tolerance)}
    if note:
        d["note"] = note
    return d


def _signal(sc: Scenario, width: int):
    if sc.inputs is None:
        return FourierSignal(np.zeros(width))
    inp = sc.inputs
    offset = np.zeros(width) if not inp["offset"] else np.asarray(inp["offset"], dtype=float)
    if offset.size != width:
        raise ScenarioError(f"field 'inputs.offset': expected {width} channels, got {offset.size}")
    return FourierSignal(offset, inp.get("cos"), inp.get("sin"), inp["period"])


def _integrator(sc: Scenario, step_override):
    opts = dict(sc.integrator)
    if step_override is not None:
        opts["step"] = step_override
    return IntegratorOptions(**opts)


def _x0(sc, sys):
    return np.asarray(sys.nominal if sc.x0 is None else sc.x0, dtype=float)


def _rng(sc):
    return np.random.default_rng(sc.seed)


# -- mode handlers ---------------------------------------------------------------


def _run_check(sc, sys, ctx):
    names = [sc.partition] if sc.partition else sorted(sys.partitions)
    verdicts, results, checks = {}, {}, []
    for pname in names:
        cert = check_theorem_form(sys, pname, samples=sc.samples, rng=_rng(sc))
        entry = cert.to_dict()
        if not cert.check("h11_full_rank").passed:
            try:
                p = sys.partition(pname)
                x = sys.nominal
                partial_legendre(sys, p, sys.effort(x)[list(p.x1)], x[list(p.x2)], x[list(p.x1)])
                entry["legendre_refusal"] = None
            except SingularHessian as exc:
                entry["legendre_refusal"] = f"SingularHessian (cond {exc.condition:.3g})"
        results[pname] = entry
        verdicts[pname] = cert.verdict
    verdict = verdicts[names[0]] if len(names) == 1 else verdicts
    return {"verdict": verdict, "partitions": results}, checks, []


def _theorem2_margin(tr):
    """max of dH*/dt - y2^T u2 - tol(1 + |y2^T u2|); <= 0 means the inequality holds."""
    excess = tr.storage_rate - tr.s2 - POINTWISE_TOL * (1.0 + np.abs(tr.s2))
    return float(np.max(excess))


def _run_simulate(sc, sys, ctx):
    opts = _integrator(sc, ctx["step"])
    tr = integrate(sys, _x0(sc, sys), _signal(sc, sys.m), sc.t_span, opts, sc.partition)
    rep = verify_storage(tr, "H", "total")
    cs = cyclic_supply(tr)
    arts = [ctx["write"](tr, "trajectory.csv")]
    checks = [_check("energy_balance", rep.ok, rep.worst_margin, -rep.tol,
                     "H(t2)-H(t1) <= int y^T u over all sample pairs")]
    res = {"verdict": "complete", "steps": len(tr) - 1, "backend": tr.meta.get("backend"),
           "H_initial": tr.h[0], "H_final": tr.h[-1], "supply_integral": cs.s1_integral + cs.s2_integral,
           "closure_defect": cs.closure_defect, "storage_check": rep.to_dict()}
    return res, checks, arts


def _run_constrained(sc, sys, ctx):
    opts = _integrator(sc, ctx["step"])
    p = sys.partition(sc.partition)
    width = p.m2
    if sc.mode == "constrained-y1":
        cert = check_theorem_form(sys, p, samples=sc.samples, rng=_rng(sc) if sc.seed is not None
                                  else np.random.default_rng(0))
        tr = constrained_simulate_y1(sys, cert, sc.constraint, _signal(sc, width), _x0(sc, sys),
                                     sc.t_span, opts, formal=not cert.certified)
        certified = cert.certified
    else:
        x0 = _x0(sc, sys).copy()
        x0[list(p.x1)] = sc.constraint
        tr = constrained_simulate_x1(sys, p, sc.constraint, _signal(sc, width), x0, sc.t_span, opts)
        certified = None
    rep = verify_storage(tr, "Hstar", "s2")
    margin = _theorem2_margin(tr)
    cs = cyclic_supply(tr)
    checks = []
    if sc.mode == "constrained-y1":
        checks.append(_check("held_output_drift", tr.meta["y1_drift"] <= 1e-6, tr.meta["y1_drift"],
                             1e-6, "max |y1(t) - y1_bar|"))
    if certified is not False:
        checks.append(_check("pointwise_storage_inequality", margin <= 0.0, margin, 0.0,
                             "max dS/dt - y2^T u2 - 1e-6(1+|y2^T u2|)"))
        checks.append(_check("storage_inequality", rep.ok, rep.worst_margin, -rep.tol,
                             "S(t2)-S(t1) <= int y2^T u2 over all sample pairs"))
    arts = [ctx["write"](tr, "trajectory.csv")]
    res = {"verdict": "complete", "certified": certified, "storage": tr.meta.get("storage"),
           "steps": len(tr) - 1, "backend": tr.meta.get("backend"),
           "storage_initial": tr.h_star[0], "storage_final": tr.h_star[-1],
           "s1_integral": cs.s1_integral, "s2_integral": cs.s2_integral,
           "closure_defect": cs.closure_defect, "pointwise_margin": margin,
           "storage_check": rep.to_dict()}
    if certified is False:
        res["note"] = "partition not certified; storage samples carry no guarantee"
    return res, checks, arts


def _run_legendre(sc, sys, ctx):
    names = [sc.partition] if sc.partition else sorted(sys.partitions)
    x = _x0(sc, sys)
    out, checks = {}, []
    for pname in names:
        p = sys.partition(pname)
        e1 = np.asarray(sc.legendre.get("e1", sys.effort(x)[list(p.x1)]), dtype=float)
        x2 = np.asarray(sc.legendre.get("x2", x[list(p.x2)]), dtype=float)
        guess = np.asarray(sc.legendre.get("x1_guess", x[list(p.x1)]), dtype=float)
        try:
            lr = partial_legendre(sys, p, e1, x2, guess)
        except SingularHessian as exc:
            out[pname] = {"verdict": "singular_hessian", "condition": exc.condition}
            continue
        ident = verify_legendre_identities(sys, p, e1, x2, guess)
        xx = p.join(lr.x1_solved, x2)
        back = double_transform(sys, p, lr.x1_solved, x2)
        h = sys.hamiltonian(xx)
        rel = abs(back - h) / max(1.0, abs(h))
        tol = 1e-5 * sys.tolerance_scale
        checks.append(_check(f"{pname}.identities", ident.max_error <= tol, ident.max_error, tol))
        checks.append(_check(f"{pname}.double_transform", rel <= 1e-8, rel, 1e-8))
        out[pname] = {"verdict": "ok", "value": lr.value, "x1": lr.x1_solved,
                      "iterations": lr.newton_iterations, "residual": lr.residual,
                      "identity_errors": [ident.d_e1_error, ident.d_x2_error],
                      "double_transform": back, "H": h}
    verdicts = {k: v["verdict"] for k, v in out.items()}
    verdict = verdicts[names[0]] if len(names) == 1 else verdicts
    return {"verdict": verdict, "partitions": out}, checks, []


def _run_verify(sc, sys, ctx):
    inv = check_invariants(sys, _rng(sc), samples=sc.samples)
    checks = [_check("core_invariants", inv["ok"], 0.0, 0.0)]
    res = {"verdict": "ok" if inv["ok"] else "fail", "invariants": inv, "partitions": {}}
    for pname in sorted(sys.partitions):
        cert = check_theorem_form(sys, pname, samples=sc.samples, rng=_rng(sc))
        entry = {"verdict": cert.verdict, "reasons": list(cert.reasons)}
        if cert.check("h11_full_rank").passed:
            p = sys.partition(pname)
            x = sys.nominal
            try:
                ident = verify_legendre_identities(sys, p, sys.effort(x)[list(p.x1)], x[list(p.x2)],
                                                   x[list(p.x1)])
                tol = 1e-5 * sys.tolerance_scale
                entry["identity_error"] = ident.max_error
                checks.append(_check(f"{pname}.identities", ident.max_error <= tol, ident.max_error,
                                     tol))
            except CyclopassError as exc:
                entry["identity_error"] = str(exc)
        res["partitions"][pname] = entry
    return res, checks, []


def _run_falsify(sc, sys, ctx):
    opts = dict(sc.search)
    for key in ("free_initial", "closure_mask", "period_range"):
        if opts.get(key) is not None:
            opts[key] = tuple(opts[key])
    if ctx["step"] is not None:
        opts.setdefault("final_steps", max(1, int(round(1.0 / ctx["step"]))))
    so = SearchOptions(seed=sc.seed, **opts)
    result = falsify_one_port(sys, sc.partition, sc.constraint, so, mode=sc.constraint_mode,
                              x0=sc.x0)
    res = result.to_dict()
    res["verdict"] = "witness" if result.found else "not_found"
    res["search"] = so.to_dict()
    arts, checks = [], []
    if result.found:
        arts.append(ctx["write"](result.trajectory, "witness.csv"))
        checks.append(_check("witness_supply", result.integrated_supply < -result.eps_w,
                             result.integrated_supply, -result.eps_w))
        checks.append(_check("witness_closure", result.closure_defect <= so.delta_w,
                             result.closure_defect, so.delta_w))
        checks.append(_check("witness_half_step", result.half_step_supply < -result.eps_w / 2,
                             result.half_step_supply, -result.eps_w / 2))
    return res, checks, arts


def _run_storage(sc, sys, ctx):
    st = dict(sc.storage)
    x_star = np.asarray(st.pop("x_star", np.zeros(sys.n)), dtype=float)
    horizon = float(st.pop("horizon", 1.0))
    if "grid" in st:
        grid = np.asarray(st.pop("grid"), dtype=float)
    elif "axes" in st:
        grid = np.array(list(itertools.product(*st.pop("axes"))), dtype=float)
    else:
        grid = x_star[None, :]
    opts = StorageSearchOptions(seed=sc.seed, **st)
    est = estimate_storage_bounds(sys, x_star, grid, horizon, opts)
    H = np.array([sys.hamiltonian(x) for x in grid]) - sys.hamiltonian(x_star)
    order = est.s_ac_values - est.s_rc_values
    tol = 1e-6
    checks = [_check("ordering", np.all(order <= tol), float(np.max(order)), tol,
                     "S_ac <= S_rc at every grid point")]
    res = est.to_dict()
    res["H_minus_H_star"] = H
    res["verdict"] = "complete"
    return res, checks, []


HANDLERS = {
    "check": _run_check,
    "simulate": _run_simulate,
    "constrained-y1": _run_constrained,
    "constrained-x1": _run_constrained,
    "legendre": _run_legendre,
    "verify": _run_verify,
    "falsify": _run_falsify,
    "storage": _run_storage,
}


def _verdict_matches(verdict, expect):
    if isinstance(verdict, dict):
        if isinstance(expect, dict):
            return all(verdict.get(k) == v for k, v in expect.items())
        return all(v == expect for v in verdict.values())
    return verdict == expect


def execute(sc: Scenario, out_dir, step=None) -> dict:
    """Run a validated scenario; returns the report mapping (also written to disk)."""
    t0 = time.perf_counter()
    sdir = Path(out_dir) / sc.name
    sdir.mkdir(parents=True, exist_ok=True)

    def write(tr, fname):
        write_trajectory_csv(tr, sdir / fname)
        return fname

    sys = build_system(sc)
    ctx = {"step": step, "write": write}
    results, checks, artifacts = HANDLERS[sc.mode](sc, sys, ctx)
    status = "pass"
    if sc.expect is not None and not _verdict_matches(results["verdict"], sc.expect):
        status = "verdict_fail"
    elif not all(c["passed"] for c in checks):
        status = "verdict_fail"
    report = {
        "tool": "cyclopass",
        "version": __version__,
        "scenario": sc.to_dict(),
        "status": status,
        "exit_code": 0 if status == "pass" else 2,
        "results": _plain(results),
        "checks": _plain(checks),
        "artifacts": artifacts,
        "timing": {"wall_clock_s": time.perf_counter() - t0},
    }
    dump_report(report, sdir / "report.yaml")
    return report


def dump_report(report, path):
    text = yaml.safe_dump(_plain(report), sort_keys=False, allow_unicode=True, width=100)
    Path(path).write_text(text, encoding="utf-8")


def run(scenario_file, out_dir="cyclopass_out", seed=None, step=None) -> dict:
    text = Path(scenario_file).read_text(encoding="utf-8")
    return execute(parse_scenario(text, seed), out_dir, step)


# -- argument parsing ------------------------------------------------------------


def _param_pairs(pairs):
    out = {}
    for item in pairs or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise ScenarioError(f"--param expects key=value, got {item!r}")
        out[key] = yaml.safe_load(val)
    return out


def _build_parser():
    parser = argparse.ArgumentParser(prog="cyclopass", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"cyclopass {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="cyclopass_out", help="output directory")
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--step", type=float, default=None, help="integrator step (s)")
    common.add_argument("--quiet", action="store_true", help="suppress the summary line")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", parents=[common], help="run a scenario file")
    p_run.add_argument("scenario")
    for mode in ("check", "simulate", "legendre", "verify", "falsify", "storage"):
        p = sub.add_parser(mode, parents=[common], help=f"{mode} a built-in model")
        p.add_argument("model", choices=sorted(REGISTRY))
        p.add_argument("--partition")
        p.add_argument("--param", action="append", metavar="KEY=VALUE")
        p.add_argument("--x0", type=float, nargs="+")
        p.add_argument("--constraint", type=float, nargs="+")
        p.add_argument("--expect")
        p.add_argument("--t-span", type=float, nargs=2)
        p.add_argument("--offset", type=float, nargs="+", help="constant input values")
        p.add_argument("--period", type=float, help="fixed search period (falsify)")
        if mode == "simulate":
            p.add_argument("--hold", choices=["y1", "x1"], help="simulate with port 1 held")
        if mode == "falsify":
            p.add_argument("--hold", choices=["y1", "x1"], default="y1")
    return parser


def _scenario_from_args(args) -> Scenario:
    mode = args.command
    if mode == "simulate" and getattr(args, "hold", None):
        mode = "constrained-" + args.hold
    data: Dict[str, Any] = {"model": {"name": args.model, "params": _param_pairs(args.param)},
                            "mode": mode, "seed": 0 if args.seed is None else args.seed}
    for key in ("partition", "x0", "constraint", "expect"):
        if getattr(args, key) is not None:
            data[key] = getattr(args, key)
    if args.t_span is not None:
        data["t_span"] = list(args.t_span)
    if args.offset is not None:
        data["inputs"] = {"offset": list(args.offset)}
    if args.command == "falsify":
        data["constraint_mode"] = args.hold
        if args.period is not None:
            data["search"] = {"period": args.period}
    data["name"] = f"{args.model}-{mode}"
    return scenario_from_dict(data)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            sc = parse_scenario(Path(args.scenario).read_text(encoding="utf-8"), args.seed)
        else:
            sc = _scenario_from_args(args)
        report = execute(sc, args.out, args.step)
    except ScenarioError as exc:
        print(f"cyclopass: scenario error: {exc}", file=_sys.stderr)
        return 1
    except (CyclopassError, OSError, ValueError, KeyError, ArithmeticError) as exc:
        print(f"cyclopass: error: {type(exc).__name__}: {exc}", file=_sys.stderr)
        return 1
    if not args.quiet:
        verdict = report["results"].get("verdict")
        print(f"{sc.name}: {report['status']} (verdict: {verdict}) -> "
              f"{Path(args.out) / sc.name / 'report.yaml'}")
    return report["exit_code"]


if __name__ == "__main__":  # pragma: no cover
    _sys.exit(main())
