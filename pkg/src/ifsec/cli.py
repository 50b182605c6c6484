"""Command-line front end: list models, run checks, replay witnesses.

Every check renders a run report with a stable shape (`schema: 1`):
the command echo, the model identity and parameters, one entry per
check with its verdict and witness, budget counters, and the wall
time. With --json the report is printed as sorted, indented JSON that
is byte-identical across runs except for the wall time, so reports
can be diffed and archived. Exit codes are part of the contract:

    0  every check passed
    1  a check failed; the report carries the witness
    2  the invocation itself was wrong (bad flags, unknown model)
    3  a model file or model definition is unsound
    4  an exploration or enumeration exceeded its budget

`replay` re-executes the first failing witness from a saved JSON
report against a freshly rebuilt model, dumping the states it passes
through and naming the condition that breaks. A report whose model
files changed, or one that records a pass, is rejected as unusable
rather than half-replayed.

There is no --seed flag: every search in the toolkit is canonical, so
two runs of the same command explore identical orders and report
identical witnesses.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os.path
import sys
import time
from typing import Any, Callable, Sequence

from ifsec.core import (
    ActionId,
    BudgetError,
    ModelError,
    ParseError,
    SecureSystem,
    State,
    UsageError,
    render_value,
    value_key,
)
from ifsec.models import REGISTRY, get_model
from ifsec.noninterference import NICounterexample, check_ni
from ifsec.refinement import (
    C1Witness,
    C2Witness,
    C3Witness,
    C4Witness,
    C5Witness,
    C6Witness,
    CrossCheck,
    LemmaWitness,
    RefinementPair,
    RelyGuaranteeSpec,
    check_compositional,
    check_simulation,
)
from ifsec.specfile import (
    elaborate_model,
    elaborate_refinement,
    load_model,
    load_refinement,
)
from ifsec.unwinding import (
    LRViolation,
    SCViolation,
    Scope,
    check_unwinding,
    scope_reachable,
    scope_universe,
)

SCHEMA = 1
CHECK_KINDS = ("unwinding", "ni", "refine", "compositional")
MODEL_PARAM_FLAGS = ("threads", "capacity", "messages", "users")

#: Defaults shown by `list`; must agree with the builder signatures,
#: which a test enforces.
PARAM_DEFAULTS = {"threads": 3, "capacity": 1, "messages": 1, "users": 2}

DEFAULT_MAX_LEN = 4


# ---------------------------------------------------------------------------
# Target loading
# ---------------------------------------------------------------------------

class LoadedTarget:
    """A check target resolved to systems plus its report identity."""

    def __init__(self, model_info: dict[str, Any],
                 levels: list[tuple[str, SecureSystem]],
                 pair: RefinementPair | None,
                 rg: RelyGuaranteeSpec | None) -> None:
        self.model_info = model_info
        self.levels = levels
        self.pair = pair
        self.rg = rg


def _sha256(path: str) -> str:
    try:
        with open(path, "rb") as handle:
            return hashlib.sha256(handle.read()).hexdigest()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None


def _resolve_ref(base_dir: str, ref: str) -> str:
    return ref if os.path.isabs(ref) else os.path.join(base_dir, ref)


def load_target(kind: str, target: str, params: dict[str, int],
                budget: int | None) -> LoadedTarget:
    if target in REGISTRY:
        bundle = get_model(target, **params)
        info = {
            "source": "builtin",
            "name": target,
            "description": REGISTRY[target].description,
            "params": dict(params),
            "build_params": {k: v for k, v in bundle.params},
        }
        return LoadedTarget(
            info,
            [("concrete", bundle.pair.concrete),
             ("abstract", bundle.pair.abstract)],
            bundle.pair,
            bundle.rely_guarantee,
        )

    if not os.path.exists(target):
        known = ", ".join(REGISTRY)
        raise UsageError(
            f"unknown model or file {target!r}; built-in models: {known}")
    if params:
        raise UsageError(
            "model parameters (--threads and friends) apply only to "
            "built-in models, not model files")

    files = {target: _sha256(target)}
    if kind in ("refine", "compositional"):
        doc = load_refinement(target)
        base_dir = os.path.dirname(target) or "."
        for ref in (doc.concrete_ref, doc.abstract_ref):
            resolved = _resolve_ref(base_dir, ref)
            files[resolved] = _sha256(resolved)
        pair, rg = elaborate_refinement(doc, base_dir=base_dir, budget=budget)
        info = {"source": "file", "path": target, "files": files}
        return LoadedTarget(
            info,
            [("concrete", pair.concrete), ("abstract", pair.abstract)],
            pair, rg,
        )

    system = elaborate_model(load_model(target), budget=budget)
    info = {"source": "file", "path": target, "files": files}
    return LoadedTarget(info, [("model", system)], None, None)


def _warn_missing_reflexive(loaded: LoadedTarget) -> None:
    for label, system in loaded.levels:
        missing = system.config.missing_reflexive()
        if missing:
            print(f"ifsec: warning: {label} level: no reflexive policy edge "
                  f"for: {', '.join(missing)}", file=sys.stderr)


# ---------------------------------------------------------------------------
# Witness serialization
# ---------------------------------------------------------------------------

def _labels(trace: Sequence[ActionId]) -> list[str]:
    return [a.display() for a in trace]


def _serials(states: Sequence[State]) -> list[str]:
    return [s.serialize() for s in states]


def _lr_json(v: LRViolation, scope: Scope) -> dict[str, Any]:
    trace = scope.trace_to(v.state)
    return {
        "type": "lr",
        "action": v.action.display(),
        "domain": v.domain,
        "state": v.state.serialize(),
        "successor": v.successor.serialize(),
        "trace": None if trace is None else _labels(trace),
    }


def _sc_json(v: SCViolation, scope: Scope) -> dict[str, Any]:
    trace1 = scope.trace_to(v.s1)
    trace2 = scope.trace_to(v.s2)
    return {
        "type": "sc",
        "action": v.action.display(),
        "domain": v.domain,
        "s1": v.s1.serialize(),
        "s2": v.s2.serialize(),
        "s1_successor": v.s1_successor.serialize(),
        "s2_successor": v.s2_successor.serialize(),
        "trace1": None if trace1 is None else _labels(trace1),
        "trace2": None if trace2 is None else _labels(trace2),
    }


def _ni_json(c: NICounterexample) -> dict[str, Any]:
    return {
        "type": "ni",
        "domain": c.domain,
        "trace": _labels(c.trace),
        "purged": _labels(c.purged),
        "full_finals": _serials(c.full_finals),
        "purged_finals": _serials(c.purged_finals),
        "full_view": [render_value(v) for v in c.full_view],
        "purged_view": [render_value(v) for v in c.purged_view],
    }


def _sim_witness_json(witness: object) -> dict[str, Any]:
    if isinstance(witness, C1Witness):
        return {
            "type": "c1",
            "concrete_initial": witness.concrete_initial.serialize(),
            "abstract_initial": witness.abstract_initial.serialize(),
        }
    if isinstance(witness, C2Witness):
        return {
            "type": "c2",
            "trace": _labels(witness.trace),
            "action": witness.action.display(),
            "state": witness.state.serialize(),
            "abstract_state": witness.abstract_state.serialize(),
            "successor": witness.successor.serialize(),
        }
    if isinstance(witness, C3Witness):
        return {
            "type": "c3",
            "trace": _labels(witness.trace),
            "action": witness.action.display(),
            "abstract_action": witness.abstract_action.display(),
            "state": witness.state.serialize(),
            "abstract_state": witness.abstract_state.serialize(),
            "successor": witness.successor.serialize(),
            "abstract_candidates": _serials(witness.abstract_candidates),
        }
    if isinstance(witness, C4Witness):
        return {
            "type": "c4",
            "action": witness.action.display(),
            "abstract_action": witness.abstract_action.display(),
            "concrete_domain": witness.concrete_domain,
            "abstract_domain": witness.abstract_domain,
        }
    if isinstance(witness, C5Witness):
        return {"type": "c5", "source": witness.source,
                "target": witness.target}
    if isinstance(witness, C6Witness):
        return {
            "type": "c6",
            "domain": witness.domain,
            "first": [witness.first[0].serialize(),
                      witness.first[1].serialize()],
            "second": [witness.second[0].serialize(),
                       witness.second[1].serialize()],
            "first_trace": _labels(witness.first_trace),
            "second_trace": _labels(witness.second_trace),
            "concrete_indist": witness.concrete_indist,
            "abstract_indist": witness.abstract_indist,
        }
    if isinstance(witness, CrossCheck):
        return {
            "type": "cross-check",
            "abstract_unwinding_ok": witness.abstract_unwinding_ok,
            "concrete_unwinding_ok": witness.concrete_unwinding_ok,
        }
    if isinstance(witness, LemmaWitness):
        return {
            "type": "lemma",
            "component": witness.component,
            "trace": _labels(witness.trace),
            "state": witness.state.serialize(),
            "abstract_state": None if witness.abstract_state is None
            else witness.abstract_state.serialize(),
            "action": None if witness.action is None
            else witness.action.display(),
            "successor": None if witness.successor is None
            else witness.successor.serialize(),
            "abstract_successor": None if witness.abstract_successor is None
            else witness.abstract_successor.serialize(),
            "reason": witness.reason,
            "level": witness.level,
            "other_component": witness.other_component,
        }
    return {"type": "opaque", "detail": repr(witness)}


def _verdict_check(name: str, verdict) -> dict[str, Any]:
    witness = None
    if verdict.witness is not None:
        witness = _sim_witness_json(verdict.witness)
    return {"name": name, "status": verdict.status, "note": verdict.note,
            "witness": witness}


# ---------------------------------------------------------------------------
# Check runners
# ---------------------------------------------------------------------------

def _unwinding_checks(loaded: LoadedTarget, args,
                      counters: dict[str, int]) -> list[dict[str, Any]]:
    checks: list[dict[str, Any]] = []
    domains = [args.domain] if args.domain else None
    for label, system in loaded.levels:
        if args.universe:
            scope = scope_universe(system)
        else:
            scope = scope_reachable(system, depth=args.depth,
                                    budget=args.budget)
        report = check_unwinding(system, scope=scope, domains=domains)
        prefix = f"{label}-" if len(loaded.levels) > 1 else ""
        counters[f"{label}_scope_states"] = report.scope_size
        checks.append({
            "name": f"{prefix}lr",
            "status": "fail" if report.lr else "pass",
            "note": f"scope: {report.scope_tag}",
            "witness": _lr_json(report.lr, scope) if report.lr else None,
        })
        checks.append({
            "name": f"{prefix}sc",
            "status": "fail" if report.sc else "pass",
            "note": f"scope: {report.scope_tag}",
            "witness": _sc_json(report.sc, scope) if report.sc else None,
        })
    return checks


def _ni_checks(loaded: LoadedTarget, args,
               counters: dict[str, int]) -> list[dict[str, Any]]:
    checks: list[dict[str, Any]] = []
    max_len = DEFAULT_MAX_LEN if args.max_len is None else args.max_len
    domains = [args.domain] if args.domain else None
    for label, system in loaded.levels:
        result = check_ni(system, max_len, domains=domains,
                          trace_budget=args.budget)
        prefix = f"{label}-" if len(loaded.levels) > 1 else ""
        counters[f"{label}_traces"] = result.traces_checked
        witness = None
        if result.counterexample is not None:
            witness = _ni_json(result.counterexample)
        checks.append({
            "name": f"{prefix}ni",
            "status": "pass" if result.ok else "fail",
            "note": f"all traces up to length {result.max_len}",
            "witness": witness,
        })
    return checks


def _refine_checks(loaded: LoadedTarget, args,
                   counters: dict[str, int]) -> list[dict[str, Any]]:
    report = check_simulation(loaded.pair, budget=args.budget)
    counters["joint_pairs"] = report.pair_count
    checks = [_verdict_check(name, verdict)
              for name, verdict in report.conditions().items()]
    checks.append(_verdict_check("refinement", report.refinement))
    checks.append(_verdict_check("cross-check", report.cross_check))
    checks.extend(_unwinding_checks(loaded, args, counters))
    return checks


def _compositional_checks(loaded: LoadedTarget, args,
                          counters: dict[str, int]) -> list[dict[str, Any]]:
    if loaded.rg is None:
        raise UsageError(
            "this target declares no rely-guarantee contracts; "
            "compositional checking needs them")
    report = check_compositional(loaded.pair, loaded.rg, budget=args.budget)
    counters["joint_pairs"] = report.pair_count
    checks = [_verdict_check(name, verdict)
              for name, verdict in report.lemmas().items()]
    checks.append(_verdict_check("cross-check", report.cross_check))
    return checks


_RUNNERS: dict[str, Callable] = {
    "unwinding": _unwinding_checks,
    "ni": _ni_checks,
    "refine": _refine_checks,
    "compositional": _compositional_checks,
}

#: Flags each check kind accepts beyond --budget/--json and model params.
_KIND_FLAGS = {
    "unwinding": {"depth", "domain", "universe"},
    "ni": {"max_len", "domain"},
    "refine": {"depth"},
    "compositional": set(),
}


def _reject_stray_flags(args) -> None:
    given = set()
    if args.depth is not None:
        given.add("depth")
    if args.max_len is not None:
        given.add("max_len")
    if args.domain is not None:
        given.add("domain")
    if args.universe:
        given.add("universe")
    stray = sorted(given - _KIND_FLAGS[args.kind])
    if stray:
        flags = ", ".join("--" + name.replace("_", "-") for name in stray)
        raise UsageError(f"{flags} does not apply to 'check {args.kind}'")
    for name in ("depth", "max_len", "budget"):
        value = getattr(args, name)
        if value is not None and value < 1:
            raise UsageError(f"--{name.replace('_', '-')} must be at least 1")


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------

def _print_json(report: dict[str, Any]) -> None:
    print(json.dumps(report, indent=2, sort_keys=True))


def _format_value(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, list):
        if not value:
            return "(none)"
        shown = [_format_value(v) for v in value[:6]]
        if len(value) > 6:
            shown.append(f"(+{len(value) - 6} more)")
        return "  ".join(shown)
    return str(value)


def _print_check_text(report: dict[str, Any]) -> None:
    model = report["model"]
    if model["source"] == "builtin":
        params = " ".join(f"{k}={v}"
                          for k, v in sorted(model["build_params"].items()))
        identity = model["name"] + (f" ({params})" if params else "")
    else:
        identity = model["path"]
    print(f"ifsec check {report['kind']} {report['target']}")
    print(f"model: {identity}")
    for check in report["checks"]:
        status = check["status"]
        shown = status.upper() if status == "fail" else status
        note = f"  ({check['note']})" if check.get("note") else ""
        print(f"  {check['name']}: {shown}{note}")
        witness = check.get("witness")
        if witness:
            for key in sorted(witness):
                if key == "type":
                    continue
                print(f"      {key}: {_format_value(witness[key])}")
    counters = " ".join(f"{k}={v}"
                        for k, v in sorted(report["counters"].items()))
    if counters:
        print(f"counters: {counters}")
    print(f"verdict: {report['verdict'].upper()}")
    print(f"wall time: {report['wall_time_s']}s")


def cmd_check(args) -> int:
    started = time.monotonic()
    _reject_stray_flags(args)
    params = {name: getattr(args, name) for name in MODEL_PARAM_FLAGS
              if getattr(args, name) is not None}
    loaded = load_target(args.kind, args.target, params, args.budget)
    _warn_missing_reflexive(loaded)

    counters: dict[str, int] = {}
    for label, system in loaded.levels:
        counters[f"{label}_states"] = len(system.machine.states)
    checks = _RUNNERS[args.kind](loaded, args, counters)

    failed = any(check["status"] == "fail" for check in checks)
    report = {
        "schema": SCHEMA,
        "command": "check",
        "kind": args.kind,
        "target": args.target,
        "options": {
            "depth": args.depth,
            "max_len": args.max_len,
            "domain": args.domain,
            "universe": args.universe,
            "budget": args.budget,
        },
        "model": loaded.model_info,
        "checks": checks,
        "counters": counters,
        "verdict": "fail" if failed else "pass",
        "exit_code": 1 if failed else 0,
        "wall_time_s": round(time.monotonic() - started, 3),
    }
    if args.json:
        _print_json(report)
    else:
        _print_check_text(report)
    return report["exit_code"]


# ---------------------------------------------------------------------------
# list
# ---------------------------------------------------------------------------

def cmd_list(args) -> int:
    models = [{
        "name": entry.name,
        "description": entry.description,
        "params": {p: PARAM_DEFAULTS[p] for p in entry.params},
    } for entry in REGISTRY.values()]
    if args.json:
        _print_json({"schema": SCHEMA, "command": "list", "models": models})
        return 0
    width = max(len(m["name"]) for m in models)
    for m in models:
        params = " ".join(f"{k}={v}" for k, v in m["params"].items())
        print(f"{m['name']:<{width}}  [{params}]  {m['description']}")
    return 0


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------

def _load_report(path: str) -> dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as handle:
            data = json.load(handle)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not a JSON run report: {exc}") from None
    if not isinstance(data, dict) or data.get("schema") != SCHEMA:
        raise UsageError(f"{path} is not a schema-{SCHEMA} run report")
    if data.get("command") != "check":
        raise UsageError("only reports from 'ifsec check' can be replayed")
    return data


def _rebuild_target(data: dict[str, Any]) -> LoadedTarget:
    model = data.get("model") or {}
    kind = data.get("kind")
    if kind not in CHECK_KINDS:
        raise UsageError("report does not record a known check kind")
    if model.get("source") == "builtin":
        name = model.get("name")
        if name not in REGISTRY:
            raise UsageError(f"report names unknown model {name!r}")
        return load_target(kind, name, dict(model.get("params") or {}), None)
    if model.get("source") == "file":
        files = model.get("files") or {}
        for path, digest in sorted(files.items()):
            if not os.path.exists(path):
                raise UsageError(f"model file {path} is gone; "
                                 "the report is stale")
            if _sha256(path) != digest:
                raise UsageError(f"model file {path} changed since the "
                                 "report was written; the report is stale")
        return load_target(kind, model.get("path"), {}, None)
    raise UsageError("report does not identify its model")


def _system_for(loaded: LoadedTarget, check_name: str) -> SecureSystem:
    by_label = dict(loaded.levels)
    for label in by_label:
        if check_name.startswith(f"{label}-"):
            return by_label[label]
    return loaded.levels[0][1]


def _action_index(system: SecureSystem) -> dict[str, ActionId]:
    return {a.display(): a for a in system.machine.actions}


def _actions_from(system: SecureSystem, labels: Sequence[str]) -> list[ActionId]:
    index = _action_index(system)
    out = []
    for label in labels:
        action = index.get(label)
        if action is None:
            raise UsageError(f"the rebuilt model has no action {label!r}; "
                             "the report is stale")
        out.append(action)
    return out


def _execute(system: SecureSystem, actions: Sequence[ActionId],
             start: Sequence[State], total: bool = False) -> list[tuple[State, ...]]:
    current = frozenset(start)
    sets = [tuple(sorted(current))]
    step = system.machine.step_total if total else system.machine.step
    for action in actions:
        nxt: set[State] = set()
        for state in current:
            nxt.update(step(state, action))
        if not nxt:
            raise UsageError(
                f"witness trace does not execute: {action.display()!r} is "
                "disabled at this point; the report is stale")
        current = frozenset(nxt)
        sets.append(tuple(sorted(current)))
    return sets


def _find_state(candidates: Sequence[State], serial: str, what: str) -> State:
    for state in candidates:
        if state.serialize() == serial:
            return state
    raise UsageError(f"{what} from the report does not match the rebuilt "
                     "model; the report is stale")


def _run_payload(labels: Sequence[str] | None,
                 sets: Sequence[tuple[State, ...]]) -> list[dict[str, Any]]:
    steps = [{"action": None, "states": _serials(sets[0])}]
    for i, label in enumerate(labels or [], start=1):
        steps.append({"action": label, "states": _serials(sets[i])})
    return steps


def _replay_lr(loaded: LoadedTarget, check: dict[str, Any],
               witness: dict[str, Any]) -> dict[str, Any]:
    system = _system_for(loaded, check["name"])
    labels = witness.get("trace")
    if labels is None:
        state = _find_state(system.machine.universe or system.machine.states,
                            witness["state"], "witness state")
        sets = [tuple([state])]
    else:
        sets = _execute(system, _actions_from(system, labels),
                        [system.machine.initial])
        state = _find_state(sets[-1], witness["state"], "witness state")
    action = _actions_from(system, [witness["action"]])[0]
    successors = system.machine.step(state, action)
    successor = _find_state(successors, witness["successor"],
                            "witness successor")
    domain = witness["domain"]
    before = system.config.observe(domain, state)
    after = system.config.observe(domain, successor)
    if before == after:
        raise UsageError("the recorded observation change no longer "
                         "reproduces; the report is stale")
    return {
        "condition": "lr",
        "summary": (f"action {witness['action']!r} changes what domain "
                    f"{domain!r} observes, with no policy edge to allow it"),
        "runs": [{"title": f"run to the violating state ({check['name']})",
                  "steps": _run_payload(labels, sets)}],
        "facts": {
            "action": witness["action"],
            "domain": domain,
            "observation_before": render_value(before),
            "observation_after": render_value(after),
            "successor": successor.serialize(),
        },
    }


def _replay_sc(loaded: LoadedTarget, check: dict[str, Any],
               witness: dict[str, Any]) -> dict[str, Any]:
    system = _system_for(loaded, check["name"])
    runs = []
    states = []
    for slot, trace_key, state_key in (("first", "trace1", "s1"),
                                       ("second", "trace2", "s2")):
        labels = witness.get(trace_key)
        if labels is None:
            state = _find_state(
                system.machine.universe or system.machine.states,
                witness[state_key], f"{slot} witness state")
            sets = [tuple([state])]
        else:
            sets = _execute(system, _actions_from(system, labels),
                            [system.machine.initial])
            state = _find_state(sets[-1], witness[state_key],
                                f"{slot} witness state")
        states.append(state)
        runs.append({"title": f"run to the {slot} state ({check['name']})",
                     "steps": _run_payload(labels, sets)})
    action = _actions_from(system, [witness["action"]])[0]
    domain = witness["domain"]
    s1, s2 = states
    succ1 = _find_state(system.machine.step(s1, action),
                        witness["s1_successor"], "first successor")
    succ2 = _find_state(system.machine.step(s2, action),
                        witness["s2_successor"], "second successor")
    same_before = system.config.observe(domain, s1) \
        == system.config.observe(domain, s2)
    same_after = system.config.observe(domain, succ1) \
        == system.config.observe(domain, succ2)
    if not same_before or same_after:
        raise UsageError("the recorded distinguishability no longer "
                         "reproduces; the report is stale")
    return {
        "condition": "sc",
        "summary": (f"two states that domain {domain!r} cannot tell apart "
                    f"become distinguishable after {witness['action']!r}"),
        "runs": runs,
        "facts": {
            "action": witness["action"],
            "domain": domain,
            "s1_successor": succ1.serialize(),
            "s2_successor": succ2.serialize(),
        },
    }


def _replay_ni(loaded: LoadedTarget, check: dict[str, Any],
               witness: dict[str, Any]) -> dict[str, Any]:
    system = _system_for(loaded, check["name"])
    domain = witness["domain"]

    def view(states: Sequence[State]) -> list[str]:
        image = {system.config.observe(domain, s) for s in states}
        return [render_value(v) for v in sorted(image, key=value_key)]

    runs = []
    finals = []
    for title, key in (("full trace", "trace"), ("purged trace", "purged")):
        labels = witness[key]
        sets = _execute(system, _actions_from(system, labels),
                        [system.machine.initial], total=True)
        finals.append(sets[-1])
        runs.append({"title": title, "steps": _run_payload(labels, sets)})
    full_view, purged_view = view(finals[0]), view(finals[1])
    if full_view != witness["full_view"] \
            or purged_view != witness["purged_view"] \
            or full_view == purged_view:
        raise UsageError("the recorded view difference no longer "
                         "reproduces; the report is stale")
    return {
        "condition": "ni",
        "summary": (f"dropping the actions that domain {domain!r} may not "
                    "learn about changes what it observes"),
        "runs": runs,
        "facts": {
            "domain": domain,
            "full_view": full_view,
            "purged_view": purged_view,
        },
    }


def _require_pair(loaded: LoadedTarget) -> RefinementPair:
    if loaded.pair is None:
        raise UsageError("report kind needs a two-level target; "
                         "the report is stale")
    return loaded.pair


def _replay_c1(loaded: LoadedTarget, check: dict[str, Any],
               witness: dict[str, Any]) -> dict[str, Any]:
    pair = _require_pair(loaded)
    ci = pair.concrete.machine.initial
    ai = pair.abstract.machine.initial
    if ci.serialize() != witness["concrete_initial"] \
            or ai.serialize() != witness["abstract_initial"] \
            or pair.alpha.holds(ci, ai):
        raise UsageError("the recorded initial-state mismatch no longer "
                         "reproduces; the report is stale")
    return {
        "condition": "c1",
        "summary": "the two initial states are not related",
        "runs": [],
        "facts": {"concrete_initial": ci.serialize(),
                  "abstract_initial": ai.serialize()},
    }


def _replay_c2(loaded: LoadedTarget, check: dict[str, Any],
               witness: dict[str, Any]) -> dict[str, Any]:
    pair = _require_pair(loaded)
    system = pair.concrete
    labels = witness["trace"]
    if not labels or labels[-1] != witness["action"]:
        raise UsageError("witness trace does not end at the failing action; "
                         "the report is stale")
    actions = _actions_from(system, labels)
    sets = _execute(system, actions, [system.machine.initial])
    state = _find_state(sets[-2], witness["state"], "witness state")
    successor = _find_state(system.machine.step(state, actions[-1]),
                            witness["successor"], "witness successor")
    abstract_state = _find_state(pair.abstract.machine.states,
                                 witness["abstract_state"],
                                 "abstract witness state")
    if not pair.alpha.holds(state, abstract_state) \
            or pair.alpha.holds(successor, abstract_state):
        raise UsageError("the recorded relation break no longer reproduces; "
                         "the report is stale")
    return {
        "condition": "c2",
        "summary": (f"silent action {witness['action']!r} leaves the state "
                    "relation while the abstract side stands still"),
        "runs": [{"title": "concrete run (ends at the breaking step)",
                  "steps": _run_payload(labels, sets)}],
        "facts": {
            "action": witness["action"],
            "abstract_state": abstract_state.serialize(),
            "state": state.serialize(),
            "successor": successor.serialize(),
        },
    }


def _replay_c3(loaded: LoadedTarget, check: dict[str, Any],
               witness: dict[str, Any]) -> dict[str, Any]:
    pair = _require_pair(loaded)
    system = pair.concrete
    labels = witness["trace"]
    if not labels or labels[-1] != witness["action"]:
        raise UsageError("witness trace does not end at the failing action; "
                         "the report is stale")
    actions = _actions_from(system, labels)
    sets = _execute(system, actions, [system.machine.initial])
    state = _find_state(sets[-2], witness["state"], "witness state")
    successor = _find_state(system.machine.step(state, actions[-1]),
                            witness["successor"], "witness successor")
    abstract_state = _find_state(pair.abstract.machine.states,
                                 witness["abstract_state"],
                                 "abstract witness state")
    abstract_action = _actions_from(pair.abstract,
                                    [witness["abstract_action"]])[0]
    candidates = pair.abstract.machine.step(abstract_state, abstract_action)
    if any(pair.alpha.holds(successor, c) for c in candidates):
        raise UsageError("the recorded missing abstract match no longer "
                         "reproduces; the report is stale")
    return {
        "condition": "c3",
        "summary": (f"no abstract step on {witness['abstract_action']!r} "
                    f"matches the concrete step {witness['action']!r}"),
        "runs": [{"title": "concrete run (ends at the unmatched step)",
                  "steps": _run_payload(labels, sets)}],
        "facts": {
            "action": witness["action"],
            "abstract_action": witness["abstract_action"],
            "abstract_candidates": _serials(candidates),
        },
    }


def _replay_c4(loaded: LoadedTarget, check: dict[str, Any],
               witness: dict[str, Any]) -> dict[str, Any]:
    pair = _require_pair(loaded)
    action = _actions_from(pair.concrete, [witness["action"]])[0]
    abstract_action = _actions_from(pair.abstract,
                                    [witness["abstract_action"]])[0]
    cd = pair.concrete.config.domain_of(action)
    ad = pair.abstract.config.domain_of(abstract_action)
    if cd == ad or cd != witness["concrete_domain"] \
            or ad != witness["abstract_domain"]:
        raise UsageError("the recorded domain mismatch no longer reproduces; "
                         "the report is stale")
    return {
        "condition": "c4",
        "summary": (f"{witness['action']!r} belongs to domain {cd!r} but its "
                    f"abstract image {witness['abstract_action']!r} belongs "
                    f"to {ad!r}"),
        "runs": [],
        "facts": {
            "action": witness["action"],
            "abstract_action": witness["abstract_action"],
            "concrete_domain": cd,
            "abstract_domain": ad,
        },
    }


def _replay_c5(loaded: LoadedTarget, check: dict[str, Any],
               witness: dict[str, Any]) -> dict[str, Any]:
    pair = _require_pair(loaded)
    edge = (witness["source"], witness["target"])
    concrete_has = edge in pair.concrete.config.policy
    abstract_has = edge in pair.abstract.config.policy
    if concrete_has == abstract_has:
        raise UsageError("the recorded policy difference no longer "
                         "reproduces; the report is stale")
    return {
        "condition": "c5",
        "summary": (f"policy edge {edge[0]} -> {edge[1]} exists on only one "
                    "level"),
        "runs": [],
        "facts": {"source": edge[0], "target": edge[1],
                  "concrete_has_edge": concrete_has,
                  "abstract_has_edge": abstract_has},
    }


def _replay_c6(loaded: LoadedTarget, check: dict[str, Any],
               witness: dict[str, Any]) -> dict[str, Any]:
    pair = _require_pair(loaded)
    system = pair.concrete
    domain = witness["domain"]
    runs = []
    pairs = []
    for slot, trace_key, pair_key in (("first", "first_trace", "first"),
                                      ("second", "second_trace", "second")):
        labels = witness[trace_key]
        sets = _execute(system, _actions_from(system, labels),
                        [system.machine.initial])
        cstate = _find_state(sets[-1], witness[pair_key][0],
                             f"{slot} concrete state")
        astate = _find_state(pair.abstract.machine.states,
                             witness[pair_key][1], f"{slot} abstract state")
        pairs.append((cstate, astate))
        runs.append({"title": f"{slot} concrete run",
                     "steps": _run_payload(labels, sets)})
    (c1s, a1s), (c2s, a2s) = pairs
    concrete_indist = pair.concrete.config.observe(domain, c1s) \
        == pair.concrete.config.observe(domain, c2s)
    abstract_indist = pair.abstract.config.observe(domain, a1s) \
        == pair.abstract.config.observe(domain, a2s)
    if concrete_indist != witness["concrete_indist"] \
            or abstract_indist != witness["abstract_indist"] \
            or concrete_indist == abstract_indist:
        raise UsageError("the recorded observation disagreement no longer "
                         "reproduces; the report is stale")
    return {
        "condition": "c6",
        "summary": (f"domain {domain!r} tells a pair of runs apart on one "
                    "level but not the other"),
        "runs": runs,
        "facts": {
            "domain": domain,
            "concrete_indist": concrete_indist,
            "abstract_indist": abstract_indist,
        },
    }


def _replay_lemma(loaded: LoadedTarget, check: dict[str, Any],
                  witness: dict[str, Any]) -> dict[str, Any]:
    pair = _require_pair(loaded)
    level = witness.get("level", "concrete")
    system = pair.abstract if level == "abstract" else pair.concrete
    labels = witness["trace"]
    runs = []
    if labels:
        actions = _actions_from(system, labels)
        sets = _execute(system, actions, [system.machine.initial])
        anchor = sets[-2] if witness.get("action") else sets[-1]
        _find_state(anchor, witness["state"], "witness state")
        if witness.get("action") and witness.get("successor"):
            _find_state(sets[-1], witness["successor"], "witness successor")
        runs.append({"title": f"{level} run (ends at the offending step)",
                     "steps": _run_payload(labels, sets)})
    else:
        pool = system.machine.universe or system.machine.states
        _find_state(pool, witness["state"], "witness state")
        if witness.get("successor"):
            _find_state(pool, witness["successor"], "witness successor")
    return {
        "condition": check["name"],
        "summary": (f"component {witness['component']!r}: "
                    f"{witness['reason']}"),
        "runs": runs,
        "facts": {
            "component": witness["component"],
            "reason": witness["reason"],
            "state": witness["state"],
            "successor": witness.get("successor"),
            "other_component": witness.get("other_component"),
        },
    }


_REPLAYERS: dict[str, Callable] = {
    "lr": _replay_lr,
    "sc": _replay_sc,
    "ni": _replay_ni,
    "c1": _replay_c1,
    "c2": _replay_c2,
    "c3": _replay_c3,
    "c4": _replay_c4,
    "c5": _replay_c5,
    "c6": _replay_c6,
    "lemma": _replay_lemma,
}


def _print_replay_text(outcome: dict[str, Any]) -> None:
    print(f"replay: check {outcome['kind']} {outcome['target']} "
          f"({outcome['check']})")
    for run in outcome["runs"]:
        print(f"{run['title']}:")
        for i, step in enumerate(run["steps"]):
            states = step["states"]
            shown = states[:3]
            suffix = f"  (+{len(states) - 3} more)" if len(states) > 3 else ""
            joined = " | ".join(shown) + suffix
            if step["action"] is None:
                print(f"    .  {joined}")
            else:
                print(f"   {i:>2}  {step['action']}")
                print(f"       -> {joined}")
    for key in sorted(outcome["facts"]):
        value = outcome["facts"][key]
        if value is not None:
            print(f"{key}: {_format_value(value)}")
    print(f"reproduced {outcome['condition']}: {outcome['summary']}")


def cmd_replay(args) -> int:
    data = _load_report(args.report)
    failing = [c for c in data.get("checks", [])
               if c.get("status") == "fail"]
    if not failing:
        raise UsageError("the report records a pass; there is no violation "
                         "to replay")
    check = failing[0]
    witness = check.get("witness")
    if not witness or "type" not in witness:
        raise UsageError("the failing check carries no witness to replay")
    replayer = _REPLAYERS.get(witness["type"])
    if replayer is None:
        raise UsageError(f"cannot replay witness type {witness['type']!r}")
    loaded = _rebuild_target(data)
    outcome = replayer(loaded, check, witness)
    outcome.update({
        "kind": data["kind"],
        "target": data["target"],
        "check": check["name"],
        "reproduced": True,
    })
    if args.json:
        _print_json({
            "schema": SCHEMA,
            "command": "replay",
            "report": args.report,
            "kind": outcome["kind"],
            "target": outcome["target"],
            "check": outcome["check"],
            "condition": outcome["condition"],
            "summary": outcome["summary"],
            "reproduced": True,
            "runs": outcome["runs"],
            "facts": outcome["facts"],
        })
    else:
        _print_replay_text(outcome)
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ifsec",
        description="Explicit-state information-flow checks for concurrent "
                    "systems: flow-policy unwinding, bounded purge-based "
                    "noninterference, two-level refinement, and "
                    "rely-guarantee decomposition.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    list_p = sub.add_parser("list", help="list the built-in models")
    list_p.add_argument("--json", action="store_true",
                        help="machine-readable output")
    list_p.set_defaults(handler=cmd_list)

    check_p = sub.add_parser("check", help="run a verification check")
    check_p.add_argument("kind", choices=CHECK_KINDS,
                         help="which property to check")
    check_p.add_argument("target",
                         help="built-in model name or .ifs file path "
                              "(refine/compositional take a refinement file)")
    check_p.add_argument("--depth", type=int, default=None, metavar="N",
                         help="bound the reachability scope at depth N "
                              "(unwinding, refine)")
    check_p.add_argument("--max-len", dest="max_len", type=int, default=None,
                         metavar="L",
                         help=f"trace length bound for ni "
                              f"(default: {DEFAULT_MAX_LEN})")
    check_p.add_argument("--domain", default=None, metavar="D",
                         help="restrict unwinding/ni to one observer domain")
    check_p.add_argument("--universe", action="store_true",
                         help="quantify unwinding over the declared state "
                              "universe instead of the reachable set")
    check_p.add_argument("--budget", type=int, default=None, metavar="STATES",
                         help="exploration ceiling (states, pairs, or "
                              "traces); exceeding it exits 4")
    check_p.add_argument("--json", action="store_true",
                         help="print the run report as JSON")
    for name in MODEL_PARAM_FLAGS:
        check_p.add_argument(f"--{name}", type=int, default=None,
                             metavar="N",
                             help=f"model parameter (default: "
                                  f"{PARAM_DEFAULTS[name]})")
    check_p.set_defaults(handler=cmd_check)

    replay_p = sub.add_parser(
        "replay", help="re-execute the violation witness of a saved report")
    replay_p.add_argument("report", help="path to a --json run report")
    replay_p.add_argument("--json", action="store_true",
                          help="machine-readable output")
    replay_p.set_defaults(handler=cmd_replay)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"ifsec: error: {exc}", file=sys.stderr)
        return 2
    except ParseError as exc:
        print(f"ifsec: parse error: {exc}", file=sys.stderr)
        return 3
    except ModelError as exc:
        print(f"ifsec: model error: {exc}", file=sys.stderr)
        return 3
    except BudgetError as exc:
        print(f"ifsec: budget exhausted: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
