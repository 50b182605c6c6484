"""Simulation between an abstract and a concrete system, and its checks.

A refinement pair relates two secure systems through a state relation
(alpha) and an action map (zeta) sending each concrete action to one
abstract action or to the silent marker tau. Six conditions make the
simulation security-preserving:

  c1  the initial states are related;
  c2  silent concrete steps stay related to the same abstract state;
  c3  mapped concrete steps are matched by exactly one abstract step
      landing in a related state (no stuttering on the abstract side);
  c4  zeta preserves the acting domain;
  c5  the abstract policy allows at most what the concrete one allows;
  c6  related states are indistinguishable for a domain at one level
      exactly when they are at the other.

`check_simulation` evaluates all six and then cross-validates the
soundness claim behind them executably: when everything passes and the
abstract system passes unwinding, the concrete system must too, and the
report raises an alarm rather than trusting the theorem if it does not.

`check_compositional` checks the per-component rely-guarantee lemmas
that let the simulation be established one component at a time, and
cross-validates them against the joint exploration the same way.

The policy-direction convention deserves a note: c5 requires the
abstract policy to be a subset of the concrete one. Folklore phrases
refinement as the implementation being stricter; the subset direction
used here is the one that makes local respect carry from the abstract
level down, so the checker follows it.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

from ifsec.core import (
    DEFAULT_STATE_BUDGET,
    ActionId,
    BudgetError,
    ModelError,
    SecureSystem,
    State,
    Value,
)
from ifsec.unwinding import check_unwinding

__all__ = [
    "TAU",
    "Alpha",
    "CompositionalReport",
    "ComponentContract",
    "JointExploration",
    "RefinementPair",
    "RelyGuaranteeSpec",
    "SimulationReport",
    "Verdict",
    "Zeta",
    "check_alpha_preserves_indist",
    "check_compositional",
    "check_domain_preservation",
    "check_policy_inclusion",
    "check_simulation",
    "joint_explore",
    "total_relation",
]


class _Tau:
    """Marker for concrete actions with no abstract counterpart."""

    _instance: "_Tau | None" = None

    def __new__(cls) -> "_Tau":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "tau"


TAU = _Tau()


def total_relation(left: State, right: State) -> bool:
    """The relation that holds between any two states.

    The usual abstract-level rely and guarantee for systems whose
    abstraction hides all interleaving detail.
    """
    return True


@dataclass(frozen=True)
class Alpha:
    """State relation between concrete and abstract states."""

    predicate: Callable[[State, State], bool]
    description: str = "predicate"

    @staticmethod
    def from_predicate(predicate: Callable[[State, State], bool],
                       description: str = "predicate") -> "Alpha":
        return Alpha(predicate, description)

    @staticmethod
    def from_pairs(pairs: Iterable[tuple[State, State]]) -> "Alpha":
        table = frozenset(pairs)
        return Alpha(lambda c, a: (c, a) in table,
                     f"explicit pairs ({len(table)})")

    def holds(self, concrete: State, abstract: State) -> bool:
        return bool(self.predicate(concrete, abstract))


@dataclass(frozen=True)
class Zeta:
    """Total map from concrete actions to abstract actions or TAU."""

    mapping: Mapping[ActionId, ActionId | _Tau]

    @staticmethod
    def identity(actions: Iterable[ActionId]) -> "Zeta":
        return Zeta({a: a for a in actions})

    def map(self, action: ActionId) -> ActionId | _Tau:
        try:
            return self.mapping[action]
        except KeyError:
            raise ModelError(
                f"zeta is not total: no image for action {action.display()!r}"
            ) from None

    def is_silent(self, action: ActionId) -> bool:
        return self.map(action) is TAU


@dataclass(frozen=True)
class RefinementPair:
    """A concrete system simulating an abstract one via alpha and zeta."""

    concrete: SecureSystem
    abstract: SecureSystem
    alpha: Alpha
    zeta: Zeta

    def __post_init__(self) -> None:
        cd = set(self.concrete.config.domains)
        ad = set(self.abstract.config.domains)
        if cd != ad:
            raise ModelError(
                "refinement levels must share one domain set; "
                f"concrete has {sorted(cd)}, abstract has {sorted(ad)}"
            )
        abstract_actions = set(self.abstract.machine.actions)
        for action in self.concrete.machine.actions:
            image = self.zeta.map(action)
            if image is not TAU and image not in abstract_actions:
                raise ModelError(
                    f"zeta maps {action.display()!r} to "
                    f"{image.display()!r}, which the abstract machine lacks"
                )


@dataclass(frozen=True)
class Verdict:
    """Outcome of one condition: pass, fail (with witness), or skipped."""

    status: str
    witness: object | None = None
    note: str | None = None

    @property
    def ok(self) -> bool:
        return self.status == "pass"

    @staticmethod
    def passed(note: str | None = None) -> "Verdict":
        return Verdict("pass", None, note)

    @staticmethod
    def failed(witness: object, note: str | None = None) -> "Verdict":
        return Verdict("fail", witness, note)

    @staticmethod
    def skipped(note: str) -> "Verdict":
        return Verdict("skipped", None, note)


Pair = tuple[State, State]


@dataclass(frozen=True)
class C1Witness:
    concrete_initial: State
    abstract_initial: State


@dataclass(frozen=True)
class C2Witness:
    trace: tuple[ActionId, ...]
    action: ActionId
    state: State
    abstract_state: State
    successor: State


@dataclass(frozen=True)
class C3Witness:
    trace: tuple[ActionId, ...]
    action: ActionId
    abstract_action: ActionId
    state: State
    abstract_state: State
    successor: State
    abstract_candidates: tuple[State, ...]


@dataclass(frozen=True)
class C4Witness:
    action: ActionId
    abstract_action: ActionId
    concrete_domain: str
    abstract_domain: str


@dataclass(frozen=True)
class C5Witness:
    source: str
    target: str


@dataclass(frozen=True)
class C6Witness:
    domain: str
    first: Pair
    second: Pair
    first_trace: tuple[ActionId, ...]
    second_trace: tuple[ActionId, ...]
    concrete_indist: bool
    abstract_indist: bool


@dataclass(frozen=True)
class LemmaWitness:
    """Shared witness shape for the four compositional lemmas."""

    component: str
    trace: tuple[ActionId, ...]
    state: State
    abstract_state: State | None
    action: ActionId | None
    successor: State | None
    abstract_successor: State | None
    reason: str
    level: str = "concrete"
    other_component: str | None = None


@dataclass(frozen=True)
class JointExploration:
    """Alpha pairs discovered from the initial pair, plus c1..c3 verdicts.

    `pairs` is in discovery (breadth-first) order; `parent` lets each
    pair be replayed as a concrete trace from the initial pair. When a
    verdict fails the exploration stopped there, so `pairs` holds the
    prefix discovered up to the violation.
    """

    pairs: tuple[Pair, ...]
    parent: Mapping[Pair, tuple[Pair, ActionId]]
    c1: Verdict
    c2: Verdict
    c3: Verdict

    @property
    def ok(self) -> bool:
        return self.c1.ok and self.c2.ok and self.c3.ok

    def trace_to(self, pair: Pair) -> tuple[ActionId, ...]:
        return _pair_trace(self.parent, pair)


def _abstract_witness(alpha: Alpha, candidates: Iterable[State],
                      successor: State) -> State | None:
    for sigma2 in candidates:
        if alpha.holds(successor, sigma2):
            return sigma2
    return None


def joint_explore(pair: RefinementPair,
                  budget: int | None = None) -> JointExploration:
    """Breadth-first search over related state pairs, stopping at the
    first c1/c2/c3 violation.

    Every concrete step from a discovered pair must either keep alpha
    with the same abstract state (silent case) or be matched by one
    abstract step on zeta's image of the action; the matched pair is
    what exploration continues from. Pair discovery order, action
    order, and successor order are all canonical, so the first
    violation found is the same on every run and its trace is shortest.
    """
    mc = pair.concrete.machine
    ma = pair.abstract.machine
    alpha, zeta = pair.alpha, pair.zeta
    limit = DEFAULT_STATE_BUDGET if budget is None else budget

    start = (mc.initial, ma.initial)
    if not alpha.holds(*start):
        skip = Verdict.skipped("exploration aborted: initial pair unrelated")
        return JointExploration(
            pairs=(),
            parent={},
            c1=Verdict.failed(C1Witness(*start)),
            c2=skip,
            c3=skip,
        )

    parent: dict[Pair, tuple[Pair, ActionId]] = {}
    seen = {start}
    order = [start]
    queue = deque([start])
    while queue:
        current = queue.popleft()
        s, sigma = current
        for action in mc.actions:
            image = zeta.map(action)
            for successor in mc.step(s, action):
                if image is TAU:
                    if not alpha.holds(successor, sigma):
                        witness = C2Witness(
                            trace=_pair_trace(parent, current) + (action,),
                            action=action,
                            state=s,
                            abstract_state=sigma,
                            successor=successor,
                        )
                        return JointExploration(
                            pairs=tuple(order),
                            parent=parent,
                            c1=Verdict.passed(),
                            c2=Verdict.failed(witness),
                            c3=Verdict.skipped("exploration aborted at the silent-step failure"),
                        )
                    nxt = (successor, sigma)
                else:
                    candidates = ma.step(sigma, image)
                    sigma2 = _abstract_witness(alpha, candidates, successor)
                    if sigma2 is None:
                        witness = C3Witness(
                            trace=_pair_trace(parent, current) + (action,),
                            action=action,
                            abstract_action=image,
                            state=s,
                            abstract_state=sigma,
                            successor=successor,
                            abstract_candidates=tuple(candidates),
                        )
                        return JointExploration(
                            pairs=tuple(order),
                            parent=parent,
                            c1=Verdict.passed(),
                            c2=Verdict.skipped("exploration aborted at the mapped-step failure"),
                            c3=Verdict.failed(witness),
                        )
                    nxt = (successor, sigma2)
                if nxt not in seen:
                    if len(seen) >= limit:
                        raise BudgetError(
                            f"state budget exceeded: more than {limit} related "
                            "state pairs reachable (raise --budget or shrink the model)"
                        )
                    seen.add(nxt)
                    parent[nxt] = (current, action)
                    order.append(nxt)
                    queue.append(nxt)
    return JointExploration(
        pairs=tuple(order),
        parent=parent,
        c1=Verdict.passed(),
        c2=Verdict.passed(),
        c3=Verdict.passed(),
    )


def _pair_trace(parent: Mapping[Pair, tuple[Pair, ActionId]], pair: Pair) -> tuple[ActionId, ...]:
    steps: list[ActionId] = []
    cursor = pair
    while cursor in parent:
        cursor, action = parent[cursor]
        steps.append(action)
    steps.reverse()
    return tuple(steps)


def check_domain_preservation(pair: RefinementPair) -> Verdict:
    """c4: a mapped action acts for the same domain at both levels."""
    for action in pair.concrete.machine.actions:
        image = pair.zeta.map(action)
        if image is TAU:
            continue
        cd = pair.concrete.config.domain_of(action)
        ad = pair.abstract.config.domain_of(image)
        if cd != ad:
            return Verdict.failed(C4Witness(action, image, cd, ad))
    return Verdict.passed()


def check_policy_inclusion(pair: RefinementPair) -> Verdict:
    """c5: every abstract flow edge is also a concrete flow edge."""
    extra = sorted(pair.abstract.config.policy - pair.concrete.config.policy)
    if extra:
        return Verdict.failed(C5Witness(*extra[0]))
    return Verdict.passed()


def check_alpha_preserves_indist(pair: RefinementPair,
                                 exploration: JointExploration) -> Verdict:
    """c6: over discovered pairs, per-domain view classes coincide.

    Two related pairs are concretely indistinguishable for a domain
    exactly when they are abstractly indistinguishable. Equivalently,
    the map from concrete view to abstract view over the pair set is a
    well-defined injective function per domain; the first conflict in
    (domain, sorted pair) order is the witness, which makes the verdict
    symmetric in the two offending pairs.
    """
    observe_c = pair.concrete.config.observe
    observe_a = pair.abstract.config.observe
    ordered = sorted(exploration.pairs)
    for domain in sorted(pair.concrete.config.domains):
        forward: dict[Value, tuple[Value, Pair]] = {}
        backward: dict[Value, tuple[Value, Pair]] = {}
        for p in ordered:
            s, sigma = p
            cview = observe_c(domain, s)
            aview = observe_a(domain, sigma)
            if cview in forward and forward[cview][0] != aview:
                earlier = forward[cview][1]
                return Verdict.failed(C6Witness(
                    domain=domain, first=earlier, second=p,
                    first_trace=exploration.trace_to(earlier),
                    second_trace=exploration.trace_to(p),
                    concrete_indist=True, abstract_indist=False,
                ))
            if aview in backward and backward[aview][0] != cview:
                earlier = backward[aview][1]
                return Verdict.failed(C6Witness(
                    domain=domain, first=earlier, second=p,
                    first_trace=exploration.trace_to(earlier),
                    second_trace=exploration.trace_to(p),
                    concrete_indist=False, abstract_indist=True,
                ))
            forward.setdefault(cview, (aview, p))
            backward.setdefault(aview, (cview, p))
    return Verdict.passed()


@dataclass(frozen=True)
class CrossCheck:
    """Executable form of the soundness claim a passing report relies on."""

    abstract_unwinding_ok: bool
    concrete_unwinding_ok: bool | None


@dataclass(frozen=True)
class SimulationReport:
    c1: Verdict
    c2: Verdict
    c3: Verdict
    c4: Verdict
    c5: Verdict
    c6: Verdict
    refinement: Verdict
    cross_check: Verdict
    pair_count: int
    scope_tag: str = "joint-reachable"

    @property
    def ok(self) -> bool:
        return self.refinement.ok and self.cross_check.status != "fail"

    def conditions(self) -> dict[str, Verdict]:
        return {"c1": self.c1, "c2": self.c2, "c3": self.c3,
                "c4": self.c4, "c5": self.c5, "c6": self.c6}


def check_simulation(pair: RefinementPair,
                     budget: int | None = None) -> SimulationReport:
    """Evaluate c1..c6 and cross-validate soundness on a full pass.

    The cross-check runs unwinding on the abstract system and, when
    that passes, requires the concrete system to pass it too. A passing
    simulation with a passing abstract system and a failing concrete
    one means the checker (or the theory it leans on) is broken; that
    surfaces as a failed cross_check verdict, never silently.
    """
    exploration = joint_explore(pair, budget=budget)
    c4 = check_domain_preservation(pair)
    c5 = check_policy_inclusion(pair)
    if exploration.ok:
        c6 = check_alpha_preserves_indist(pair, exploration)
    else:
        c6 = Verdict.skipped("requires the pair set from a clean exploration")
    verdicts = [exploration.c1, exploration.c2, exploration.c3, c4, c5, c6]
    if all(v.ok for v in verdicts):
        refinement = Verdict.passed()
        abstract_report = check_unwinding(pair.abstract, budget=budget)
        if abstract_report.ok:
            concrete_report = check_unwinding(pair.concrete, budget=budget)
            if concrete_report.ok:
                cross = Verdict("pass", CrossCheck(True, True),
                                "abstract and concrete unwinding both pass")
            else:
                cross = Verdict("fail", CrossCheck(True, False),
                                "soundness alarm: simulation and abstract "
                                "unwinding pass but concrete unwinding fails")
        else:
            cross = Verdict("pass", CrossCheck(False, None),
                            "abstract unwinding fails; nothing to carry down")
    else:
        failing = [name for name, v in zip("c1 c2 c3 c4 c5 c6".split(), verdicts)
                   if v.status == "fail"]
        refinement = Verdict.failed(None, "failed conditions: " + ", ".join(failing))
        cross = Verdict.skipped("simulation did not pass")
    return SimulationReport(
        c1=exploration.c1, c2=exploration.c2, c3=exploration.c3,
        c4=c4, c5=c5, c6=c6,
        refinement=refinement,
        cross_check=cross,
        pair_count=len(exploration.pairs),
    )


Relation = Callable[[State, State], bool]
MoveEnumerator = Callable[[State], Iterable[State]]


@dataclass(frozen=True)
class ComponentContract:
    """Rely and guarantee for one component, at both levels.

    `guarantee_moves` (and its abstract sibling) enumerate the successor
    states the guarantee relation admits from a given state; they let
    the compatibility lemma check the declared relation itself rather
    than only the moves the machine happens to take. Without an
    enumerator the check falls back to witnessed machine steps and the
    report says so.
    """

    rely: Relation
    guarantee: Relation
    abstract_rely: Relation = total_relation
    abstract_guarantee: Relation = total_relation
    guarantee_moves: MoveEnumerator | None = None
    abstract_guarantee_moves: MoveEnumerator | None = None


@dataclass(frozen=True)
class RelyGuaranteeSpec:
    contracts: Mapping[str, ComponentContract]
    component_of: Callable[[ActionId], str]

    def component(self, action: ActionId) -> str:
        name = self.component_of(action)
        if name not in self.contracts:
            raise ModelError(
                f"action {action.display()!r} belongs to component {name!r}, "
                "which has no rely-guarantee contract"
            )
        return name


@dataclass(frozen=True)
class CompositionalReport:
    lemma1: Verdict
    lemma2: Verdict
    lemma3: Verdict
    lemma4: Verdict
    cross_check: Verdict
    pair_count: int
    components: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return (self.lemma1.ok and self.lemma2.ok and self.lemma3.ok
                and self.lemma4.ok and self.cross_check.status != "fail")

    def lemmas(self) -> dict[str, Verdict]:
        return {"lemma1": self.lemma1, "lemma2": self.lemma2,
                "lemma3": self.lemma3, "lemma4": self.lemma4}


def check_compositional(pair: RefinementPair, rg: RelyGuaranteeSpec,
                        budget: int | None = None) -> CompositionalReport:
    """Check the four rely-guarantee lemmas over the discovered pairs.

    Lemma 1: a component's silent steps satisfy its own guarantee and
    keep alpha with the abstract state unchanged. Lemma 2: its mapped
    steps satisfy the guarantee at both levels and have a related
    abstract witness. Lemma 3: any other component's move, coupled with
    its zeta-determined abstract counterpart, satisfies this component's
    relies and lands in alpha. Lemma 4: every guarantee move of one
    component satisfies every other component's rely, at both levels;
    declared enumerators are used where given, witnessed steps
    otherwise.

    When all four pass, the joint exploration's silent and mapped step
    conditions must also pass; the report cross-checks that implication
    and flags a violation as an alarm.
    """
    exploration = joint_explore(pair, budget=budget)
    mc = pair.concrete.machine
    ma = pair.abstract.machine
    alpha, zeta = pair.alpha, pair.zeta
    components = tuple(sorted(rg.contracts))

    if not exploration.c1.ok:
        skip = Verdict.skipped("initial pair unrelated; nothing to quantify over")
        return CompositionalReport(
            lemma1=skip, lemma2=skip, lemma3=skip, lemma4=skip,
            cross_check=Verdict.skipped("lemmas were not evaluated"),
            pair_count=0,
            components=components,
        )

    steps_by: dict[str, list[tuple[Pair, ActionId, State]]] = {k: [] for k in components}
    abstract_moves_by: dict[str, set[tuple[State, State]]] = {k: set() for k in components}
    for current in exploration.pairs:
        s, sigma = current
        for action in mc.actions:
            mover = rg.component(action)
            for successor in mc.step(s, action):
                steps_by[mover].append((current, action, successor))

    lemma1 = lemma2 = lemma3 = None

    for mover in components:
        contract = rg.contracts[mover]
        for current, action, successor in steps_by[mover]:
            s, sigma = current
            image = zeta.map(action)
            if image is TAU:
                if lemma1 is None:
                    if not contract.guarantee(s, successor):
                        lemma1 = Verdict.failed(LemmaWitness(
                            component=mover,
                            trace=exploration.trace_to(current) + (action,),
                            state=s, abstract_state=sigma, action=action,
                            successor=successor, abstract_successor=None,
                            reason="silent step leaves the component's guarantee",
                        ))
                    elif not alpha.holds(successor, sigma):
                        lemma1 = Verdict.failed(LemmaWitness(
                            component=mover,
                            trace=exploration.trace_to(current) + (action,),
                            state=s, abstract_state=sigma, action=action,
                            successor=successor, abstract_successor=None,
                            reason="silent step breaks the state relation",
                        ))
            else:
                witness = None
                for sigma2 in ma.step(sigma, image):
                    if alpha.holds(successor, sigma2) and \
                            contract.abstract_guarantee(sigma, sigma2):
                        witness = sigma2
                        break
                if witness is not None:
                    abstract_moves_by[mover].add((sigma, witness))
                if lemma2 is None:
                    if not contract.guarantee(s, successor):
                        lemma2 = Verdict.failed(LemmaWitness(
                            component=mover,
                            trace=exploration.trace_to(current) + (action,),
                            state=s, abstract_state=sigma, action=action,
                            successor=successor, abstract_successor=None,
                            reason="mapped step leaves the component's guarantee",
                        ))
                    elif witness is None:
                        lemma2 = Verdict.failed(LemmaWitness(
                            component=mover,
                            trace=exploration.trace_to(current) + (action,),
                            state=s, abstract_state=sigma, action=action,
                            successor=successor, abstract_successor=None,
                            reason="no abstract step lands in alpha within "
                                   "the abstract guarantee",
                        ))

    for observer in components:
        if lemma3 is not None:
            break
        contract = rg.contracts[observer]
        for mover in components:
            if mover == observer or lemma3 is not None:
                continue
            for current, action, successor in steps_by[mover]:
                s, sigma = current
                if not contract.rely(s, successor):
                    lemma3 = Verdict.failed(LemmaWitness(
                        component=observer, other_component=mover,
                        trace=exploration.trace_to(current) + (action,),
                        state=s, abstract_state=sigma, action=action,
                        successor=successor, abstract_successor=None,
                        reason="environment step breaks the concrete rely",
                    ))
                    break
                image = zeta.map(action)
                if image is TAU:
                    counterpart: State | None = sigma
                else:
                    counterpart = _abstract_witness(alpha, ma.step(sigma, image), successor)
                if counterpart is None:
                    lemma3 = Verdict.failed(LemmaWitness(
                        component=observer, other_component=mover,
                        trace=exploration.trace_to(current) + (action,),
                        state=s, abstract_state=sigma, action=action,
                        successor=successor, abstract_successor=None,
                        reason="environment step has no abstract counterpart",
                    ))
                    break
                if not contract.abstract_rely(sigma, counterpart):
                    lemma3 = Verdict.failed(LemmaWitness(
                        component=observer, other_component=mover,
                        trace=exploration.trace_to(current) + (action,),
                        state=s, abstract_state=sigma, action=action,
                        successor=successor, abstract_successor=counterpart,
                        reason="environment step breaks the abstract rely",
                    ))
                    break
                if not alpha.holds(successor, counterpart):
                    lemma3 = Verdict.failed(LemmaWitness(
                        component=observer, other_component=mover,
                        trace=exploration.trace_to(current) + (action,),
                        state=s, abstract_state=sigma, action=action,
                        successor=successor, abstract_successor=counterpart,
                        reason="environment step leaves the state relation",
                    ))
                    break

    lemma4, lemma4_note = _check_compatibility(
        exploration, rg, components, steps_by, abstract_moves_by)

    lemma1 = lemma1 or Verdict.passed()
    lemma2 = lemma2 or Verdict.passed()
    lemma3 = lemma3 or Verdict.passed()

    all_pass = all(v.ok for v in (lemma1, lemma2, lemma3, lemma4))
    if all_pass:
        if exploration.c2.ok and exploration.c3.ok:
            cross = Verdict.passed("lemmas imply the joint step conditions; "
                                   "joint exploration agrees")
        else:
            cross = Verdict.failed(None,
                                   "soundness alarm: all lemmas pass but joint "
                                   "exploration finds a step-condition failure")
    else:
        cross = Verdict.skipped("lemmas did not pass")

    return CompositionalReport(
        lemma1=lemma1, lemma2=lemma2, lemma3=lemma3,
        lemma4=Verdict(lemma4.status, lemma4.witness, lemma4_note),
        cross_check=cross,
        pair_count=len(exploration.pairs),
        components=components,
    )


def _check_compatibility(
    exploration: JointExploration,
    rg: RelyGuaranteeSpec,
    components: tuple[str, ...],
    steps_by: Mapping[str, list[tuple[Pair, ActionId, State]]],
    abstract_moves_by: Mapping[str, set[tuple[State, State]]],
) -> tuple[Verdict, str]:
    """Lemma 4: guarantee of each component within every other's rely."""
    concrete_states = sorted({p[0] for p in exploration.pairs})
    abstract_states = sorted({p[1] for p in exploration.pairs})
    sources: list[str] = []
    verdict: Verdict | None = None
    for mover in components:
        contract = rg.contracts[mover]
        if contract.guarantee_moves is not None:
            moves = [(s, s2) for s in concrete_states
                     for s2 in sorted(contract.guarantee_moves(s))]
            concrete_source = "declared"
        else:
            moves = sorted((p[0][0], p[2]) for p in steps_by[mover])
            concrete_source = "witnessed"
        if contract.abstract_guarantee_moves is not None:
            abstract_moves = [(a, a2) for a in abstract_states
                              for a2 in sorted(contract.abstract_guarantee_moves(a))]
            abstract_source = "declared"
        else:
            abstract_moves = sorted(abstract_moves_by[mover])
            abstract_source = "witnessed"
        sources.append(f"{mover}: {concrete_source}/{abstract_source}")
        if verdict is not None:
            continue
        for other in components:
            if other == mover:
                continue
            other_contract = rg.contracts[other]
            for s, s2 in moves:
                if not other_contract.rely(s, s2):
                    verdict = Verdict.failed(LemmaWitness(
                        component=mover, other_component=other,
                        trace=(), state=s, abstract_state=None,
                        action=None, successor=s2, abstract_successor=None,
                        reason="a concrete guarantee move breaks the rely",
                        level="concrete",
                    ))
                    break
            if verdict is not None:
                break
            for a, a2 in abstract_moves:
                if not other_contract.abstract_rely(a, a2):
                    verdict = Verdict.failed(LemmaWitness(
                        component=mover, other_component=other,
                        trace=(), state=a, abstract_state=None,
                        action=None, successor=a2, abstract_successor=None,
                        reason="an abstract guarantee move breaks the rely",
                        level="abstract",
                    ))
                    break
            if verdict is not None:
                break
    note = "guarantee moves: " + "; ".join(sources)
    return (verdict or Verdict.passed(), note)
