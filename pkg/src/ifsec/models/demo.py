"""Message-ring demo: threads exchanging messages through locked queues.

Threads t1..tN sit on a ring; each may send messages to its successor's
queue and receive from its own. A queue is a bounded buffer guarded by a
lock, and each thread observes only the committed content of its own
queue (published at unlock time). The abstract level performs a whole
send or receive as one atomic update.

Variants:

``secure``
    Sends go only to the ring successor, which the flow policy permits.

``insecure_counter``
    Every thread may address every other thread. A shared per-queue
    attempt counter is bumped before the policy outcome is decided and
    rolled back on denial; the observable counter leaks denied attempts
    to threads the sender may not influence.

``insecure_fullstatus``
    As ``secure``, but each thread additionally sees whether its
    outgoing queue is full right now, exposing the receiver's uncommitted
    dequeue progress to the sender.
"""

from __future__ import annotations

from ifsec.core import SecureSystem, State, UsageError, Value
from ifsec.models.common import (
    ModelBundle,
    contracts_spec,
    frame_guarantee,
    machine_moves,
    pc_aligned,
    zeta_from_rule,
)
from ifsec.programs import (
    Basic,
    ConcurrentSystem,
    Event,
    compile_system,
    lock_acquire,
    seq,
)
from ifsec.refinement import TAU, Alpha, ComponentContract, RefinementPair

VARIANTS = ("secure", "insecure_counter", "insecure_fullstatus")

NAMES = {
    "secure": "demo",
    "insecure_counter": "demo-insecure-counter",
    "insecure_fullstatus": "demo-insecure-fullstatus",
}

DESCRIPTIONS = {
    "secure": "ring of threads with locked single-reader message queues",
    "insecure_counter": "ring variant leaking denied sends through a shared counter",
    "insecure_fullstatus": "ring variant leaking dequeue progress through a fullness flag",
}


def build_demo(threads: int = 3, capacity: int = 1, messages: int = 1,
               variant: str = "secure") -> ModelBundle:
    """Build one of the message-ring bundles.

    `threads`, `capacity` and `messages` bound the ring size, the queue
    length and the message alphabet; they are kept small because every
    checker here enumerates states or traces explicitly.
    """
    if variant not in VARIANTS:
        raise UsageError(
            f"unknown demo variant {variant!r}; pick one of {', '.join(VARIANTS)}")
    if not 2 <= threads <= 3:
        raise UsageError("threads must be 2 or 3")
    if not 1 <= capacity <= 2:
        raise UsageError("capacity must be 1 or 2")
    if not 1 <= messages <= 2:
        raise UsageError("messages must be 1 or 2")

    names = tuple(f"t{i}" for i in range(1, threads + 1))
    succ = {names[i]: names[(i + 1) % threads] for i in range(threads)}
    msgs = tuple(f"m{i}" for i in range(1, messages + 1))
    counter = variant == "insecure_counter"
    fullstatus = variant == "insecure_fullstatus"

    def push(queue: tuple, item: str) -> tuple:
        return queue + (item,) if len(queue) < capacity else queue

    def always(state: State) -> bool:
        return True

    def send_events(sender: str, target: str, msg: str) -> tuple[Event, Event]:
        qvar, ovar, lvar = f"que.{target}", f"obq.{target}", f"lock.{target}"
        label = f"send({target},{msg})"

        def enqueue(s: State) -> dict[str, Value]:
            return {qvar: push(s[qvar], msg)}

        def publish(s: State) -> dict[str, Value]:
            return {lvar: None, ovar: s[qvar]}

        concrete_body = seq(
            lock_acquire(lvar, sender),
            Basic(enqueue, "enqueue"),
            Basic(publish, "unlock"),
        )
        return (Event(label, always, concrete_body, sender),
                Event(label, always, Basic(enqueue, "send"), sender))

    def counter_send_events(sender: str, target: str, msg: str) -> tuple[Event, Event]:
        qvar, ovar, lvar = f"que.{target}", f"obq.{target}", f"lock.{target}"
        cvar = f"cnt.{target}"
        label = f"send({target},{msg})"
        allowed = succ[sender] == target

        def incr(s: State) -> dict[str, Value]:
            return {cvar: min(s[cvar] + 1, 2)}

        def decr(s: State) -> dict[str, Value]:
            return {cvar: max(s[cvar] - 1, 0)}

        def enqueue(s: State) -> dict[str, Value]:
            return {qvar: push(s[qvar], msg)}

        def publish(s: State) -> dict[str, Value]:
            return {lvar: None, ovar: s[qvar]}

        def commit(s: State) -> dict[str, Value]:
            return {qvar: push(s[qvar], msg), cvar: min(s[cvar] + 1, 2)}

        def skip(s: State) -> dict[str, Value]:
            return {}

        if allowed:
            concrete_body = seq(
                Basic(incr, "incr"),
                lock_acquire(lvar, sender),
                Basic(enqueue, "enqueue"),
                Basic(publish, "unlock"),
            )
            abstract_body = Basic(commit, "send")
        else:
            concrete_body = seq(Basic(incr, "incr"), Basic(decr, "decr"))
            abstract_body = Basic(skip, "skip")
        return (Event(label, always, concrete_body, sender),
                Event(label, always, abstract_body, sender))

    def recv_events(owner: str) -> tuple[Event, Event]:
        qvar, ovar, lvar = f"que.{owner}", f"obq.{owner}", f"lock.{owner}"

        def dequeue(s: State) -> dict[str, Value]:
            return {qvar: s[qvar][1:]} if s[qvar] else {}

        def publish(s: State) -> dict[str, Value]:
            return {lvar: None, ovar: s[qvar]}

        concrete_body = seq(
            lock_acquire(lvar, owner),
            Basic(dequeue, "dequeue"),
            Basic(publish, "unlock"),
        )
        return (Event("recv", always, concrete_body, owner),
                Event("recv", always, Basic(dequeue, "recv"), owner))

    concrete_pool: dict[str, tuple[Event, ...]] = {}
    abstract_pool: dict[str, tuple[Event, ...]] = {}
    for t in names:
        targets = sorted(u for u in names if u != t) if counter else [succ[t]]
        concrete_events = []
        abstract_events = []
        for u in targets:
            for m in msgs:
                make = counter_send_events if counter else send_events
                c, a = make(t, u, m)
                concrete_events.append(c)
                abstract_events.append(a)
        c, a = recv_events(t)
        concrete_events.append(c)
        abstract_events.append(a)
        concrete_pool[t] = tuple(concrete_events)
        abstract_pool[t] = tuple(abstract_events)

    concrete_vars: dict[str, Value] = {}
    abstract_vars: dict[str, Value] = {}
    for t in names:
        concrete_vars[f"que.{t}"] = ()
        concrete_vars[f"obq.{t}"] = ()
        concrete_vars[f"lock.{t}"] = None
        abstract_vars[f"que.{t}"] = ()
        if counter:
            concrete_vars[f"cnt.{t}"] = 0
            abstract_vars[f"cnt.{t}"] = 0

    def concrete_observe(d: str, s: State) -> Value:
        if counter:
            return (s[f"obq.{d}"], s[f"cnt.{d}"])
        if fullstatus:
            return (s[f"obq.{d}"], len(s[f"que.{succ[d]}"]) == capacity)
        return s[f"obq.{d}"]

    def abstract_observe(d: str, s: State) -> Value:
        if counter:
            return (s[f"que.{d}"], s[f"cnt.{d}"])
        if fullstatus:
            return (s[f"que.{d}"], len(s[f"que.{succ[d]}"]) == capacity)
        return s[f"que.{d}"]

    policy = {(t, t) for t in names} | {(t, succ[t]) for t in names}

    concrete = compile_system(
        ConcurrentSystem(names, concrete_pool, concrete_vars),
        names, policy, concrete_observe)
    abstract = compile_system(
        ConcurrentSystem(names, abstract_pool, abstract_vars),
        names, policy, abstract_observe)

    def related(c: State, a: State) -> bool:
        for t in names:
            if a[f"que.{t}"] != c[f"obq.{t}"]:
                return False
            if c[f"lock.{t}"] is None and c[f"que.{t}"] != c[f"obq.{t}"]:
                return False
            if counter and a[f"cnt.{t}"] != c[f"cnt.{t}"]:
                return False
        return pc_aligned(c, a, names)

    alpha = Alpha.from_predicate(
        related, "abstract queues match committed queues; unlocked queues are clean")

    def rule(comp: str, event: str, step: str):
        if step in ("lock", "enqueue", "dequeue", "incr"):
            return TAU
        if step == "unlock":
            return "send" if event.startswith("send") else "recv"
        if step == "decr":
            return "skip"
        return None

    pair = RefinementPair(concrete, abstract, alpha,
                          zeta_from_rule(concrete, abstract, rule))

    return ModelBundle(
        name=NAMES[variant],
        description=DESCRIPTIONS[variant],
        pair=pair,
        rely_guarantee=_rely_guarantee(concrete, names),
        params=(("threads", threads), ("capacity", capacity),
                ("messages", messages), ("variant", variant)),
    )


def _rely_guarantee(concrete: SecureSystem, names: tuple[str, ...]):
    """Lock-discipline contracts: write a queue only while holding its lock."""

    def guarantee(t: str):
        def allowed_change(s: State, s2: State, var: str) -> bool:
            kind, _, owner = var.partition(".")
            if var == f"pc.{t}":
                return True
            if kind == "cnt":
                return True
            if kind == "lock":
                return s[var] == t or s2[var] == t
            if kind in ("que", "obq"):
                return s[f"lock.{owner}"] == t
            return False

        return frame_guarantee(allowed_change)

    def rely(t: str):
        def holds(s: State, s2: State) -> bool:
            if s2[f"pc.{t}"] != s[f"pc.{t}"]:
                return False
            for u in names:
                if s[f"lock.{u}"] == t:
                    for var in (f"lock.{u}", f"que.{u}", f"obq.{u}"):
                        if s2[var] != s[var]:
                            return False
            return True

        return holds

    contracts = {
        t: ComponentContract(
            rely=rely(t),
            guarantee=guarantee(t),
            guarantee_moves=machine_moves(concrete, t),
        )
        for t in names
    }
    return contracts_spec(contracts)
