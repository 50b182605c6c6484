"""Sealed-bid auction: bidders, an auction service, and a result publisher.

Users register one bid each while the auction runs. The service seals
the winner when it closes, and a separate publisher releases the result.
Information is meant to flow from bidders into the service and from the
service to the publisher only: bidders learn nothing about each other's
bids beyond the published outcome.

At the concrete level a registration takes the bid ledger's lock,
writes a provisional entry and commits it on unlock; if the auction
closed in between, the provisional entry is rolled back, matching the
abstract level where a registration either happens atomically while the
auction runs or not at all. "No winning bid" is represented as None.
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

RESERVE_PRICE = 1

SERVER = "server"
PUBLISHER = "publisher"


def better(current: Value, candidate: tuple[str, int]) -> tuple[str, int]:
    """Pick the higher bid; ties keep the incumbent."""
    if current is None or candidate[1] > current[1]:
        return candidate
    return current


def ledger_max(log: tuple) -> Value:
    """Highest bid in registration order, ties to the earliest."""
    top: Value = None
    for entry in log:
        top = better(top, entry)
    return top


def winner(top: Value, reserve: int) -> Value:
    return top if top is not None and top[1] > reserve else None


def build_auction(users: int = 2, bids: tuple[int, ...] = (1, 2)) -> ModelBundle:
    """Build the auction bundle for `users` bidders over the `bids` amounts."""
    if not 1 <= users <= 3:
        raise UsageError("users must be between 1 and 3")
    if not 1 <= len(bids) <= 3:
        raise UsageError("between one and three bid amounts are supported")
    if len(set(bids)) != len(bids) or any(b < 1 for b in bids):
        raise UsageError("bid amounts must be distinct positive integers")

    names = tuple(f"u{i}" for i in range(1, users + 1))
    components = names + ("auc",)
    domains = tuple(sorted(names + (SERVER, PUBLISHER)))

    def start(s: State) -> dict[str, Value]:
        return {"status": "running", "reserve": RESERVE_PRICE}

    def seal(top_var: str):
        def close(s: State) -> dict[str, Value]:
            return {"status": "closed", "sealed": winner(s[top_var], s["reserve"])}

        return close

    def publish(s: State) -> dict[str, Value]:
        return {"res": s["sealed"]}

    def ready(s: State) -> bool:
        return s["status"] == "ready"

    def running(s: State) -> bool:
        return s["status"] == "running"

    def closed(s: State) -> bool:
        return s["status"] == "closed"

    def service_events(top_var: str) -> tuple[Event, ...]:
        return (
            Event(f"Start_Auction({RESERVE_PRICE})", ready, Basic(start, "start"), SERVER),
            Event("Close_Auction", running, Basic(seal(top_var), "close"), SERVER),
            Event("Publish_Result", closed, Basic(publish, "publish"), PUBLISHER),
        )

    def register_events(u: str, amount: int) -> tuple[Event, Event]:
        entry = (u, amount)

        def fresh(s: State) -> bool:
            return running(s) and all(e[0] != u for e in s["log"])

        def register(s: State) -> dict[str, Value]:
            if not running(s):
                return {}
            return {"log": s["log"] + (entry,), "maxbid": better(s["maxbid"], entry)}

        def commit(s: State) -> dict[str, Value]:
            if running(s):
                return {"lock": None, "oblog": s["log"], "obid": s["maxbid"]}
            return {"lock": None, "log": s["oblog"], "maxbid": s["obid"]}

        label = f"Register_Bid({amount})"
        concrete_body = seq(
            lock_acquire("lock", u),
            Basic(register, "register"),
            Basic(commit, "unlock"),
        )
        return (Event(label, fresh, concrete_body, u),
                Event(label, fresh, Basic(register, "register"), u))

    concrete_pool: dict[str, tuple[Event, ...]] = {"auc": service_events("obid")}
    abstract_pool: dict[str, tuple[Event, ...]] = {"auc": service_events("maxbid")}
    for u in names:
        events = [register_events(u, amount) for amount in bids]
        concrete_pool[u] = tuple(c for c, _ in events)
        abstract_pool[u] = tuple(a for _, a in events)

    shared: dict[str, Value] = {
        "status": "ready", "reserve": 0, "log": (), "maxbid": None,
        "sealed": None, "res": None,
    }
    concrete_vars = dict(shared, lock=None, oblog=(), obid=None)
    abstract_vars = dict(shared)

    def observe(log_var: str, top_var: str):
        def view(d: str, s: State) -> Value:
            if d == SERVER:
                return (s["status"], s["reserve"], s[log_var], s[top_var])
            if d == PUBLISHER:
                return (s["sealed"], s["res"])
            return s["res"]

        return view

    policy = {(d, d) for d in domains}
    policy |= {(u, SERVER) for u in names}
    policy.add((SERVER, PUBLISHER))
    policy |= {(PUBLISHER, u) for u in names}

    concrete = compile_system(
        ConcurrentSystem(components, concrete_pool, concrete_vars),
        domains, policy, observe("oblog", "obid"))
    abstract = compile_system(
        ConcurrentSystem(components, abstract_pool, abstract_vars),
        domains, policy, observe("log", "maxbid"))

    def related(c: State, a: State) -> bool:
        for var in ("status", "reserve", "sealed", "res"):
            if a[var] != c[var]:
                return False
        if a["log"] != c["oblog"] or a["maxbid"] != c["obid"]:
            return False
        if c["lock"] is None and (c["log"] != c["oblog"] or c["maxbid"] != c["obid"]):
            return False
        if a["res"] is not None:
            ok = (a["status"] == "closed"
                  and a["res"] == ledger_max(a["log"])
                  and a["res"][1] > a["reserve"])
            if not ok:
                return False
        return pc_aligned(c, a, components)

    alpha = Alpha.from_predicate(
        related,
        "abstract ledger matches the committed ledger; a published result "
        "is the ledger maximum above the reserve")

    def rule(comp: str, event: str, step: str):
        if step in ("lock", "register"):
            return TAU
        if step == "unlock":
            return "register"
        return None

    pair = RefinementPair(concrete, abstract, alpha,
                          zeta_from_rule(concrete, abstract, rule))

    return ModelBundle(
        name="auction",
        description="sealed-bid auction with locked ledger and a result publisher",
        pair=pair,
        rely_guarantee=_rely_guarantee(concrete, names),
        params=(("users", users), ("bids", bids)),
    )


def _rely_guarantee(concrete: SecureSystem, names: tuple[str, ...]):
    """Ledger contracts: bidders write under the lock, the service owns the rest."""

    ledger_vars = ("lock", "log", "maxbid", "oblog", "obid")

    def user_guarantee(u: str):
        def allowed_change(s: State, s2: State, var: str) -> bool:
            if var == f"pc.{u}":
                return True
            if var == "lock":
                return s[var] == u or s2[var] == u
            if var in ledger_vars:
                return s["lock"] == u
            return False

        return frame_guarantee(allowed_change)

    def user_rely(u: str):
        def holds(s: State, s2: State) -> bool:
            if s2[f"pc.{u}"] != s[f"pc.{u}"]:
                return False
            if s["lock"] == u:
                for var in ledger_vars:
                    if s2[var] != s[var]:
                        return False
            return True

        return holds

    def service_guarantee(s: State, s2: State, var: str) -> bool:
        return var in ("pc.auc", "status", "reserve", "sealed", "res")

    def service_rely(s: State, s2: State) -> bool:
        return s2["pc.auc"] == s["pc.auc"]

    contracts = {
        u: ComponentContract(
            rely=user_rely(u),
            guarantee=user_guarantee(u),
            guarantee_moves=machine_moves(concrete, u),
        )
        for u in names
    }
    contracts["auc"] = ComponentContract(
        rely=service_rely,
        guarantee=frame_guarantee(service_guarantee),
        guarantee_moves=machine_moves(concrete, "auc"),
    )
    return contracts_spec(contracts)
