"""Seeded discrete-event simulator for the protocol engines.

Channels are reliable, authenticated, and asynchronous: every queued
message between correct processes is eventually delivered exactly once and
unmodified, in an order chosen by the scheduler and seed. Corrupted nodes
are driven by an adversary strategy instead of the engine. A run is a pure
function of its RunConfig.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Optional

from .graph import CapacityError, Topology, normalize_edge
from .protocols import (
    DEFAULT_PATH_CAP,
    DolevEngine,
    DolevPath,
    DualPath,
    DualRcEngine,
    FloodSig,
    OptFlags,
    SigFloodEngine,
)
from .tokens import SignatureToken, TokenEnvironment

PROTOCOLS = ("dolev_ut", "sigflood_t", "dualrc")
SCHEDULERS = ("fifo", "random", "adversarial-delay")

DELAY_WINDOW = 32  # max reordering distance for the adversarial scheduler


# ------------------------------------------------------------- strategies

@dataclass(frozen=True)
class Silent:
    """Send nothing at all: the worst case for validity."""


@dataclass(frozen=True)
class Crash:
    """Follow the protocol, then go silent after a fixed number of sends."""
    after_k_sends: int = 0


@dataclass(frozen=True)
class ForgePaths:
    """Inject fabricated dissemination paths (and own-id signed paths)."""
    per_receive: int = 2


@dataclass(frozen=True)
class ReplaySigs:
    """Re-send observed tokens, with and without altered envelopes."""
    per_receive: int = 2


@dataclass(frozen=True)
class Scripted:
    """Replay a fixed injection list: ((frm, to, msg), ...) at start."""
    events: tuple = ()


AdversaryStrategy = (Silent, Crash, ForgePaths, ReplaySigs, Scripted)


# ------------------------------------------------------------- run config

@dataclass(frozen=True)
class RunConfig:
    topology: Topology
    f: int
    protocol: str
    broadcaster: int
    payload: object = "m"
    corrupted: frozenset = frozenset()
    strategy: object = Silent()
    seed: int = 0
    scheduler: str = "fifo"
    max_events: int = 500_000
    opts: OptFlags = OptFlags()
    path_cap: int = DEFAULT_PATH_CAP
    trace: bool = False
    adversary_budget_factor: int = 10


@dataclass(frozen=True)
class RunReport:
    delivered: frozenset          # nodes that delivered the primary broadcast
    delivery_step: dict           # node -> event index of its delivery
    messages_total: int
    per_edge: dict                # (u, v) -> channel messages over that link
    dropped_invalid: int
    quiesced: bool
    events: int
    instances: dict               # (src-or-None, payload) -> delivered nodes
    creation_violations: tuple    # instances delivered by correct nodes but never broadcast
    duplication_violations: tuple # (instance, node) delivered more than once
    trace: Optional[tuple] = None
    error: Optional[str] = None


def _validate(cfg: RunConfig):
    g = cfg.topology
    if cfg.protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {cfg.protocol!r}")
    if cfg.scheduler not in SCHEDULERS:
        raise ValueError(f"unknown scheduler {cfg.scheduler!r}")
    if cfg.f < 0:
        raise ValueError("fault bound must be non-negative")
    if cfg.broadcaster not in g.vertex_set():
        raise ValueError("broadcaster outside the topology")
    if not cfg.corrupted <= g.vertex_set():
        raise ValueError("corrupted set contains unknown nodes")
    if cfg.corrupted & g.trusted:
        raise ValueError("trusted nodes can never be corrupted")
    if len(cfg.corrupted) > cfg.f:
        raise ValueError(f"at most f={cfg.f} nodes may be corrupted")


def _make_engine(cfg: RunConfig, env: TokenEnvironment):
    if cfg.protocol == "dolev_ut":
        return DolevEngine(cfg.topology, cfg.f, cfg.broadcaster, cfg.payload,
                           opts=cfg.opts, path_cap=cfg.path_cap)
    if cfg.protocol == "sigflood_t":
        return SigFloodEngine(cfg.topology, cfg.f, cfg.broadcaster, cfg.payload,
                              env, opts=cfg.opts, path_cap=cfg.path_cap)
    return DualRcEngine(cfg.topology, cfg.f, cfg.broadcaster, cfg.payload,
                        env, opts=cfg.opts, path_cap=cfg.path_cap)


def _instance_label(cfg: RunConfig, key):
    if cfg.protocol == "dolev_ut":
        return (cfg.broadcaster, key) if key == cfg.payload else (None, key)
    return key


def _summary(msg) -> str:
    if isinstance(msg, DolevPath):
        return f"path[{msg.payload}]:" + "-".join(map(str, msg.path))
    if isinstance(msg, FloodSig):
        return (f"sig[{msg.payload}@{msg.src}]:signer={msg.sig.signer}"
                f":{msg.sig.kind}")
    if isinstance(msg, DualPath):
        return (f"dual[{msg.payload}@{msg.src}]:" + "-".join(map(str, msg.path))
                + f":+{len(msg.signed_paths)}sp")
    return repr(msg)


class _Adversary:
    """Drives the corrupted nodes according to the configured strategy."""

    def __init__(self, cfg: RunConfig, g: Topology, env: TokenEnvironment,
                 engine, rng: random.Random):
        self.cfg = cfg
        self.g = g
        self.env = env
        self.engine = engine
        self.rng = rng
        self.seen_tokens = []
        self.crash_left = {}
        if isinstance(cfg.strategy, Crash):
            self.crash_left = {c: cfg.strategy.after_k_sends for c in cfg.corrupted}
        self.budget = cfg.adversary_budget_factor * (2 * len(g.edges) + g.n)

    def initial(self):
        outs = []
        s = self.cfg.strategy
        if isinstance(s, Scripted):
            for frm, to, msg in s.events:
                if frm not in self.cfg.corrupted:
                    raise ValueError("scripted events must originate at corrupted nodes")
                if to not in self.engine._nbrs(frm):
                    raise ValueError("scripted events must follow existing channels")
                outs.append((frm, to, msg))
        if isinstance(s, Crash) and self.cfg.broadcaster in self.crash_left:
            sends = self.engine.broadcast()
            outs += self._crash_truncate(self.cfg.broadcaster, sends)
        if isinstance(s, (ForgePaths, ReplaySigs)):
            for c in sorted(self.cfg.corrupted):
                outs += [(c, dst, m) for dst, m in self._inject(c)]
        return outs

    def on_receive(self, node, frm, msg):
        s = self.cfg.strategy
        if isinstance(s, Silent) or isinstance(s, Scripted):
            return []
        if isinstance(s, Crash):
            if self.crash_left.get(node, 0) <= 0:
                return []
            sends = self.engine.receive(node, frm, msg)
            return self._crash_truncate(node, sends)
        self._observe(msg)
        return [(node, dst, m) for dst, m in self._inject(node)]

    def _crash_truncate(self, node, sends):
        left = self.crash_left[node]
        kept = sends[:left]
        self.crash_left[node] = left - len(kept)
        return [(node, dst, m) for dst, m in kept]

    def _observe(self, msg):
        if isinstance(msg, FloodSig):
            self.seen_tokens.append(msg.sig)
        elif isinstance(msg, DualPath):
            self.seen_tokens.extend(t for _, t in msg.signed_paths)

    def _inject(self, node):
        if self.budget <= 0:
            return []
        s = self.cfg.strategy
        rng = self.rng
        nbrs = self.engine._nbrs(node)
        if not nbrs:
            return []
        outs = []
        count = min(s.per_receive, self.budget)
        for _ in range(count):
            dst = rng.choice(nbrs)
            if isinstance(s, ForgePaths):
                outs.append((dst, self._forge_path(node, dst)))
            else:
                replay = self._replay_sig(node)
                if replay is None:
                    break
                outs.append((dst, replay))
        self.budget -= len(outs)
        return outs

    def _forge_path(self, node, dst):
        rng = self.rng
        g = self.g
        pool = sorted(g.vertex_set() - {node, dst})
        fake = tuple(rng.sample(pool, min(len(pool), rng.randrange(0, 3))))
        payload = self.cfg.payload if rng.random() < 0.5 else f"forged-{rng.randrange(4)}"
        if self.cfg.protocol == "dolev_ut":
            return DolevPath(payload, fake)
        src = self.cfg.broadcaster if rng.random() < 0.5 else rng.choice(
            sorted(g.vertex_set() - self.cfg.corrupted))
        signed = ()
        if node in g.authenticated:
            pa = tuple(rng.sample(pool, min(len(pool), rng.randrange(0, 2))))
            signed = ((pa, self.env.mint(node, payload, src, signed_path=pa)),)
        if self.cfg.protocol == "dualrc":
            return DualPath(payload, src, fake, signed)
        # flooding carries no paths; fall back to a self-signed envelope
        tok = (self.env.mint(node, payload, src)
               if node in g.authenticated
               else SignatureToken(node, "node", "payload", payload, src))
        return FloodSig(payload, src, tok)

    def _replay_sig(self, node):
        rng = self.rng
        if not self.seen_tokens and node not in self.g.authenticated:
            return None
        if self.seen_tokens and rng.random() < 0.7:
            tok = rng.choice(self.seen_tokens)
        elif node in self.g.authenticated:
            tok = self.env.mint(node, self.cfg.payload, self.cfg.broadcaster)
        else:
            return None
        payload = tok.payload if rng.random() < 0.5 else f"forged-{rng.randrange(4)}"
        src = tok.src if rng.random() < 0.5 else rng.choice(sorted(self.g.vertex_set()))
        return FloodSig(payload, src, tok)


def _pick_index(cfg: RunConfig, queue, enqueued_at, step, rng, target):
    if cfg.scheduler == "fifo":
        return 0
    if cfg.scheduler == "random":
        return rng.randrange(len(queue))
    # adversarial-delay: starve the target inside a bounded window
    if queue[0][1] == target and step - enqueued_at[0] >= DELAY_WINDOW:
        return 0
    for i, (_, to, _) in enumerate(queue):
        if to != target:
            return i
    return 0


def run(cfg: RunConfig) -> RunReport:
    """Execute one broadcast to quiescence (or the event cap)."""
    _validate(cfg)
    g = cfg.topology
    env = TokenEnvironment(g)
    engine = _make_engine(cfg, env)
    rng = random.Random(cfg.seed)
    adversary = _Adversary(cfg, g, env, engine, rng)

    queue = []
    enqueued_at = []
    per_edge = {}
    total = 0
    trace = [] if cfg.trace else None
    delivery_step = {}
    error = None
    step = 0
    target = min(g.vertex_set() - cfg.corrupted - {cfg.broadcaster},
                 default=cfg.broadcaster)

    def record_deliveries():
        for node, key in engine.take_deliveries():
            label = _instance_label(cfg, key)
            if label == (cfg.broadcaster, cfg.payload):
                delivery_step.setdefault(node, step)
            if trace is not None:
                trace.append(f"{step}\tdeliver\t{node}\t{node}\t{key!r}")

    def enqueue(frm, to, msg):
        nonlocal total
        queue.append((frm, to, msg))
        enqueued_at.append(step)
        edge = normalize_edge(frm, to)
        per_edge[edge] = per_edge.get(edge, 0) + 1
        total += 1
        if trace is not None:
            trace.append(f"{step}\tsend\t{frm}\t{to}\t{_summary(msg)}")

    if cfg.broadcaster not in cfg.corrupted:
        for dst, msg in engine.broadcast():
            enqueue(cfg.broadcaster, dst, msg)
        record_deliveries()
    for frm, to, msg in adversary.initial():
        enqueue(frm, to, msg)
    record_deliveries()

    while queue and step < cfg.max_events:
        idx = _pick_index(cfg, queue, enqueued_at, step, rng, target)
        frm, to, msg = queue.pop(idx)
        enqueued_at.pop(idx)
        step += 1
        if trace is not None:
            trace.append(f"{step}\trecv\t{frm}\t{to}\t{_summary(msg)}")
        if to in cfg.corrupted:
            for f2, t2, m2 in adversary.on_receive(to, frm, msg):
                enqueue(f2, t2, m2)
        else:
            try:
                outs = engine.receive(to, frm, msg)
            except CapacityError as exc:
                error = str(exc)
                break
            for dst, m2 in outs:
                enqueue(to, dst, m2)
        record_deliveries()

    quiesced = not queue and error is None
    if not quiesced and error is None:
        error = f"event cap of {cfg.max_events} exhausted"

    instances = {_instance_label(cfg, key): nodes
                 for key, nodes in engine.instances().items()}
    correct = g.vertex_set() - cfg.corrupted
    primary = (cfg.broadcaster, cfg.payload)
    creation = tuple(sorted(
        (label for label, nodes in instances.items()
         if label != primary and nodes & correct
         and (label[0] is None or label[0] in correct)),
        key=repr))
    duplication = tuple(sorted(
        ((key, node) for (key, node), c in engine.deliver_call_counts().items()
         if c > 1), key=repr))

    return RunReport(
        delivered=engine.delivered_nodes(),
        delivery_step=delivery_step,
        messages_total=total,
        per_edge=per_edge,
        dropped_invalid=engine.dropped_invalid,
        quiesced=quiesced,
        events=step,
        instances=instances,
        creation_violations=creation,
        duplication_violations=duplication,
        trace=tuple(trace) if trace is not None else None,
        error=error,
    )


# ------------------------------------------------------------------ sweeps

@dataclass(frozen=True)
class SweepResult:
    reports: tuple
    aggregate: dict
    errors: tuple


def sweep(cfgs) -> SweepResult:
    """Run every config, collecting per-run reports plus order-independent
    aggregates. Per-run failures are recorded, not raised."""
    reports = []
    errors = []
    per_protocol = {}
    edge_counts = []
    full_delivery = 0
    for cfg in cfgs:
        try:
            rep = run(cfg)
        except Exception as exc:  # propagate per-run errors without aborting
            errors.append((cfg, str(exc)))
            continue
        reports.append((cfg, rep))
        per_protocol[cfg.protocol] = per_protocol.get(cfg.protocol, 0) + rep.messages_total
        edge_counts.extend(rep.per_edge.values())
        correct = cfg.topology.vertex_set() - cfg.corrupted
        if correct <= rep.delivered:
            full_delivery += 1
    n = len(reports)
    aggregate = {
        "runs": n,
        "delivery_rate": (full_delivery / n) if n else 0.0,
        "mean_messages_per_edge": (sum(edge_counts) / len(edge_counts)) if edge_counts else 0.0,
        "max_messages_per_edge": max(edge_counts, default=0),
        "messages_by_protocol": dict(sorted(per_protocol.items())),
    }
    return SweepResult(tuple(reports), aggregate, tuple(errors))


ORACLE_SIZE_GUARD = 10


def admissible_corruptions(g: Topology, f: int, broadcaster: int):
    """All corruption sets: subsets of the untrusted nodes without the
    broadcaster, of size 0..f, in deterministic order."""
    pool = sorted(g.untrusted() - {broadcaster})
    for size in range(min(f, len(pool)) + 1):
        for combo in itertools.combinations(pool, size):
            yield frozenset(combo)


def all_corruption_runs(g: Topology, f: int, protocol: str, broadcaster: int,
                        size_guard: int = ORACLE_SIZE_GUARD, force: bool = False,
                        opts: Optional[OptFlags] = None):
    """Worst-case check for one broadcaster: run a silent adversary for every
    admissible corruption set and demand that all correct nodes deliver."""
    from .verify import Verdict  # late import; verify builds on this module

    if g.n > size_guard and not force:
        raise ValueError(
            f"exhaustive corruption runs refused for n={g.n} > {size_guard} "
            "(pass force=True to override)")
    if opts is None:
        opts = OptFlags.all_on() if protocol == "dolev_ut" else OptFlags()
    for corrupted in admissible_corruptions(g, f, broadcaster):
        cfg = RunConfig(topology=g, f=f, protocol=protocol,
                        broadcaster=broadcaster, corrupted=corrupted,
                        opts=opts)
        rep = run(cfg)
        if rep.error:
            raise RuntimeError(f"oracle run failed: {rep.error}")
        missing = sorted(g.vertex_set() - corrupted - rep.delivered)
        if missing:
            return Verdict(ok=False, failing_pair=(broadcaster, missing[0]),
                           failing_broadcaster=broadcaster, witness=corrupted)
    return Verdict(ok=True)
