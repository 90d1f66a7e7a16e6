"""Deterministic protocol engines for reliable communication.

Three engines, each a collection of per-process event handlers driven by a
host (normally the simulator): path dissemination over authenticated links,
signature flooding over authenticated processes, and the dual engine that
manipulates both paths and signatures and can call a trusted component.

Handlers never touch wall clocks or global randomness; outbound messages
are emitted in ascending destination order so identical inputs produce
identical runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .graph import (
    CapacityError,
    Topology,
    has_k_disjoint,
    find_k_disjoint,
    strip_trusted,
)
from .tokens import PATH, PAYLOAD, TC, SignatureToken, TokenEnvironment, AttestationError, evidence_set

DEFAULT_PATH_CAP = 10_000


class ProtocolError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptFlags:
    """Relay-reduction switches for path-carrying messages.

    md1..md5 and the two mbd rules are the standard low-traffic variants of
    path dissemination; all default off so the base protocol is what runs
    unless a caller opts in. ``sig_relay_after_delivery`` exists for
    regression tests: turning it off reproduces the broken variant whose
    delivered nodes stop relaying signature messages.
    """

    md1: bool = False
    md2: bool = False
    md3: bool = False
    md4: bool = False
    md5: bool = False
    mbd1: bool = False
    mbd10: bool = False
    sig_prune: bool = False
    sig_relay_after_delivery: bool = True

    @classmethod
    def all_on(cls) -> "OptFlags":
        return cls(md1=True, md2=True, md3=True, md4=True, md5=True,
                   mbd1=True, mbd10=True)

    @classmethod
    def parse(cls, text: str) -> "OptFlags":
        if not text or text == "none":
            return cls()
        if text == "all":
            return cls.all_on()
        known = {"md1", "md2", "md3", "md4", "md5", "mbd1", "mbd10", "sig-prune"}
        flags = {}
        for part in text.split(","):
            part = part.strip()
            if part not in known:
                raise ValueError(f"unknown optimization flag {part!r}")
            flags[part.replace("-", "_")] = True
        return cls(**flags)


# ------------------------------------------------------------------ messages

@dataclass(frozen=True)
class DolevPath:
    payload: object
    path: tuple


@dataclass(frozen=True)
class FloodSig:
    payload: object
    src: int
    sig: SignatureToken


@dataclass(frozen=True)
class DualPath:
    payload: object
    src: int
    path: tuple
    signed_paths: tuple  # of (path, SignatureToken) pairs


ProtocolMessage = (DolevPath, FloodSig, DualPath)


# ------------------------------------------------------------- process state

@dataclass
class ProcessState:
    me: int
    delivered: bool = False
    deliver_calls: int = 0
    paths: set = field(default_factory=set)       # trusted-stripped
    spaths: set = field(default_factory=set)      # signed evidence, normalized
    spath_evidence: dict = field(default_factory=dict)  # entry -> (path, token)
    dn: set = field(default_factory=set)          # neighbors/nodes known delivered
    sigs: set = field(default_factory=set)        # tokens processed
    sent_cache: set = field(default_factory=set)  # (dst, msg) pairs, per-link dedup
    dropped: int = 0
    # signature-prune bookkeeping (only used when the flag is on)
    nbr_strong_sig: set = field(default_factory=set)
    nbr_signers: dict = field(default_factory=dict)
    relayed_signers: set = field(default_factory=set)
    sig_done: bool = False


class _EngineBase:
    def __init__(self, g: Topology, f: int, broadcaster: int, payload,
                 opts: OptFlags = OptFlags(), path_cap: int = DEFAULT_PATH_CAP):
        if f < 0:
            raise ValueError("fault bound must be non-negative")
        if broadcaster not in g.vertex_set():
            raise ValueError("broadcaster outside the topology")
        self.g = g
        self.f = f
        self.broadcaster = broadcaster
        self.payload = payload
        self.opts = opts
        self.path_cap = path_cap
        self._states = {}
        self._fresh = []
        self._nbr = {u: sorted(vs) for u, vs in
                     ((u, self._adj(u)) for u in sorted(g.vertex_set()))}

    def _adj(self, u):
        out = set()
        for a, b in self.g.edges:
            if a == u:
                out.add(b)
            elif b == u:
                out.add(a)
        return out

    def _nbrs(self, u):
        return self._nbr[u]

    def _check_channel(self, node, frm):
        if frm not in self._nbr.get(node, ()):
            raise ProtocolError(f"{frm} is not a neighbor of {node}")

    def _state(self, node, key) -> ProcessState:
        per = self._states.setdefault(key, {})
        if node not in per:
            per[node] = ProcessState(me=node)
        return per[node]

    def _deliver(self, st: ProcessState, node, key):
        if st.delivered:
            return
        st.delivered = True
        st.deliver_calls += 1
        self._fresh.append((node, key))

    def take_deliveries(self):
        out, self._fresh = self._fresh, []
        return out

    def delivered_nodes(self, key=None) -> frozenset:
        key = self.primary_key if key is None else key
        per = self._states.get(key, {})
        return frozenset(n for n, st in per.items() if st.delivered)

    def instances(self) -> dict:
        return {key: frozenset(n for n, st in per.items() if st.delivered)
                for key, per in self._states.items()}

    @property
    def dropped_invalid(self) -> int:
        return sum(st.dropped for per in self._states.values() for st in per.values())

    def deliver_call_counts(self):
        return {(key, n): st.deliver_calls
                for key, per in self._states.items() for n, st in per.items()}

    def _dedup_sends(self, st: ProcessState, outs):
        if not self.opts.mbd1:
            return outs
        kept = []
        for dst, msg in outs:
            if (dst, msg) in st.sent_cache:
                continue
            st.sent_cache.add((dst, msg))
            kept.append((dst, msg))
        return kept

    def _insert_path(self, st: ProcessState, pool: set, item):
        pool.add(item)
        if len(st.paths) + len(st.spaths) > self.path_cap:
            raise CapacityError(
                f"stored path sets exceeded the cap of {self.path_cap}")

    def _k_disjoint(self, pool) -> bool:
        nonempty = [p for p in pool if p]
        if len(nonempty) <= self.f:
            return False
        return has_k_disjoint(nonempty, self.f + 1)


# ----------------------------------------------------------- path dissemination

class DolevEngine(_EngineBase):
    """Path-echo dissemination over authenticated links.

    A relay appends the link sender to the carried path and floods onward;
    a node authenticates the payload once it holds an empty trusted-stripped
    path or f+1 pairwise vertex-disjoint ones. Instances are keyed by
    payload; the configured broadcaster is only known for the primary
    payload (forged payloads have no presumed-correct source).
    """

    @property
    def primary_key(self):
        return self.payload

    def instance_broadcaster(self, key) -> Optional[int]:
        return self.broadcaster if key == self.payload else None

    def broadcast(self):
        st = self._state(self.broadcaster, self.payload)
        if st.delivered:
            raise ProtocolError("payload already broadcast")
        self._deliver(st, self.broadcaster, self.payload)
        outs = [(k, DolevPath(self.payload, ())) for k in self._nbrs(self.broadcaster)]
        return self._dedup_sends(st, outs)

    def receive(self, node, frm, msg: DolevPath):
        self._check_channel(node, frm)
        key = msg.payload
        st = self._state(node, key)
        opts = self.opts
        src = self.instance_broadcaster(key)

        fwd = tuple(msg.path) + (frm,)
        if node in fwd or len(set(fwd)) != len(fwd):
            st.dropped += 1
            return []
        if opts.md5 and st.delivered:
            return []
        if opts.md4 and set(msg.path) & st.dn:
            return []
        if msg.path == ():
            st.dn.add(frm)

        stored = tuple(x for x in strip_trusted(fwd, self.g) if x != src)
        if opts.mbd10:
            new_set = set(stored)
            if any(set(p) <= new_set for p in st.paths):
                return []
            st.paths = {p for p in st.paths if not new_set <= set(p)}
        self._insert_path(st, st.paths, stored)

        newly = False
        if not st.delivered:
            if (() in st.paths
                    or (opts.md1 and src is not None and frm == src)
                    or self._k_disjoint(st.paths)):
                self._deliver(st, node, key)
                newly = True

        if newly and opts.md2:
            st.paths.clear()
            dsts = set(self._nbrs(node))
            if opts.md3:
                dsts -= st.dn
            outs = [(k, DolevPath(key, ())) for k in sorted(dsts)]
            return self._dedup_sends(st, outs)

        excl = set(strip_trusted(fwd, self.g))
        dsts = set(self._nbrs(node)) - excl
        if opts.md3:
            dsts -= st.dn
        outs = [(k, DolevPath(key, fwd)) for k in sorted(dsts)]
        return self._dedup_sends(st, outs)


# ---------------------------------------------------------- signature flooding

class SigFloodEngine(_EngineBase):
    """Flooding of the broadcaster's signature over authenticated processes."""

    def __init__(self, g, f, broadcaster, payload, env: TokenEnvironment,
                 opts: OptFlags = OptFlags(), path_cap: int = DEFAULT_PATH_CAP):
        super().__init__(g, f, broadcaster, payload, opts, path_cap)
        self.env = env

    @property
    def primary_key(self):
        return (self.broadcaster, self.payload)

    def broadcast(self):
        if self.broadcaster not in self.g.authenticated:
            raise ProtocolError("only authenticated nodes can sign a broadcast")
        key = self.primary_key
        st = self._state(self.broadcaster, key)
        if st.delivered:
            raise ProtocolError("payload already broadcast")
        tok = self.env.mint(self.broadcaster, self.payload, self.broadcaster)
        self._deliver(st, self.broadcaster, key)
        return [(k, FloodSig(self.payload, self.broadcaster, tok))
                for k in self._nbrs(self.broadcaster)]

    def receive(self, node, frm, msg: FloodSig):
        self._check_channel(node, frm)
        key = (msg.src, msg.payload)
        st = self._state(node, key)
        if node == msg.src and key != self.primary_key:
            st.dropped += 1  # claims this node as source of something it never sent
            return []
        if st.delivered:
            return []
        sig = msg.sig
        genuine = (self.env.verify(sig) and sig.kind == "node"
                   and sig.scope == PAYLOAD and sig.signer == msg.src
                   and sig.payload == msg.payload and sig.src == msg.src)
        if frm not in self.g.trusted and not genuine:
            st.dropped += 1
            return []
        self._deliver(st, node, key)
        return [(k, msg) for k in self._nbrs(node) if k not in (frm, msg.src)]


# ------------------------------------------------------------------ dual engine

class DualRcEngine(_EngineBase):
    """Combined path/signature dissemination with trusted-component support.

    Signature messages are processed and relayed at most once each and keep
    flowing even after delivery; path messages stop at delivered nodes. Any
    delivery announces itself with an empty-path message so neighbors gain a
    one-hop dissemination path.
    """

    def __init__(self, g, f, broadcaster, payload, env: TokenEnvironment,
                 opts: OptFlags = OptFlags(), path_cap: int = DEFAULT_PATH_CAP):
        super().__init__(g, f, broadcaster, payload, opts, path_cap)
        self.env = env

    @property
    def primary_key(self):
        return (self.broadcaster, self.payload)

    def broadcast(self):
        key = self.primary_key
        st = self._state(self.broadcaster, key)
        if st.delivered:
            raise ProtocolError("payload already broadcast")
        outs = []
        auth = self.broadcaster in self.g.authenticated
        tok = None
        if auth:
            tok = self.env.mint(self.broadcaster, self.payload, self.broadcaster)
            st.sigs.add(tok)
        for k in self._nbrs(self.broadcaster):
            if tok is not None:
                outs.append((k, FloodSig(self.payload, self.broadcaster, tok)))
            outs.append((k, DualPath(self.payload, self.broadcaster, (), ())))
        self._deliver(st, self.broadcaster, key)
        return outs

    def receive(self, node, frm, msg):
        if isinstance(msg, FloodSig):
            return self.receive_signature(node, frm, msg)
        if isinstance(msg, DualPath):
            return self.receive_path(node, frm, msg)
        raise ProtocolError(f"unknown message type {type(msg).__name__}")

    # -- signature messages

    def receive_signature(self, node, frm, msg: FloodSig):
        self._check_channel(node, frm)
        m, s, sig = msg.payload, msg.src, msg.sig
        key = (s, m)
        st = self._state(node, key)
        g = self.g
        if node == s and key != self.primary_key:
            st.dropped += 1
            return []
        if not self.opts.sig_relay_after_delivery and st.delivered:
            return []
        if sig in st.sigs:
            return []
        st.sigs.add(sig)
        if self.opts.sig_prune:
            self._note_incoming_sig(st, frm, sig, s)

        delivered_before = st.delivered
        outs = []
        # delivery on link identity alone: straight from the broadcaster, or
        # a trusted authenticated neighbor vouching with its own token
        if frm == s or (frm == sig.signer and frm in g.trusted
                        and frm in g.authenticated):
            st.dn.add(sig.signer)
            self._deliver(st, node, key)

        dests = [k for k in self._nbrs(node) if k not in (s, sig.signer)]
        forward_received = True
        auth = node in g.authenticated
        if auth:
            genuine = (self.env.verify(sig) and sig.scope == PAYLOAD
                       and sig.payload == m and sig.src == s)
            if not genuine:
                st.dropped += 1
                forward_received = False
            else:
                entry = evidence_set((), sig.signer, s, g)
                self._insert_path(st, st.spaths, entry)
                if (sig.signer == s or sig.signer in g.trusted or sig.kind == TC
                        or () in st.spaths or self._k_disjoint(st.spaths)):
                    self._deliver(st, node, key)
                    if sig.signer in g.trusted or sig.kind == TC:
                        outs += [(k, msg) for k in dests]  # pass the trusted-grade token on
                        forward_received = False
                    else:
                        tok = self._payload_token(node, m, s, sig)
                        st.sigs.add(tok)
                        outs += [(k, FloodSig(m, s, tok)) for k in dests]
                        if tok.kind == TC:
                            forward_received = False
        if forward_received:
            outs += [(k, msg) for k in dests]
        if st.delivered and not delivered_before:
            outs += self._announce_delivery_paths(node, st, m, s, ())
        if self.opts.sig_prune:
            outs = self._prune_sig_sends(st, node, outs, s)
        return outs

    def _payload_token(self, node, m, s, cause: SignatureToken) -> SignatureToken:
        """TC attestation when the contract allows it, own signature otherwise."""
        if node in self.g.tc:
            try:
                return self.env.tc_for(node).attest_signature(m, s, cause)
            except AttestationError:
                pass
        return self.env.mint(node, m, s)

    # -- path messages

    def receive_path(self, node, frm, msg: DualPath):
        self._check_channel(node, frm)
        m, s = msg.payload, msg.src
        key = (s, m)
        st = self._state(node, key)
        g = self.g
        if node == s and key != self.primary_key:
            st.dropped += 1
            return []
        rpath = tuple(msg.path) + (frm,)
        if node in rpath or len(set(rpath)) != len(rpath):
            st.dropped += 1
            return []
        if st.delivered or set(msg.path) & st.dn:
            return []
        if msg.path == ():
            st.dn.add(frm)

        auth = node in g.authenticated
        outs = []
        valid_entries = ()
        if auth:
            kept = []
            for pa, tok in msg.signed_paths:
                pa = tuple(pa)
                if (tok.scope == PATH and tok.signed_path == pa
                        and tok.payload == m and tok.src == s
                        and self.env.verify(tok)):
                    kept.append((pa, tok))
                else:
                    st.dropped += 1
            valid_entries = tuple(kept)
            for pa, tok in valid_entries:
                entry = evidence_set(pa, tok.signer, s, g)
                self._insert_path(st, st.spaths, entry)
                st.spath_evidence.setdefault(frozenset(entry), (pa, tok))
                if () in st.spaths or self._k_disjoint(st.spaths):
                    self._deliver(st, node, key)
                    out_tok = self._paths_token(node, st, m, s)
                    st.sigs.add(out_tok)
                    outs += [(k, FloodSig(m, s, out_tok)) for k in self._nbrs(node)]
                    own_empty = ((), self.env.mint(node, m, s, signed_path=()))
                    slist = (own_empty,) + valid_entries
                    outs += [(k, DualPath(m, s, (), slist))
                             for k in sorted(set(self._nbrs(node)) - st.dn)]
                    return outs

        stored = tuple(x for x in strip_trusted(rpath, g) if x != s)
        self._insert_path(st, st.paths, stored)
        if () in st.paths or self._k_disjoint(st.paths):
            self._deliver(st, node, key)
            if auth:
                tok = self.env.mint(node, m, s)
                st.sigs.add(tok)
                outs += [(k, FloodSig(m, s, tok)) for k in self._nbrs(node)]
            passthrough = valid_entries if auth else msg.signed_paths
            outs += self._announce_delivery_paths(node, st, m, s, passthrough)
            return outs

        if auth:
            own_signed = (rpath, self.env.mint(node, m, s, signed_path=rpath))
            slist = (own_signed,) + valid_entries
        else:
            slist = msg.signed_paths
        outs += [(k, DualPath(m, s, rpath, slist))
                 for k in sorted(set(self._nbrs(node)) - set(rpath))]
        return outs

    def _paths_token(self, node, st: ProcessState, m, s) -> SignatureToken:
        """Token to flood after delivering on signed paths: a TC attestation
        over an f+1 disjoint signed-path witness when available, else the
        node's own signature."""
        if node in self.g.tc:
            backed = [e for e in st.spath_evidence if e]
            witness = find_k_disjoint(backed, self.f + 1) if len(backed) > self.f else None
            if witness is not None:
                entries = [st.spath_evidence[frozenset(w)] for w in witness]
                try:
                    return self.env.tc_for(node).attest_paths(m, s, entries, self.f)
                except AttestationError:
                    pass
        return self.env.mint(node, m, s)

    def _announce_delivery_paths(self, node, st: ProcessState, m, s, valid_entries):
        """Every delivery is announced with an empty dissemination path so
        neighbors gain a direct one-hop path; authenticated nodes vouch for
        it with a signed empty path."""
        if node in self.g.authenticated:
            own_empty = ((), self.env.mint(node, m, s, signed_path=()))
            slist = (own_empty,) + tuple(valid_entries)
        else:
            slist = tuple(valid_entries)
        return [(k, DualPath(m, s, (), slist))
                for k in sorted(set(self._nbrs(node)) - st.dn)]

    # -- optional relay pruning for signature messages

    def _note_incoming_sig(self, st: ProcessState, frm, sig: SignatureToken, s):
        strong = sig.signer == s or sig.signer in self.g.trusted or sig.kind == TC
        if strong:
            st.nbr_strong_sig.add(frm)
        else:
            st.nbr_signers.setdefault(frm, set()).add(sig.signer)

    def _prune_sig_sends(self, st: ProcessState, node, outs, s):
        auth = node in self.g.authenticated
        kept = []
        for dst, msg in outs:
            if not isinstance(msg, FloodSig):
                kept.append((dst, msg))
                continue
            if st.sig_done:
                continue
            if dst in st.nbr_strong_sig or len(st.nbr_signers.get(dst, ())) > self.f:
                continue
            kept.append((dst, msg))
            sig = msg.sig
            strong = sig.signer == s or sig.signer in self.g.trusted or sig.kind == TC
            if auth and strong:
                st.sig_done = True
            else:
                st.relayed_signers.add(sig.signer)
                if len(st.relayed_signers) > self.f:
                    st.sig_done = True
        return kept
