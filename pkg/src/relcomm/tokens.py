"""Simulated signatures and the trusted-component contract.

Tokens are environment-minted records; verification is a genuineness
lookup against the environment. A process (or an adversary) can mint
tokens under its own id freely, replay any token it has seen, but can
never produce a token under another id. TC-grade tokens exist only as the
output of a successful attestation call, which the environment records for
auditing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .graph import Topology, strip_trusted

NODE = "node"
TC = "tc"
PAYLOAD = "payload"
PATH = "path"


class AttestationError(ValueError):
    """The trusted component refused to sign."""


@dataclass(frozen=True)
class SignatureToken:
    signer: int
    kind: str            # "node" or "tc"
    scope: str           # "payload" or "path"
    payload: object
    src: int
    signed_path: Optional[tuple] = None  # present iff scope == "path"

    def __post_init__(self):
        if self.kind not in (NODE, TC):
            raise ValueError(f"unknown token kind {self.kind!r}")
        if self.scope not in (PAYLOAD, PATH):
            raise ValueError(f"unknown token scope {self.scope!r}")
        if (self.scope == PATH) != (self.signed_path is not None):
            raise ValueError("signed_path present iff the token scope is 'path'")


class TokenEnvironment:
    """Central signing authority for one simulated system.

    ``mint`` produces node-grade tokens; TC-grade tokens come only from
    :class:`TrustedComponent` attestation, which is logged in ``attestations``.
    """

    def __init__(self, g: Topology):
        self.topology = g
        self._minted = set()
        self.attestations = []  # (owner, payload, src, evidence) per tc token
        self._tcs = {}

    def mint(self, signer: int, payload, src: int,
             signed_path: Optional[tuple] = None) -> SignatureToken:
        if signer not in self.topology.authenticated:
            raise ValueError(f"node {signer} cannot sign (not authenticated)")
        scope = PATH if signed_path is not None else PAYLOAD
        tok = SignatureToken(signer, NODE, scope, payload, src, signed_path)
        self._minted.add(tok)
        return tok

    def _mint_tc(self, owner: int, payload, src: int, evidence: str) -> SignatureToken:
        tok = SignatureToken(owner, TC, PAYLOAD, payload, src)
        self._minted.add(tok)
        self.attestations.append((owner, payload, src, evidence))
        return tok

    def verify(self, tok: SignatureToken) -> bool:
        """Genuineness check: was this exact token ever minted?"""
        return tok in self._minted

    def tc_tokens(self):
        return {t for t in self._minted if t.kind == TC}

    def tc_for(self, owner: int) -> "TrustedComponent":
        if owner not in self.topology.tc:
            raise ValueError(f"node {owner} has no trusted component")
        if owner not in self._tcs:
            self._tcs[owner] = TrustedComponent(owner, self)
        return self._tcs[owner]


def evidence_set(pa: tuple, signer: int, src: int, g: Topology) -> tuple:
    """Normalize one signed dissemination path into the node set that must be
    correct for the evidence to be genuine: the path plus its signer, minus
    trusted nodes (never faulty) and minus the broadcaster (assumed correct).

    TC-equipped nodes stay: a TC host can be Byzantine, so its presence on a
    path, or as a signer, still taints the evidence.
    """
    seq = tuple(pa) + ((signer,) if signer not in pa else ())
    return tuple(x for x in strip_trusted(seq, g) if x != src)


class TrustedComponent:
    """Tamper-proof co-processor: honest even when its host is not.

    Signs a payload only after verifying a broadcaster-grade signature on
    it, or after checking f+1 signed, pairwise vertex-disjoint dissemination
    paths for it.
    """

    def __init__(self, owner: int, env: TokenEnvironment):
        if owner not in env.topology.tc:
            raise ValueError(f"node {owner} has no trusted component")
        self.owner = owner
        self.env = env

    def attest_signature(self, payload, src: int, sig: SignatureToken) -> SignatureToken:
        if sig.scope != PAYLOAD:
            raise AttestationError("payload-scope token required")
        if sig.payload != payload or sig.src != src:
            raise AttestationError("token does not cover this payload")
        if not self.env.verify(sig):
            raise AttestationError("token failed verification")
        trusted_grade = (sig.signer == src or sig.signer in self.env.topology.trusted
                         or sig.kind == TC)
        if not trusted_grade:
            raise AttestationError("token is neither the broadcaster's nor trusted-grade")
        return self.env._mint_tc(self.owner, payload, src, "signature")

    def attest_paths(self, payload, src: int, entries, f: int) -> SignatureToken:
        entries = list(entries)
        if len(entries) != f + 1:
            raise AttestationError(f"expected {f + 1} signed paths, got {len(entries)}")
        g = self.env.topology
        witness = []
        for pa, tok in entries:
            pa = tuple(pa)
            if tok.scope != PATH or tok.signed_path != pa:
                raise AttestationError("token does not sign this path")
            if tok.payload != payload or tok.src != src:
                raise AttestationError("token does not cover this payload")
            if not self.env.verify(tok):
                raise AttestationError("token failed verification")
            witness.append(set(evidence_set(pa, tok.signer, src, g)))
        for i in range(len(witness)):
            for j in range(i + 1, len(witness)):
                if witness[i] & witness[j]:
                    raise AttestationError("signed paths are not pairwise vertex-disjoint")
        return self.env._mint_tc(self.owner, payload, src, "paths")
