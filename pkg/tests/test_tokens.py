import itertools

import pytest

from relcomm.graph import topology
from relcomm.tokens import (
    AttestationError,
    SignatureToken,
    TokenEnvironment,
    evidence_set,
)


@pytest.fixture
def env():
    g = topology(
        6,
        [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)],
        authenticated=[0, 1, 2, 3, 4],
        trusted=[3],
        tc=[2, 3],
    )
    return TokenEnvironment(g)


def test_mint_and_verify_round_trip(env):
    tok = env.mint(0, "m", 0)
    assert env.verify(tok)


def test_foreign_token_does_not_verify(env):
    forged = SignatureToken(1, "node", "payload", "m", 0)
    assert not env.verify(forged)


def test_non_authenticated_node_cannot_sign(env):
    with pytest.raises(ValueError):
        env.mint(5, "m", 0)


def test_path_scope_token_shape():
    with pytest.raises(ValueError):
        SignatureToken(0, "node", "path", "m", 0, signed_path=None)
    with pytest.raises(ValueError):
        SignatureToken(0, "node", "payload", "m", 0, signed_path=(1,))


def test_tc_handle_requires_tc_node(env):
    with pytest.raises(ValueError):
        env.tc_for(0)
    env.tc_for(2)


# ------------------------------------------------------ attest_signature

def test_attest_signature_broadcaster_token(env):
    sig = env.mint(0, "m", 0)
    tok = env.tc_for(2).attest_signature("m", 0, sig)
    assert tok.kind == "tc" and tok.signer == 2
    assert env.verify(tok)


def test_attest_signature_refuses_plain_token(env):
    sig = env.mint(1, "m", 0)  # node 1 is neither broadcaster nor trusted
    with pytest.raises(AttestationError):
        env.tc_for(2).attest_signature("m", 0, sig)


def test_attest_signature_refuses_forged_token(env):
    forged = SignatureToken(0, "node", "payload", "m", 0)
    with pytest.raises(AttestationError):
        env.tc_for(2).attest_signature("m", 0, forged)


def test_attest_signature_trusted_signer(env):
    sig = env.mint(3, "m", 0)  # node 3 is trusted and authenticated
    tok = env.tc_for(2).attest_signature("m", 0, sig)
    assert tok.kind == "tc"


def test_attest_signature_tc_token_endorsed(env):
    base = env.mint(0, "m", 0)
    first = env.tc_for(2).attest_signature("m", 0, base)
    again = env.tc_for(3).attest_signature("m", 0, first)
    assert again.kind == "tc" and again.signer == 3


def test_attest_signature_wrong_payload(env):
    sig = env.mint(0, "m", 0)
    with pytest.raises(AttestationError):
        env.tc_for(2).attest_signature("other", 0, sig)


# ----------------------------------------------------------- attest_paths

def signed_path(env, signer, pa, payload="m", src=0):
    return (tuple(pa), env.mint(signer, payload, src, signed_path=tuple(pa)))


def test_attest_paths_disjoint_singletons(env):
    entries = [signed_path(env, 1, ()), signed_path(env, 4, ())]
    tok = env.tc_for(2).attest_paths("m", 0, entries, f=1)
    assert tok.kind == "tc"
    assert env.verify(tok)


def test_attest_paths_overlap_refused(env):
    entries = [signed_path(env, 1, (4,)), signed_path(env, 2, (4,))]
    with pytest.raises(AttestationError):
        env.tc_for(3).attest_paths("m", 0, entries, f=1)


def test_attest_paths_shared_signer_refused(env):
    # the signer taints its own evidence, so two paths signed by one node overlap
    entries = [signed_path(env, 1, ()), signed_path(env, 1, (4,))]
    with pytest.raises(AttestationError):
        env.tc_for(2).attest_paths("m", 0, entries, f=1)


def test_attest_paths_bad_count(env):
    entries = [signed_path(env, 1, ())]
    with pytest.raises(AttestationError):
        env.tc_for(2).attest_paths("m", 0, entries, f=1)


def test_attest_paths_forged_member_refused(env):
    good = signed_path(env, 1, ())
    forged = ((4,), SignatureToken(4, "node", "path", "m", 0, signed_path=(4,)))
    with pytest.raises(AttestationError):
        env.tc_for(2).attest_paths("m", 0, [good, forged], f=1)


def test_attest_paths_token_path_mismatch(env):
    pa, tok = signed_path(env, 1, (4,))
    with pytest.raises(AttestationError):
        env.tc_for(2).attest_paths("m", 0, [((5,), tok), signed_path(env, 4, ())], f=1)


def test_attest_paths_trusted_members_ignored_for_disjointness(env):
    # both paths run through trusted node 3; stripping it leaves them disjoint
    entries = [signed_path(env, 1, (3,)), signed_path(env, 4, (3,))]
    tok = env.tc_for(2).attest_paths("m", 0, entries, f=1)
    assert tok.kind == "tc"


def test_attest_paths_tc_members_still_count(env):
    # node 2 is TC-equipped but untrusted: sharing it must refuse attestation
    entries = [signed_path(env, 1, (2,)), signed_path(env, 4, (2,))]
    with pytest.raises(AttestationError):
        env.tc_for(3).attest_paths("m", 0, entries, f=1)


def test_tc_audit_log_matches_tc_tokens(env):
    sig = env.mint(0, "m", 0)
    env.tc_for(2).attest_signature("m", 0, sig)
    env.tc_for(3).attest_paths(
        "m", 0, [signed_path(env, 1, ()), signed_path(env, 4, ())], f=1
    )
    with pytest.raises(AttestationError):
        env.tc_for(2).attest_signature("m", 0, env.mint(1, "m", 0))
    assert len(env.tc_tokens()) == len(env.attestations) == 2


def test_evidence_set_normalization():
    g = topology(6, [], authenticated=[1, 2], trusted=[3], tc=[2])
    # trusted stripped, broadcaster stripped, signer appended, TC host kept
    assert evidence_set((3, 4), 1, 0, g) == (4, 1)
    assert evidence_set((0, 2), 1, 0, g) == (2, 1)
    assert evidence_set((), 0, 0, g) == ()
    # a signer already on the path is not duplicated
    assert evidence_set((1, 4), 1, 0, g) == (1, 4)
