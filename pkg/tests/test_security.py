import io
import json
import random

import pytest
from hypothesis import given, strategies as st

from oracles import hmac_response, recompute_chain
from tacnet.registration import AuthzDenied, AuthzGranted, RadioAttachFail, RadioAttachOk
from tacnet.security import (
    AuditLog,
    CredentialStore,
    OrderViolation,
    authorize_dte,
    challenge_response,
    load_audit,
    radio_attach_auth,
    verify_chain,
)

SECRET = b"\x01" * 32
STORE = CredentialStore(
    se_secrets={"se-1": SECRET},
    dte_signatures={"d1": b"sig"},
    authorized_systems={"d1": frozenset({"ConfigServer", "CUC"})},
)


class TestRadioAttach:
    def test_correct_response(self):
        ch = b"nonce"
        assert challenge_response(SECRET, ch) == hmac_response(SECRET, ch)
        assert radio_attach_auth(STORE, "se-1", ch, hmac_response(SECRET, ch)) == RadioAttachOk()

    def test_unknown_secure_element(self):
        assert radio_attach_auth(STORE, "se-x", b"n", b"r") == RadioAttachFail("UnknownSecureElement")

    def test_wrong_response(self):
        assert radio_attach_auth(STORE, "se-1", b"n", hmac_response(b"other", b"n")) == RadioAttachFail("ResponseMismatch")

    def test_auth_reject_fault(self):
        ok = hmac_response(SECRET, b"n")
        assert radio_attach_auth(STORE, "se-1", b"n", ok, rejected=True) == RadioAttachFail("AuthReject")


class TestAuthorize:
    def test_granted_with_scope(self):
        assert authorize_dte(STORE, "d1", b"sig", True) == AuthzGranted(frozenset({"ConfigServer", "CUC"}))

    def test_wrong_signature(self):
        assert authorize_dte(STORE, "d1", b"bad", True) == AuthzDenied("SignatureMismatch")
        assert authorize_dte(STORE, "nobody", b"sig", True) == AuthzDenied("UnknownDevice")

    def test_before_attach(self):
        with pytest.raises(OrderViolation):
            authorize_dte(STORE, "d1", b"sig", False)


def _log(n, seed=0):
    rng = random.Random(seed)
    log = AuditLog()
    for i in range(n):
        log.append(i * 3, rng.choice(["core-auth", "tacnet-authz", "d1"]), rng.choice(["auth", "transition"]), f"o{i}")
    return log


def _export(log):
    buf = io.StringIO()
    log.dump(buf, seed=1)
    return buf.getvalue().splitlines()


class TestAudit:
    def test_first_and_second_record(self):
        log = AuditLog()
        r0 = log.append(0, "a", "auth", "ok")
        r1 = log.append(1, "a", "auth", "ok")
        assert (r0.index, r1.index) == (0, 1)
        rows = [json.loads(l) for l in _export(log)[1:]]
        assert [r0.chain_digest, r1.chain_digest] == recompute_chain(rows)

    def test_thousand_appends_recompute_independently(self):
        log = _log(1_000)
        lines = _export(log)
        header = json.loads(lines[0])
        assert header["digest"] == "sha256" and header["format"] == "tacnet-audit"
        rows = [json.loads(l) for l in lines[1:]]
        assert [r["chain_digest"] for r in rows] == recompute_chain(rows)
        assert verify_chain(load_audit(lines)) is None

    def test_empty_log(self):
        assert verify_chain([]) is None

    @given(n=st.integers(1, 60), data=st.data())
    def test_single_byte_flip_detected_at_record(self, n, data):
        lines = _export(_log(n, seed=n))
        idx = data.draw(st.integers(0, n - 1))
        row = json.loads(lines[idx + 1])
        field = data.draw(st.sampled_from(["actor", "action", "outcome", "chain_digest", "time", "index"]))
        text = str(row[field])
        pos = data.draw(st.integers(0, len(text) - 1))
        flipped = text[:pos] + chr(ord(text[pos]) ^ 1) + text[pos + 1 :]
        if isinstance(row[field], int):
            if not flipped.lstrip("-").isdigit():
                return
            flipped = int(flipped)
        row[field] = flipped
        lines[idx + 1] = json.dumps(row)
        assert verify_chain(load_audit(lines)) == idx
