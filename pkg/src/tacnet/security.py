"""Security plane: simulated radio-attach authentication, DTE authorization
and a hash-chained audit log.

Radio attach is a single keyed-digest challenge/response (HMAC-SHA256), not
real 3GPP AKA. Audit records are chained with SHA-256.
"""

from __future__ import annotations

import hashlib
import hmac
import json
from dataclasses import dataclass, field
from typing import Iterable, TextIO

from .registration import AuthzDenied, AuthzGranted, RadioAttachFail, RadioAttachOk

DIGEST_ALGORITHM = "sha256"
AUDIT_FORMAT = "tacnet-audit"


class OrderViolation(Exception):
    """A function was invoked before its protocol precondition held."""


def challenge_response(secret: bytes, challenge: bytes) -> bytes:
    return hmac.new(secret, challenge, hashlib.sha256).digest()


@dataclass
class CredentialStore:
    se_secrets: dict[str, bytes] = field(default_factory=dict)
    dte_signatures: dict[str, bytes] = field(default_factory=dict)
    authorized_systems: dict[str, frozenset[str]] = field(default_factory=dict)


def radio_attach_auth(
    store: CredentialStore,
    secure_element_id: str,
    challenge: bytes,
    response: bytes,
    rejected: bool = False,
) -> RadioAttachOk | RadioAttachFail:
    secret = store.se_secrets.get(secure_element_id)
    if rejected:
        return RadioAttachFail("AuthReject")
    if secret is None:
        return RadioAttachFail("UnknownSecureElement")
    if not hmac.compare_digest(challenge_response(secret, challenge), response):
        return RadioAttachFail("ResponseMismatch")
    return RadioAttachOk()


def authorize_dte(
    store: CredentialStore, device_id: str, signature: bytes, radio_attached: bool
) -> AuthzGranted | AuthzDenied:
    if not radio_attached:
        raise OrderViolation(f"authorization requested for {device_id} before radio attach")
    expected = store.dte_signatures.get(device_id)
    if expected is None:
        return AuthzDenied("UnknownDevice")
    if not hmac.compare_digest(expected, signature):
        return AuthzDenied("SignatureMismatch")
    return AuthzGranted(store.authorized_systems.get(device_id, frozenset()))


# -- audit log --------------------------------------------------------------


@dataclass(frozen=True)
class AuditRecord:
    index: int
    time: int
    actor: str
    action: str
    outcome: str
    chain_digest: str

    def canonical(self) -> bytes:
        return canonical_bytes(self.index, self.time, self.actor, self.action, self.outcome)

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "time": self.time,
            "actor": self.actor,
            "action": self.action,
            "outcome": self.outcome,
            "chain_digest": self.chain_digest,
        }


def canonical_bytes(index: int, time: int, actor: str, action: str, outcome: str) -> bytes:
    payload = {"index": index, "time": time, "actor": actor, "action": action, "outcome": outcome}
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()


def chain(prev_digest: str, canonical: bytes) -> str:
    return hashlib.sha256(bytes.fromhex(prev_digest) + canonical).hexdigest()


class AuditLog:
    def __init__(self):
        self.records: list[AuditRecord] = []

    @property
    def head(self) -> str:
        return self.records[-1].chain_digest if self.records else ""

    def append(self, time: int, actor: str, action: str, outcome: str) -> AuditRecord:
        index = len(self.records)
        digest = chain(self.head, canonical_bytes(index, time, actor, action, outcome))
        rec = AuditRecord(index, time, actor, action, outcome, digest)
        self.records.append(rec)
        return rec

    def __len__(self):
        return len(self.records)

    def count(self, action: str) -> int:
        return sum(1 for r in self.records if r.action == action)

    def dump(self, fh: TextIO, seed: int | None = None) -> None:
        header = {"format": AUDIT_FORMAT, "version": 1, "digest": DIGEST_ALGORITHM, "seed": seed}
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
        for rec in self.records:
            fh.write(json.dumps(rec.to_json(), sort_keys=True, separators=(",", ":")) + "\n")


def verify_chain(records: Iterable[AuditRecord]) -> int | None:
    """Index of the first record whose digest does not recompute, else None."""
    prev = ""
    for pos, rec in enumerate(records):
        if rec.index != pos or chain(prev, rec.canonical()) != rec.chain_digest:
            return pos
        prev = rec.chain_digest
    return None


def load_audit(lines: Iterable[str]) -> list[AuditRecord]:
    """Parse an audit JSON-lines export (header line first)."""
    it = iter(lines)
    header = json.loads(next(it))
    if header.get("format") != AUDIT_FORMAT or header.get("digest") != DIGEST_ALGORITHM:
        raise ValueError(f"not a {AUDIT_FORMAT}/{DIGEST_ALGORITHM} file")
    out = []
    for line in it:
        if line.strip():
            d = json.loads(line)
            out.append(AuditRecord(d["index"], d["time"], d["actor"], d["action"], d["outcome"], d["chain_digest"]))
    return out
