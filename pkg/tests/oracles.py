"""Independent reference implementations used only by the tests.

Nothing here imports the scheduling, chaining or timing code under test;
the oracles work from first principles (explicit microsecond sets, plain
arithmetic, hashlib/hmac directly).
"""

from __future__ import annotations

import hashlib
import hmac
import json
import math
from fractions import Fraction


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def arrival_time(send: int, links: list[tuple[int, int]], frame_bits: int) -> int:
    """links: (propagation_delay, capacity) per hop."""
    t = send
    for prop, cap in links:
        t += prop + ceil_div(frame_bits * 1_000_000, cap)
    return t


def occupied_instants(windows, horizon: int) -> dict[str, set[int]]:
    """windows: iterable of (link_id, offset, duration, period).
    Returns, per link, every microsecond covered within [0, horizon)."""
    busy: dict[str, set[int]] = {}
    for link, offset, duration, period in windows:
        s = busy.setdefault(link, set())
        for base in range(offset, horizon, period):
            s.update(range(base, base + duration))
    return busy


def overlap_count(windows, horizon: int) -> int:
    """Number of (link, instant) pairs claimed by more than one window instance."""
    claims: dict[tuple[str, int], int] = {}
    for link, offset, duration, period in windows:
        for base in range(offset, horizon, period):
            for t in range(base, base + duration):
                claims[(link, t)] = claims.get((link, t), 0) + 1
    return sum(1 for c in claims.values() if c > 1)


def feasible_schedule(
    chain: list[tuple[str, int, int]],
    period: int,
    frame_bits: int,
    max_latency: int,
    existing: list[tuple[str, int, int, int, int]],
) -> tuple[int, ...] | None:
    """Exhaustive search over integer offsets for one new stream on a chain.

    chain: (link_id, capacity, propagation) in path order.
    existing: (link_id, offset, duration, period, frame_bits) windows already
    reserved. Returns some feasible offset tuple, or None.
    """
    durations = [ceil_div(frame_bits * 1_000_000, cap) for _, cap, _ in chain]
    if any(d > period for d in durations):
        return None
    for link, cap, _ in chain:
        load = sum(Fraction(bits * 1_000_000, p) for l, _, _, p, bits in existing if l == link)
        if load + Fraction(frame_bits * 1_000_000, period) > cap:
            return None
    hyper = math.lcm(period, *[p for *_, p, _ in existing]) if existing else period
    busy = occupied_instants([(l, o, d, p) for l, o, d, p, _ in existing], hyper)
    free: list[list[int]] = []
    for (link, _, _), d in zip(chain, durations):
        taken = busy.get(link, set())
        ok = []
        for o in range(0, period - d + 1):
            if all(t not in taken for base in range(o, hyper, period) for t in range(base, base + d)):
                ok.append(o)
        free.append(ok)

    def search(i: int, earliest: int, picked: tuple[int, ...]):
        if i == len(chain):
            return picked
        for o in free[i]:
            if o < earliest:
                continue
            end = o + durations[i] + chain[i][2]
            if i == len(chain) - 1 and end > max_latency:
                break
            found = search(i + 1, end, picked + (o,))
            if found is not None:
                return found
        return None

    return search(0, 0, ())


def hmac_response(secret: bytes, challenge: bytes) -> bytes:
    return hmac.new(secret, challenge, hashlib.sha256).digest()


def recompute_chain(rows: list[dict]) -> list[str]:
    """Chain digests recomputed from exported audit rows."""
    out, prev = [], b""
    for row in rows:
        canon = json.dumps(
            {k: row[k] for k in ("index", "time", "actor", "action", "outcome")},
            sort_keys=True,
            separators=(",", ":"),
        ).encode()
        digest = hashlib.sha256(prev + canon).hexdigest()
        out.append(digest)
        prev = bytes.fromhex(digest)
    return out


def two_way_estimate(theta: int, d_fwd: int, d_rev: int, processing: int, t0: int = 0) -> int:
    """Offset estimate from explicit timestamps; server clock = client clock + theta."""
    t1 = t0 + d_fwd + theta
    t2 = t1 + processing
    t3 = t2 - theta + d_rev
    num = (t1 - t0) + (t2 - t3)
    return int(Fraction(num, 2))  # int() truncates toward zero
