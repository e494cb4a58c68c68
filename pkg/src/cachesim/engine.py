"""Simulated provider-side prefix cache.

The store holds previously cached token prefixes with creation and
last-use timestamps under a virtual clock. Matching is exact token
equality on prefixes: an entry contributes the length of the longest
common prefix between the incoming prompt and the entry, the best
contribution is rounded down to the policy's block granularity, and the
result counts only if it clears the policy's minimum-token threshold.
An entry is live at time ``t`` while ``t - reference <= ttl``, where
the reference is the last use for refresh-on-read policies and the
creation time otherwise.

Writes are charged only for the delta beyond what was already cached:
re-committing an already-cached prefix is free and leaves the store
untouched. Committing a longer prefix drops entries it strictly
subsumes, which keeps the store compact without changing any lookup
result.

``oracle_lookup`` reimplements the lookup contract as a plain linear
scan with token-by-token comparison and no numpy, no mutation, and no
shortcuts. It exists to referee the engine: both must agree on every
store state, which is enforced by randomized interleaving tests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .policies import ProviderPolicy
from .tokens import TokenSeq


@dataclass
class CacheEntry:
    """One stored prefix. ``tokens`` is a read-only uint64 array."""

    tokens: np.ndarray
    created_at: float
    last_used_at: float

    @property
    def length(self) -> int:
        return int(self.tokens.size)


class CacheMatch(NamedTuple):
    cached_tokens: int
    entry: CacheEntry | None


class CacheStore:
    """Container for cached prefixes belonging to one (policy, run)."""

    def __init__(self) -> None:
        self._entries: list[CacheEntry] = []

    def __len__(self) -> int:
        return len(self._entries)

    def snapshot(self) -> tuple[CacheEntry, ...]:
        """Point-in-time view of the entries, in insertion order."""
        return tuple(self._entries)

    def clear(self) -> None:
        self._entries.clear()


def _reference_time(entry: CacheEntry, policy: ProviderPolicy) -> float:
    return entry.last_used_at if policy.refresh_on_read else entry.created_at


def _is_live(entry: CacheEntry, now: float, policy: ProviderPolicy) -> bool:
    return now - _reference_time(entry, policy) <= policy.ttl_seconds


def _common_prefix_len(a: np.ndarray, b: np.ndarray) -> int:
    n = min(a.size, b.size)
    if n == 0 or a[0] != b[0]:
        return 0
    neq = a[:n] != b[:n]
    idx = int(np.argmax(neq))
    return n if not neq[idx] else idx


def lookup(store: CacheStore, prompt: TokenSeq, now: float,
           policy: ProviderPolicy) -> CacheMatch:
    """Longest usable cached prefix of ``prompt`` at time ``now``.

    Returns 0 tokens unless the granularity-floored best match reaches
    the policy minimum. On a hit under a refresh-on-read policy, the
    matched entry's last-use timestamp is advanced to ``now``.
    """
    ids = prompt.ids
    best = 0
    best_entry: CacheEntry | None = None
    for entry in store._entries:
        if not _is_live(entry, now, policy):
            continue
        lcp = _common_prefix_len(ids, entry.tokens)
        if lcp > best:
            best = lcp
            best_entry = entry
    usable = (best // policy.granularity_tokens) * policy.granularity_tokens
    if usable < policy.min_cache_tokens:
        return CacheMatch(0, None)
    if policy.refresh_on_read:
        best_entry.last_used_at = now
    return CacheMatch(usable, best_entry)


def _already_cached(store: CacheStore, ids: np.ndarray, now: float,
                    policy: ProviderPolicy) -> tuple[int, list[int]]:
    """Usable cached length for ``ids`` plus raw per-entry prefix lengths.

    Same arithmetic as ``lookup`` but never refreshes timestamps. The raw
    lengths cover every entry (live or not) so commit can detect entries
    subsumed by a new, longer prefix.
    """
    best_live = 0
    lcps: list[int] = []
    for entry in store._entries:
        lcp = _common_prefix_len(ids, entry.tokens)
        lcps.append(lcp)
        if lcp > best_live and _is_live(entry, now, policy):
            best_live = lcp
    usable = (best_live // policy.granularity_tokens) * policy.granularity_tokens
    if usable < policy.min_cache_tokens:
        usable = 0
    return usable, lcps


def commit(store: CacheStore, prompt: TokenSeq, cacheable_limit: int,
           now: float, policy: ProviderPolicy) -> int:
    """Cache the prompt prefix up to ``cacheable_limit``; return new write tokens.

    The stored prefix length is the limit rounded down to the policy
    granularity; nothing is stored below the policy minimum. Only
    tokens beyond the currently cached prefix count as writes, so
    repeated commits of an unchanged prompt are free.
    """
    if cacheable_limit < 0 or cacheable_limit > len(prompt):
        raise ValueError(
            f"cacheable_limit {cacheable_limit} outside prompt of {len(prompt)} tokens")
    g = policy.granularity_tokens
    w = (cacheable_limit // g) * g
    if w < policy.min_cache_tokens:
        return 0
    ids = prompt.ids
    already, lcps = _already_cached(store, ids, now, policy)
    if w <= already:
        return 0
    # Drop entries whose whole prefix is contained in the new one; the
    # new entry matches at least as much and expires no sooner.
    survivors = [
        entry for entry, lcp in zip(store._entries, lcps)
        if not (lcp == entry.length and entry.length <= w
                and entry.created_at <= now and entry.last_used_at <= now)
    ]
    stored = ids[:w] if w == ids.size else ids[:w].copy()
    stored.setflags(write=False)
    survivors.append(CacheEntry(tokens=stored, created_at=now, last_used_at=now))
    store._entries = survivors
    return w - already


def purge_expired(store: CacheStore, now: float, policy: ProviderPolicy) -> int:
    """Remove entries no longer live at ``now``; returns how many were dropped."""
    before = len(store._entries)
    store._entries = [e for e in store._entries if _is_live(e, now, policy)]
    return before - len(store._entries)


def oracle_lookup(store: CacheStore | Iterable[CacheEntry], prompt: TokenSeq,
                  now: float, policy: ProviderPolicy) -> CacheMatch:
    """Reference lookup: pure-Python linear scan, token-by-token, no mutation.

    Must return the same match as :func:`lookup` for any store state;
    the randomized equivalence suite relies on that.
    """
    entries = store.snapshot() if isinstance(store, CacheStore) else tuple(store)
    prompt_list = prompt.to_list()
    best = 0
    best_entry: CacheEntry | None = None
    for entry in entries:
        reference = entry.last_used_at if policy.refresh_on_read else entry.created_at
        if now - reference > policy.ttl_seconds:
            continue
        n = 0
        for a, b in zip(prompt_list, entry.tokens.tolist()):
            if a != b:
                break
            n += 1
        if n > best:
            best = n
            best_entry = entry
    usable = (best // policy.granularity_tokens) * policy.granularity_tokens
    if usable < policy.min_cache_tokens:
        return CacheMatch(0, None)
    return CacheMatch(usable, best_entry)


def dump_store(store: CacheStore, path: str | Path) -> None:
    """Debug dump: one JSON line per entry with length and timestamps only."""
    with open(path, "w", encoding="utf-8") as fh:
        for entry in store.snapshot():
            fh.write(json.dumps({
                "length": entry.length,
                "created_at": entry.created_at,
                "last_used_at": entry.last_used_at,
            }))
            fh.write("\n")
