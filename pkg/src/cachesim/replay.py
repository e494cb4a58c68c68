"""Session replay: strategy + cache + pricing under a virtual clock.

Each simulated API call applies the strategy to the session's message
prefix, flattens it, consults the cache store, commits the cacheable
prefix, prices the resulting usage, and models time-to-first-token as

    ttft = (base + per_uncached * uncached + per_cached * cached
            + per_write * write) * exp(N(0, sigma))

with the lognormal factor drawn from a seeded per-condition stream.
Token conservation holds on every call: uncached + cached reads equals
the flattened prompt length.

A condition run owns one fresh store and one clock. Warmup sessions are
replayed first against the same store to prime it; their results are
excluded from evaluation and their cache writes are reported in a
separate ledger.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .engine import CacheStore, commit, lookup
from .errors import DegenerateFitError
from .policies import CacheMode, ProviderPolicy, UsageRecord, price_call
from .seeding import derive_seed
from .strategies import StrategyMode, apply_strategy
from .tokens import ROLE_TAG_IDS, Message, Role, flatten
from .workload import SessionTranscript


@dataclass(frozen=True)
class LatencyModel:
    """Linear prefill-time model with lognormal noise.

    Cached tokens must be cheaper than uncached ones; writes may cost
    extra on top of the uncached compute they ride on.
    """

    base_ms: float = 0.0
    per_uncached_token_ms: float = 0.05
    per_cached_token_ms: float = 0.005
    per_write_token_ms: float = 0.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.per_cached_token_ms >= self.per_uncached_token_ms:
            raise ValueError("cached tokens must be faster than uncached tokens")
        for name in ("base_ms", "per_uncached_token_ms", "per_cached_token_ms",
                     "per_write_token_ms", "noise_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def mean_ttft_ms(self, usage: UsageRecord) -> float:
        """Noise-free model value for one call's usage."""
        return (self.base_ms
                + self.per_uncached_token_ms * usage.uncached_input
                + self.per_cached_token_ms * usage.cached_read
                + self.per_write_token_ms * usage.cache_write)

    def to_dict(self) -> dict:
        return {
            "base_ms": self.base_ms,
            "per_uncached_token_ms": self.per_uncached_token_ms,
            "per_cached_token_ms": self.per_cached_token_ms,
            "per_write_token_ms": self.per_write_token_ms,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LatencyModel":
        return cls(**data)


@dataclass
class VirtualClock:
    """Monotonically non-decreasing simulated time in seconds."""

    now_s: float = 0.0

    def advance(self, dt: float) -> None:
        if dt < 0:
            raise ValueError("clock cannot move backwards")
        self.now_s += dt


@dataclass(frozen=True)
class CallResult:
    request_index: int
    usage: UsageRecord
    cost_usd: float
    ttft_ms: float
    time_s: float


@dataclass(frozen=True)
class SessionResult:
    session_id: str
    calls: tuple[CallResult, ...]

    @property
    def total_cost_usd(self) -> float:
        return sum(c.cost_usd for c in self.calls)

    @property
    def mean_ttft_ms(self) -> float:
        return sum(c.ttft_ms for c in self.calls) / len(self.calls)

    @property
    def total_uncached(self) -> int:
        return sum(c.usage.uncached_input for c in self.calls)

    @property
    def total_cached_read(self) -> int:
        return sum(c.usage.cached_read for c in self.calls)

    @property
    def total_cache_write(self) -> int:
        return sum(c.usage.cache_write for c in self.calls)

    @property
    def total_output(self) -> int:
        return sum(c.usage.output for c in self.calls)


@dataclass(frozen=True)
class ConditionRun:
    """Evaluation results for one (policy, mode) condition plus its warmup ledger."""

    policy_name: str
    mode: StrategyMode
    sessions: tuple[SessionResult, ...]
    warmup_sessions: int
    warmup_write_tokens: int
    warmup_cost_usd: float


class _SegmentMemo:
    """Previously seen breaker-delimited segments for one condition.

    Backs the opportunistic-segments toggle: an automatic provider that
    reuses repeated interior content is modeled as matching any segment
    (content between breaker boundaries) it has seen verbatim before.
    Membership is by full content, so collisions are impossible.
    """

    _BREAKER_TAG = np.uint64(ROLE_TAG_IDS[Role.BREAKER])

    def __init__(self) -> None:
        self._seen: set[bytes] = set()

    def match_and_record(self, flat_ids: np.ndarray, prefix_end: int,
                         granularity: int) -> int:
        marks = np.flatnonzero(flat_ids == self._BREAKER_TAG)
        if marks.size == 0:
            return 0
        bounds: list[tuple[int, int]] = []
        start = 0
        for pos in marks.tolist():
            bounds.append((start, pos))
            start = pos + 2
        bounds.append((start, int(flat_ids.size)))
        extra = 0
        new_segments = []
        for seg_start, seg_end in bounds:
            if seg_end <= seg_start:
                continue
            data = flat_ids[seg_start:seg_end].tobytes()
            if seg_start >= prefix_end and data in self._seen:
                length = seg_end - seg_start
                extra += (length // granularity) * granularity
            new_segments.append(data)
        self._seen.update(new_segments)
        return extra


def replay_call(messages: Sequence[Message], mode: StrategyMode, request_index: int,
                policy: ProviderPolicy, store: CacheStore, clock: VirtualClock,
                latency_model: LatencyModel, output_tokens: int, *,
                session_seed: int, noise: np.random.Generator,
                advance_s: float = 0.0,
                segment_memo: _SegmentMemo | None = None) -> CallResult:
    """Simulate one API call and advance the clock by ``advance_s`` after it."""
    prompt = apply_strategy(messages, mode, request_index, session_seed, policy.mode)
    flat = flatten(prompt)
    now = clock.now_s

    match = lookup(store, flat, now, policy)
    cached = match.cached_tokens
    if (segment_memo is not None and policy.opportunistic_segments
            and policy.mode is not CacheMode.EXPLICIT_BREAKPOINTS):
        cached += segment_memo.match_and_record(flat.ids, cached, policy.granularity_tokens)

    if policy.mode is CacheMode.EXPLICIT_BREAKPOINTS:
        limit = prompt.breakpoints[-1] if prompt.breakpoints else 0
    else:
        limit = len(flat)
    write = commit(store, flat, limit, now, policy) if limit > 0 else 0

    usage = UsageRecord(
        uncached_input=len(flat) - cached,
        cached_read=cached,
        cache_write=write,
        output=output_tokens,
    )
    cost = price_call(usage, policy, prompt_total_tokens=len(flat))
    factor = math.exp(latency_model.noise_sigma * noise.standard_normal())
    ttft = latency_model.mean_ttft_ms(usage) * factor
    result = CallResult(request_index=request_index, usage=usage,
                        cost_usd=cost, ttft_ms=ttft, time_s=now)
    clock.advance(advance_s)
    return result


def _replay_session(transcript: SessionTranscript, mode: StrategyMode,
                    policy: ProviderPolicy, store: CacheStore, clock: VirtualClock,
                    latency_model: LatencyModel, noise: np.random.Generator,
                    memo: _SegmentMemo | None) -> SessionResult:
    calls = []
    n = transcript.num_requests
    for r in range(1, n + 1):
        if r < n:
            gap = transcript.request_time(r + 1) - transcript.request_time(r)
        else:
            gap = transcript.duration_s - transcript.request_time(n)
        calls.append(replay_call(
            transcript.request_messages(r), mode, r, policy, store, clock,
            latency_model, transcript.output_tokens(r),
            session_seed=transcript.session_seed, noise=noise,
            advance_s=gap, segment_memo=memo,
        ))
    return SessionResult(session_id=transcript.session_id, calls=tuple(calls))


def run_condition(transcripts: Sequence[SessionTranscript], mode: StrategyMode,
                  policy: ProviderPolicy, latency_model: LatencyModel,
                  warmup_sessions: int = 0) -> ConditionRun:
    """Replay all transcripts under one (policy, mode) condition.

    A fresh store and clock are used, so conditions never contaminate
    each other. The first ``warmup_sessions`` transcripts prime the
    cache; the rest are the evaluation set. The condition's noise
    stream is derived from (latency seed, policy, mode), so conditions
    stay independent no matter how many run or in what order.
    """
    if warmup_sessions < 0:
        raise ValueError("warmup_sessions must be >= 0")
    if warmup_sessions >= len(transcripts):
        raise ValueError(
            f"warmup_sessions={warmup_sessions} leaves no evaluation sessions "
            f"out of {len(transcripts)} transcripts")
    store = CacheStore()
    clock = VirtualClock()
    memo = _SegmentMemo() if policy.opportunistic_segments else None
    noise = np.random.Generator(np.random.PCG64(
        derive_seed(latency_model.seed, "noise", policy.name, mode.value)))

    warmup_writes = 0
    warmup_cost = 0.0
    for transcript in transcripts[:warmup_sessions]:
        result = _replay_session(transcript, mode, policy, store, clock,
                                 latency_model, noise, memo)
        warmup_writes += result.total_cache_write
        warmup_cost += result.total_cost_usd

    sessions = tuple(
        _replay_session(transcript, mode, policy, store, clock,
                        latency_model, noise, memo)
        for transcript in transcripts[warmup_sessions:])
    return ConditionRun(
        policy_name=policy.name, mode=mode, sessions=sessions,
        warmup_sessions=warmup_sessions, warmup_write_tokens=warmup_writes,
        warmup_cost_usd=warmup_cost,
    )


@dataclass(frozen=True)
class CalibrationResult:
    model: LatencyModel
    rmse_ms: float


def calibrate_latency(observed: Sequence[tuple[UsageRecord, float]],
                      seed: int = 0) -> CalibrationResult:
    """Least-squares fit of the latency model to observed (usage, ttft) pairs.

    Needs at least four observations whose usage shapes span the model's
    four coefficients; otherwise raises :class:`DegenerateFitError`. The
    noise sigma is estimated from log-space residuals.
    """
    if len(observed) < 4:
        raise DegenerateFitError(
            f"need at least 4 observations, got {len(observed)}")
    design = np.array([
        [1.0, u.uncached_input, u.cached_read, u.cache_write]
        for u, _ in observed])
    target = np.array([t for _, t in observed], dtype=float)
    coeffs, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < 4:
        raise DegenerateFitError(
            "observations do not span distinct usage shapes (rank-deficient fit)")
    predicted = design @ coeffs
    rmse = float(np.sqrt(np.mean((predicted - target) ** 2)))
    if np.any(predicted <= 0) or np.any(target <= 0):
        sigma = 0.0
    else:
        sigma = float(np.std(np.log(target) - np.log(predicted)))
    model = LatencyModel(
        base_ms=float(coeffs[0]),
        per_uncached_token_ms=float(coeffs[1]),
        per_cached_token_ms=float(coeffs[2]),
        per_write_token_ms=float(coeffs[3]),
        noise_sigma=sigma,
        seed=seed,
    )
    return CalibrationResult(model=model, rmse_ms=rmse)
