"""Provider caching policies and token pricing.

Each policy bundles one provider/model's caching rules (minimum
cacheable tokens, block granularity, TTL, refresh behavior, caching
mode) with its price schedule. Four built-in policies ship with the
simulator, priced in USD per million tokens:

| policy            | input | output | cached read | cache write | min tokens |
|-------------------|-------|--------|-------------|-------------|------------|
| gpt-4o            | 2.50  | 10.00  | 1.25        | ---         | 1024       |
| gpt-5.2           | 1.75  | 14.00  | 0.175       | ---         | 1024       |
| claude-sonnet-4.5 | 3.00  | 15.00  | 0.30        | 3.75        | 1024       |
| gemini-2.5-pro    | 1.25  | 10.00  | 0.125       | ---         | 4096       |

gemini-2.5-pro switches to 2.50 / 15.00 / 0.250 for calls whose prompt
exceeds 200K tokens, and additionally charges $4.50 per million tokens
per hour of cache storage, exposed separately via :func:`price_storage`
and excluded from per-call totals.

Defaults that providers do not publish precisely (block granularity,
TTL, TTL refresh on read) are documented assumptions and overridable:
granularity 128 for automatic policies, 1 for breakpoint policies; TTL
300 s; refresh-on-read only for claude-sonnet-4.5.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path


class CacheMode(Enum):
    """How a provider decides what becomes cacheable."""

    AUTOMATIC = "automatic"
    EXPLICIT_BREAKPOINTS = "explicit-breakpoints"
    EXPLICIT_CACHE_OBJECT = "explicit-cache-object"


@dataclass(frozen=True)
class PriceSchedule:
    """USD-per-million-token rates for one model.

    Tier-2 rates, when present, apply to calls whose total prompt size
    exceeds ``tier_boundary_tokens``. Absent write/storage rates mean
    the provider does not bill that component.
    """

    input_per_mtok: float
    output_per_mtok: float
    cached_read_per_mtok: float
    cache_write_per_mtok: float | None = None
    storage_per_mtok_hour: float | None = None
    tier_boundary_tokens: int | None = None
    tier2_input_per_mtok: float | None = None
    tier2_output_per_mtok: float | None = None
    tier2_cached_read_per_mtok: float | None = None

    def __post_init__(self) -> None:
        if self.cached_read_per_mtok >= self.input_per_mtok:
            raise ValueError("cached reads must be cheaper than uncached input")
        tier2 = (self.tier2_input_per_mtok, self.tier2_output_per_mtok,
                 self.tier2_cached_read_per_mtok)
        if self.tier_boundary_tokens is not None and any(v is None for v in tier2):
            raise ValueError("tiered schedules need all tier-2 rates")


@dataclass(frozen=True)
class UsageRecord:
    """Per-call token accounting, mirroring provider usage blocks."""

    uncached_input: int
    cached_read: int
    cache_write: int
    output: int

    def __post_init__(self) -> None:
        for name in ("uncached_input", "cached_read", "cache_write", "output"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def prompt_tokens(self) -> int:
        return self.uncached_input + self.cached_read


@dataclass(frozen=True)
class ProviderPolicy:
    """One provider/model's caching rules plus its price schedule."""

    name: str
    min_cache_tokens: int
    granularity_tokens: int
    ttl_seconds: float
    refresh_on_read: bool
    mode: CacheMode
    prices: PriceSchedule
    # When on, automatic policies may also reuse repeated interior
    # segments between breaker boundaries (idealized; off by default).
    opportunistic_segments: bool = False

    def __post_init__(self) -> None:
        if self.granularity_tokens < 1:
            raise ValueError("granularity_tokens must be >= 1")
        if self.min_cache_tokens < self.granularity_tokens:
            raise ValueError("min_cache_tokens must be >= granularity_tokens")
        if self.ttl_seconds <= 0:
            raise ValueError("ttl_seconds must be positive")


def builtin_policies(*, granularity: int | None = None,
                     ttl_seconds: float | None = None,
                     refresh_on_read: bool | None = None) -> list[ProviderPolicy]:
    """The four built-in policies.

    Keyword arguments override the documented defaults (granularity,
    TTL, refresh behavior) uniformly across all four; individual
    policies can be further tweaked with :func:`dataclasses.replace`.
    """
    ttl = 300.0 if ttl_seconds is None else ttl_seconds

    def g(default: int) -> int:
        return default if granularity is None else granularity

    def r(default: bool) -> bool:
        return default if refresh_on_read is None else refresh_on_read

    return [
        ProviderPolicy(
            name="gpt-4o", min_cache_tokens=1024, granularity_tokens=g(128),
            ttl_seconds=ttl, refresh_on_read=r(False), mode=CacheMode.AUTOMATIC,
            prices=PriceSchedule(2.50, 10.00, 1.25),
        ),
        ProviderPolicy(
            name="gpt-5.2", min_cache_tokens=1024, granularity_tokens=g(128),
            ttl_seconds=ttl, refresh_on_read=r(False), mode=CacheMode.AUTOMATIC,
            prices=PriceSchedule(1.75, 14.00, 0.175),
        ),
        ProviderPolicy(
            name="claude-sonnet-4.5", min_cache_tokens=1024, granularity_tokens=g(1),
            ttl_seconds=ttl, refresh_on_read=r(True), mode=CacheMode.EXPLICIT_BREAKPOINTS,
            prices=PriceSchedule(3.00, 15.00, 0.30, cache_write_per_mtok=3.75),
        ),
        ProviderPolicy(
            name="gemini-2.5-pro", min_cache_tokens=4096, granularity_tokens=g(128),
            ttl_seconds=ttl, refresh_on_read=r(False), mode=CacheMode.AUTOMATIC,
            prices=PriceSchedule(
                1.25, 10.00, 0.125,
                storage_per_mtok_hour=4.50,
                tier_boundary_tokens=200_000,
                tier2_input_per_mtok=2.50,
                tier2_output_per_mtok=15.00,
                tier2_cached_read_per_mtok=0.250,
            ),
        ),
    ]


def builtin_policy(name: str) -> ProviderPolicy:
    """Look up one built-in policy by name."""
    for policy in builtin_policies():
        if policy.name == name:
            return policy
    known = ", ".join(p.name for p in builtin_policies())
    raise KeyError(f"unknown policy {name!r}; built-ins are: {known}")


def price_call(usage: UsageRecord, policy: ProviderPolicy,
               prompt_total_tokens: int) -> float:
    """Price one API call in USD.

    Each usage component is billed at its per-token rate. For tiered
    schedules the tier is selected once per call from the whole prompt
    size, and the tier-2 rates then apply to every component of the
    call. Storage charges are not included here.
    """
    p = policy.prices
    tiered = (p.tier_boundary_tokens is not None
              and prompt_total_tokens > p.tier_boundary_tokens)
    in_rate = p.tier2_input_per_mtok if tiered else p.input_per_mtok
    read_rate = p.tier2_cached_read_per_mtok if tiered else p.cached_read_per_mtok
    out_rate = p.tier2_output_per_mtok if tiered else p.output_per_mtok
    write_rate = p.cache_write_per_mtok or 0.0
    total = (usage.uncached_input * in_rate
             + usage.cached_read * read_rate
             + usage.cache_write * write_rate
             + usage.output * out_rate)
    return total / 1e6


def price_storage(cached_tokens: int, hours: float, policy: ProviderPolicy) -> float:
    """Cache storage cost in USD; zero for policies without a storage rate."""
    if cached_tokens < 0 or hours < 0:
        raise ValueError("cached_tokens and hours must be non-negative")
    rate = policy.prices.storage_per_mtok_hour
    if rate is None:
        return 0.0
    return cached_tokens * hours * rate / 1e6


# --- JSON serialization -----------------------------------------------------
#
# Schema (one policy object):
# {
#   "name": str, "min_cache_tokens": int, "granularity_tokens": int,
#   "ttl_seconds": float, "refresh_on_read": bool,
#   "mode": "automatic" | "explicit-breakpoints" | "explicit-cache-object",
#   "opportunistic_segments": bool (optional, default false),
#   "prices": {
#     "input_per_mtok": float, "output_per_mtok": float,
#     "cached_read_per_mtok": float,
#     "cache_write_per_mtok": float | null,
#     "storage_per_mtok_hour": float | null,
#     "tier_boundary_tokens": int | null,
#     "tier2_input_per_mtok": float | null,
#     "tier2_output_per_mtok": float | null,
#     "tier2_cached_read_per_mtok": float | null
#   }
# }
# A policy file holds a JSON array of such objects.

def policy_to_dict(policy: ProviderPolicy) -> dict:
    prices = policy.prices
    return {
        "name": policy.name,
        "min_cache_tokens": policy.min_cache_tokens,
        "granularity_tokens": policy.granularity_tokens,
        "ttl_seconds": policy.ttl_seconds,
        "refresh_on_read": policy.refresh_on_read,
        "mode": policy.mode.value,
        "opportunistic_segments": policy.opportunistic_segments,
        "prices": {
            "input_per_mtok": prices.input_per_mtok,
            "output_per_mtok": prices.output_per_mtok,
            "cached_read_per_mtok": prices.cached_read_per_mtok,
            "cache_write_per_mtok": prices.cache_write_per_mtok,
            "storage_per_mtok_hour": prices.storage_per_mtok_hour,
            "tier_boundary_tokens": prices.tier_boundary_tokens,
            "tier2_input_per_mtok": prices.tier2_input_per_mtok,
            "tier2_output_per_mtok": prices.tier2_output_per_mtok,
            "tier2_cached_read_per_mtok": prices.tier2_cached_read_per_mtok,
        },
    }


def policy_from_dict(data: dict) -> ProviderPolicy:
    try:
        prices = PriceSchedule(**data["prices"])
        return ProviderPolicy(
            name=data["name"],
            min_cache_tokens=data["min_cache_tokens"],
            granularity_tokens=data["granularity_tokens"],
            ttl_seconds=data["ttl_seconds"],
            refresh_on_read=data["refresh_on_read"],
            mode=CacheMode(data["mode"]),
            prices=prices,
            opportunistic_segments=data.get("opportunistic_segments", False),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed policy document: {exc}") from exc


def load_policies(path: str | Path) -> list[ProviderPolicy]:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return [policy_from_dict(entry) for entry in raw]


def save_policies(policies: list[ProviderPolicy], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([policy_to_dict(p) for p in policies], fh, indent=2, sort_keys=True)
        fh.write("\n")


def override_policy(policy: ProviderPolicy, **changes) -> ProviderPolicy:
    """Convenience wrapper over :func:`dataclasses.replace`."""
    return replace(policy, **changes)
