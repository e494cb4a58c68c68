"""Breaker placement, cache boundaries, and cross-request prefix behavior."""

from __future__ import annotations

import math

import pytest

from cachesim import (CacheMode, CacheStore, Message, Role, StrategyMode,
                      TokenSeq, apply_strategy, breaker_token, commit,
                      expected_cacheable_prefix, flatten, lookup,
                      builtin_policy, synth_tokens)


def common_prefix_len(a: TokenSeq, b: TokenSeq) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


def make_conversation(turns: int, system_tokens: int = 40, seed: int = 5):
    msgs = [Message(Role.SYSTEM, synth_tokens(system_tokens, seed)),
            Message(Role.HUMAN, synth_tokens(12, seed + 1))]
    for k in range(1, turns + 1):
        msgs.append(Message(Role.AI, synth_tokens(8, seed + 10 * k), origin_turn=k))
        msgs.append(Message(Role.TOOL_RESULT, synth_tokens(20, seed + 10 * k + 1), origin_turn=k))
    return msgs


def test_requires_leading_system_message():
    msgs = [Message(Role.HUMAN, synth_tokens(5, 1))]
    with pytest.raises(ValueError):
        apply_strategy(msgs, StrategyMode.NO_CACHE, 1, 0, CacheMode.AUTOMATIC)


def test_rejects_second_system_message():
    msgs = make_conversation(0) + [Message(Role.SYSTEM, synth_tokens(3, 9))]
    with pytest.raises(ValueError):
        apply_strategy(msgs, StrategyMode.FULL_CONTEXT, 1, 0, CacheMode.AUTOMATIC)


def test_rejects_breakers_in_workload():
    msgs = make_conversation(0) + [Message(Role.BREAKER, synth_tokens(1, 3))]
    with pytest.raises(ValueError):
        apply_strategy(msgs, StrategyMode.FULL_CONTEXT, 1, 0, CacheMode.AUTOMATIC)


def test_no_cache_differs_at_token_index_one():
    msgs = make_conversation(1)
    a = flatten(apply_strategy(msgs, StrategyMode.NO_CACHE, 1, 7, CacheMode.AUTOMATIC))
    b = flatten(apply_strategy(msgs, StrategyMode.NO_CACHE, 2, 7, CacheMode.AUTOMATIC))
    assert a[0] == b[0]  # the breaker's framing token
    assert a[1] != b[1]  # the breaker itself
    assert common_prefix_len(a, b) == 1


def test_full_context_keeps_append_only_growth():
    msgs = make_conversation(3)
    shorter = flatten(apply_strategy(msgs[:4], StrategyMode.FULL_CONTEXT, 1, 7,
                                     CacheMode.AUTOMATIC))
    longer = flatten(apply_strategy(msgs, StrategyMode.FULL_CONTEXT, 2, 7,
                                    CacheMode.AUTOMATIC))
    assert common_prefix_len(shorter, longer) == len(shorter)


def test_system_prompt_mode_shares_only_the_system_prefix():
    system_tokens = 40
    msgs = make_conversation(2, system_tokens=system_tokens)
    a = flatten(apply_strategy(msgs[:4], StrategyMode.SYSTEM_PROMPT, 1, 7,
                               CacheMode.AUTOMATIC))
    b = flatten(apply_strategy(msgs, StrategyMode.SYSTEM_PROMPT, 2, 7,
                               CacheMode.AUTOMATIC))
    # shared: system framing token + system + the next breaker's framing token
    assert common_prefix_len(a, b) == system_tokens + 2


def test_exclude_tool_results_places_breakers_after_each_result():
    msgs = make_conversation(2)
    prompt = apply_strategy(msgs, StrategyMode.EXCLUDE_TOOL_RESULTS, 1, 7,
                            CacheMode.AUTOMATIC)
    roles = [m.role for m in prompt.messages]
    assert roles == [Role.SYSTEM, Role.BREAKER, Role.HUMAN,
                     Role.AI, Role.TOOL_RESULT, Role.BREAKER,
                     Role.AI, Role.TOOL_RESULT, Role.BREAKER]
    breakers = [m.tokens[0] for m in prompt.messages if m.role is Role.BREAKER]
    assert len(set(breakers)) == len(breakers)


def test_breaker_tokens_are_deterministic_and_request_fresh():
    assert breaker_token(5, 3, 1) == breaker_token(5, 3, 1)
    assert breaker_token(5, 3, 1) != breaker_token(5, 4, 1)
    assert breaker_token(5, 3, 1) != breaker_token(5, 3, 2)
    assert breaker_token(5, 3, 1) != breaker_token(6, 3, 1)


def test_breakpoints_for_breakpoint_mode_policies():
    msgs = make_conversation(2, system_tokens=40)
    full = apply_strategy(msgs, StrategyMode.FULL_CONTEXT, 1, 7,
                          CacheMode.EXPLICIT_BREAKPOINTS)
    assert full.breakpoints == (full.flat_length(),)
    spo = apply_strategy(msgs, StrategyMode.SYSTEM_PROMPT, 1, 7,
                         CacheMode.EXPLICIT_BREAKPOINTS)
    assert spo.breakpoints == (41,)
    etr = apply_strategy(msgs, StrategyMode.EXCLUDE_TOOL_RESULTS, 1, 7,
                         CacheMode.EXPLICIT_BREAKPOINTS)
    assert etr.breakpoints == (41,)
    none = apply_strategy(msgs, StrategyMode.NO_CACHE, 1, 7,
                          CacheMode.EXPLICIT_BREAKPOINTS)
    assert none.breakpoints == ()
    auto = apply_strategy(msgs, StrategyMode.SYSTEM_PROMPT, 1, 7, CacheMode.AUTOMATIC)
    assert auto.breakpoints == ()


def test_expected_cacheable_prefix_values():
    assert expected_cacheable_prefix(StrategyMode.NO_CACHE, 10_000) == 0
    assert expected_cacheable_prefix(StrategyMode.SYSTEM_PROMPT, 10_000) == 10_001
    assert expected_cacheable_prefix(StrategyMode.EXCLUDE_TOOL_RESULTS, 10_000) == 10_001
    assert expected_cacheable_prefix(StrategyMode.FULL_CONTEXT, 10_000) == math.inf


def test_expected_prefix_matches_simulated_lookups():
    """Three-turn session on the breakpoint policy: steady-state reads equal
    the helper's boundary exactly (granularity 1)."""
    policy = builtin_policy("claude-sonnet-4.5")
    system_tokens = 2000
    msgs = make_conversation(3, system_tokens=system_tokens, seed=21)
    store = CacheStore()
    reads = []
    for r, upto in enumerate((2, 4, 6, 8), start=1):
        prompt = apply_strategy(msgs[:upto], StrategyMode.EXCLUDE_TOOL_RESULTS,
                                r, 17, policy.mode)
        flat = flatten(prompt)
        reads.append(lookup(store, flat, float(r), policy).cached_tokens)
        commit(store, flat, prompt.breakpoints[-1], float(r), policy)
    expected = expected_cacheable_prefix(StrategyMode.EXCLUDE_TOOL_RESULTS, system_tokens)
    assert reads[0] == 0
    assert reads[1:] == [expected] * 3


def test_exclude_tool_results_reads_match_system_prompt_mode():
    """Under strict prefix matching the two selective modes read identically."""
    for policy in (builtin_policy("gpt-4o"), builtin_policy("claude-sonnet-4.5")):
        msgs = make_conversation(3, system_tokens=1500, seed=31)
        reads = {}
        for mode in (StrategyMode.SYSTEM_PROMPT, StrategyMode.EXCLUDE_TOOL_RESULTS):
            store = CacheStore()
            per_call = []
            for r, upto in enumerate((2, 4, 6, 8), start=1):
                prompt = apply_strategy(msgs[:upto], mode, r, 17, policy.mode)
                flat = flatten(prompt)
                per_call.append(lookup(store, flat, float(r), policy).cached_tokens)
                limit = (prompt.breakpoints[-1] if prompt.breakpoints
                         else len(flat)) if policy.mode is CacheMode.EXPLICIT_BREAKPOINTS else len(flat)
                commit(store, flat, limit, float(r), policy)
            reads[mode] = per_call
        assert reads[StrategyMode.SYSTEM_PROMPT] == reads[StrategyMode.EXCLUDE_TOOL_RESULTS]
