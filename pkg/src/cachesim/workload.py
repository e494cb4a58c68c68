"""Synthetic multi-turn agent sessions and transcript files.

A generated session is one research-agent conversation: a system prompt
shared by every session, a per-session unique question, ``tool_calls``
rounds of (assistant tool invocation, tool result), and a final answer.
Request ``r`` of a session sends every message up to and including the
previous turn's tool result, so consecutive requests grow append-only:
each request's flattened prompt is a strict token prefix of the next
one before any strategy is applied.

Transcripts can round-trip through a JSONL file (one message per line)
so recorded agent logs can be replayed instead of synthetic ones:

    {"session_id": "s000", "role": "system", "tokens": [...],
     "timestamp_s": 0.0}

``tokens`` carries explicit token ids; a ``token_count`` integer is
accepted instead, in which case ids are synthesized deterministically
from (session_id, line_number).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import TranscriptParseError, TranscriptValidationError
from .seeding import derive_seed
from .tokens import Message, Role, TokenSeq, synth_tokens


@dataclass(frozen=True)
class WorkloadSpec:
    """Shape of the synthetic sessions; token counts are calibration knobs."""

    system_prompt_tokens: int = 10_000
    question_tokens: int = 150
    tool_calls: int = 10
    tool_call_tokens: int = 200
    tool_result_tokens: int = 1_500
    reasoning_tokens_per_turn: int = 150
    final_answer_tokens: int = 1_000
    inter_call_gap_seconds: float = 5.0
    sessions: int = 40
    seed: int = 0

    def __post_init__(self) -> None:
        counts = {
            "system_prompt_tokens": self.system_prompt_tokens,
            "question_tokens": self.question_tokens,
            "tool_call_tokens": self.tool_call_tokens,
            "tool_result_tokens": self.tool_result_tokens,
            "reasoning_tokens_per_turn": self.reasoning_tokens_per_turn,
            "final_answer_tokens": self.final_answer_tokens,
        }
        for name, value in counts.items():
            if value < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")
        if self.tool_calls < 0:
            raise ValueError("tool_calls must be >= 0")
        if self.sessions < 1:
            raise ValueError("sessions must be >= 1")
        if self.inter_call_gap_seconds < 0:
            raise ValueError("inter_call_gap_seconds must be >= 0")

    def to_dict(self) -> dict:
        return {
            "system_prompt_tokens": self.system_prompt_tokens,
            "question_tokens": self.question_tokens,
            "tool_calls": self.tool_calls,
            "tool_call_tokens": self.tool_call_tokens,
            "tool_result_tokens": self.tool_result_tokens,
            "reasoning_tokens_per_turn": self.reasoning_tokens_per_turn,
            "final_answer_tokens": self.final_answer_tokens,
            "inter_call_gap_seconds": self.inter_call_gap_seconds,
            "sessions": self.sessions,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WorkloadSpec":
        return cls(**data)


@dataclass(frozen=True)
class SessionTranscript:
    """One session's ordered messages with per-message virtual timestamps.

    Message layout: system, question, then (assistant turn, tool result)
    pairs, then the final answer. ``session_seed`` feeds breaker
    derivation during replay and is excluded from equality so that
    transcripts survive a file round-trip unchanged.
    """

    session_id: str
    messages: tuple[Message, ...]
    timestamps: tuple[float, ...]
    session_seed: int = field(compare=False, default=0)

    def __post_init__(self) -> None:
        msgs = self.messages
        if len(msgs) < 3 or len(msgs) % 2 == 0:
            raise TranscriptValidationError(
                f"session {self.session_id}: expected system, question, "
                f"(turn, result) pairs and a final answer, got {len(msgs)} messages")
        if len(self.timestamps) != len(msgs):
            raise TranscriptValidationError(
                f"session {self.session_id}: one timestamp per message required")
        if msgs[0].role is not Role.SYSTEM or msgs[1].role is not Role.HUMAN:
            raise TranscriptValidationError(
                f"session {self.session_id}: must open with system then human")
        for i in range(2, len(msgs) - 1, 2):
            if msgs[i].role not in (Role.AI, Role.TOOL_CALL):
                raise TranscriptValidationError(
                    f"session {self.session_id}: message {i} must be an assistant turn")
            if msgs[i + 1].role is not Role.TOOL_RESULT:
                raise TranscriptValidationError(
                    f"session {self.session_id}: message {i + 1} must be a tool result")
        if msgs[-1].role is not Role.AI:
            raise TranscriptValidationError(
                f"session {self.session_id}: final message must be the assistant answer")
        previous = None
        for t in self.timestamps:
            if previous is not None and t < previous:
                raise TranscriptValidationError(
                    f"session {self.session_id}: timestamps must be non-decreasing")
            previous = t

    @property
    def num_requests(self) -> int:
        return (len(self.messages) - 1) // 2

    def request_messages(self, request_index: int) -> tuple[Message, ...]:
        """Input messages of the 1-based ``request_index``-th API call."""
        self._check_request(request_index)
        return self.messages[: 2 * request_index]

    def response_message(self, request_index: int) -> Message:
        """The assistant message produced by that call."""
        self._check_request(request_index)
        return self.messages[2 * request_index]

    def output_tokens(self, request_index: int) -> int:
        return len(self.response_message(request_index).tokens)

    def request_time(self, request_index: int) -> float:
        """Session-relative issue time: timestamp of the newest input message."""
        self._check_request(request_index)
        return self.timestamps[2 * request_index - 1]

    @property
    def duration_s(self) -> float:
        return self.timestamps[-1] - self.timestamps[0]

    def _check_request(self, request_index: int) -> None:
        if not 1 <= request_index <= self.num_requests:
            raise IndexError(
                f"request {request_index} out of range 1..{self.num_requests}")


def generate(spec: WorkloadSpec) -> list[SessionTranscript]:
    """Generate ``spec.sessions`` deterministic transcripts.

    Fully determined by the spec: the system prompt is shared across
    sessions, questions are unique per session, and each session yields
    ``tool_calls + 1`` API requests spaced ``inter_call_gap_seconds``
    apart.
    """
    system = synth_tokens(spec.system_prompt_tokens, derive_seed(spec.seed, "system"))
    gap = spec.inter_call_gap_seconds
    turn_tokens = spec.reasoning_tokens_per_turn + spec.tool_call_tokens

    transcripts = []
    for s in range(spec.sessions):
        session_seed = derive_seed(spec.seed, "session", s)
        messages: list[Message] = [
            Message(Role.SYSTEM, system, origin_turn=0),
            Message(Role.HUMAN,
                    synth_tokens(spec.question_tokens, derive_seed(session_seed, "question")),
                    origin_turn=0),
        ]
        times: list[float] = [0.0, 0.0]
        for k in range(1, spec.tool_calls + 1):
            messages.append(Message(
                Role.AI,
                synth_tokens(turn_tokens, derive_seed(session_seed, "assistant", k)),
                origin_turn=k))
            messages.append(Message(
                Role.TOOL_RESULT,
                synth_tokens(spec.tool_result_tokens, derive_seed(session_seed, "tool-result", k)),
                origin_turn=k))
            times.extend([k * gap, k * gap])
        messages.append(Message(
            Role.AI,
            synth_tokens(spec.final_answer_tokens, derive_seed(session_seed, "final")),
            origin_turn=spec.tool_calls + 1))
        times.append((spec.tool_calls + 1) * gap)
        transcripts.append(SessionTranscript(
            session_id=f"s{s:03d}",
            messages=tuple(messages),
            timestamps=tuple(times),
            session_seed=session_seed,
        ))
    return transcripts


_ROLE_BY_NAME = {role.value: role for role in Role}


def export_transcripts(transcripts: Sequence[SessionTranscript], path: str | Path) -> None:
    """Write transcripts as JSONL, one message per line, with explicit token ids."""
    with open(path, "w", encoding="utf-8") as fh:
        for tr in transcripts:
            for message, stamp in zip(tr.messages, tr.timestamps):
                fh.write(json.dumps({
                    "session_id": tr.session_id,
                    "role": message.role.value,
                    "tokens": message.tokens.to_list(),
                    "timestamp_s": stamp,
                }))
                fh.write("\n")


def ingest(path: str | Path) -> list[SessionTranscript]:
    """Read transcripts from a JSONL file written by :func:`export_transcripts`
    or assembled from real agent logs.

    Lines carrying only a ``token_count`` get deterministic synthetic
    ids derived from (session_id, line_number). Malformed lines raise
    :class:`TranscriptParseError` with their line number; sessions that
    violate the transcript invariants raise
    :class:`TranscriptValidationError`.
    """
    per_session: dict[str, list[tuple[Message, float]]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TranscriptParseError(line_number, f"invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise TranscriptParseError(line_number, "expected a JSON object")
            try:
                session_id = str(record["session_id"])
                role_name = record["role"]
                stamp = float(record["timestamp_s"])
            except KeyError as exc:
                raise TranscriptParseError(line_number, f"missing field {exc.args[0]!r}") from exc
            role = _ROLE_BY_NAME.get(role_name)
            if role is None:
                raise TranscriptParseError(line_number, f"unknown role {role_name!r}")
            if "tokens" in record:
                ids = record["tokens"]
                if not isinstance(ids, list) or not ids:
                    raise TranscriptParseError(line_number, "tokens must be a non-empty list")
                tokens = TokenSeq(ids)
            elif "token_count" in record:
                count = record["token_count"]
                if not isinstance(count, int) or count < 1:
                    raise TranscriptParseError(line_number, "token_count must be a positive integer")
                tokens = synth_tokens(count, derive_seed(0, "ingest", session_id, line_number))
            else:
                raise TranscriptParseError(line_number, "need either tokens or token_count")
            per_session.setdefault(session_id, []).append(
                (Message(role, tokens, origin_turn=0), stamp))

    transcripts = []
    for session_id, rows in per_session.items():
        stamps = [stamp for _, stamp in rows]
        for earlier, later in zip(stamps, stamps[1:]):
            if later < earlier:
                raise TranscriptValidationError(
                    f"session {session_id}: timestamps must be non-decreasing")
        base = stamps[0] if stamps else 0.0
        messages = tuple(
            Message(m.role, m.tokens, origin_turn=_origin_for(i))
            for i, (m, _) in enumerate(rows))
        transcripts.append(SessionTranscript(
            session_id=session_id,
            messages=messages,
            timestamps=tuple(stamp - base for stamp in stamps),
            session_seed=derive_seed(0, "transcript", session_id),
        ))

    questions = set()
    for tr in transcripts:
        key = tr.messages[1].tokens
        if key in questions:
            raise TranscriptValidationError(
                f"session {tr.session_id}: question duplicates another session's")
        questions.add(key)
    return transcripts


def _origin_for(position: int) -> int:
    """Turn index for a message at ``position`` in the canonical layout."""
    if position < 2:
        return 0
    return position // 2
