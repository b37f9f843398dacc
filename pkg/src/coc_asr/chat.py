"""Multi-turn correction conversations and token budgeting.

Layout of a K-segment conversation (2K messages)::

    user       instruction \\n\\n full hypothesis \\n\\n guidance(segment 0)
    assistant  corrected segment 0
    user       guidance(segment 1)
    assistant  corrected segment 1
    ...
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from coc_asr.textproc import to_pinyin

SEPARATOR = "\n\n"

DEFAULT_INSTRUCTION = (
    "下面是一篇语音识别（ASR）得到的全文，其中可能存在识别错误、标点缺失或错误、"
    "数字等未转换为书面形式的问题。请先通读全文，然后我会逐段给出识别结果，"
    "请对每一段进行纠错：修正错误的字词，补全或修正标点，将口语形式的数字、日期等"
    "转换为书面形式，并保持原有语序和意思。每次只输出纠正后的该段文本，不要输出任何解释。"
)

DEFAULT_CONTEXT_LIMIT = 256_000


class Role(str, enum.Enum):
    USER = "user"
    ASSISTANT = "assistant"


class Guidance(str, enum.Enum):
    HYP = "hyp"
    PINYIN = "pinyin"


@dataclass(frozen=True)
class Message:
    role: Role
    content: str


class ConversationError(ValueError):
    pass


@dataclass(frozen=True)
class Conversation:
    messages: tuple[Message, ...]

    def __post_init__(self):
        validate_messages(self.messages)

    @property
    def n_segments(self) -> int:
        return (len(self.messages) + 1) // 2

    @property
    def complete(self) -> bool:
        return len(self.messages) % 2 == 0

    def prefix(self, segment_index: int) -> tuple[Message, ...]:
        """Messages up to and including the user turn for ``segment_index``."""
        if not 0 <= segment_index < self.n_segments:
            raise IndexError(segment_index)
        return self.messages[: 2 * segment_index + 1]

    def with_assistant(self, segment_index: int, content: str) -> "Conversation":
        pos = 2 * segment_index + 1
        if pos > len(self.messages):
            raise IndexError(segment_index)
        msgs = list(self.messages)
        msg = Message(Role.ASSISTANT, content)
        if pos == len(msgs):
            msgs.append(msg)
        else:
            msgs[pos] = msg
        return Conversation(tuple(msgs))

    def to_wire(self) -> dict:
        return {"messages": [{"role": m.role.value, "content": m.content} for m in self.messages]}

    def dumps(self) -> str:
        return json.dumps(self.to_wire(), ensure_ascii=False)

    @classmethod
    def from_wire(cls, obj: Mapping) -> "Conversation":
        try:
            raw = obj["messages"]
            msgs = tuple(Message(Role(m["role"]), m["content"]) for m in raw)
        except (KeyError, TypeError, ValueError) as e:
            raise ConversationError(f"malformed conversation: {e}") from e
        for m in msgs:
            if not isinstance(m.content, str):
                raise ConversationError("message content must be a string")
        return cls(msgs)

    @classmethod
    def loads(cls, line: str) -> "Conversation":
        return cls.from_wire(json.loads(line))


def validate_messages(messages: Sequence[Message]) -> None:
    # Assistant turns may be empty (a segment corrected to nothing); user turns may not.
    if not messages:
        raise ConversationError("conversation has no messages")
    for pos, m in enumerate(messages):
        expected = Role.USER if pos % 2 == 0 else Role.ASSISTANT
        if m.role is not expected:
            raise ConversationError(f"message {pos}: expected role {expected.value}, got {m.role.value}")
        if expected is Role.USER and not m.content:
            raise ConversationError(f"message {pos}: empty user content")


def guidance_text(hyp_segment: str, guidance: Guidance, pinyin_table=None) -> str:
    if Guidance(guidance) is Guidance.PINYIN:
        return to_pinyin(hyp_segment, pinyin_table)
    return hyp_segment


def build_conversation(
    full_hyp: str,
    segments: Sequence,
    guidance: Guidance = Guidance.HYP,
    instruction: str = DEFAULT_INSTRUCTION,
    pinyin_table=None,
) -> Conversation:
    """Inference prefix: user turns for every segment, assistant slots empty."""
    if not segments:
        raise ConversationError("no segments")
    joined = "".join(s.hyp_segment for s in segments)
    if joined != full_hyp:
        raise ConversationError("hypothesis segments do not concatenate to the full text")
    msgs = []
    for k, seg in enumerate(segments):
        g = guidance_text(seg.hyp_segment, guidance, pinyin_table)
        if k == 0:
            g = SEPARATOR.join((instruction, full_hyp, g))
        msgs.append(Message(Role.USER, g))
        msgs.append(Message(Role.ASSISTANT, ""))
    return Conversation(tuple(msgs))


def training_conversation(
    full_hyp: str,
    segments: Sequence,
    guidance: Guidance = Guidance.HYP,
    instruction: str = DEFAULT_INSTRUCTION,
    pinyin_table=None,
) -> Conversation:
    conv = build_conversation(full_hyp, segments, guidance, instruction, pinyin_table)
    for k, seg in enumerate(segments):
        if seg.ref_segment is None:
            raise ConversationError(f"segment {k} has no reference")
        conv = conv.with_assistant(k, seg.ref_segment)
    return conv


def estimate_tokens(text: str) -> int:
    """Rough token count: ceil(0.67 * characters).

    Calibrated on Chinese-dominant text where ~6k characters tokenize to ~4k
    tokens; not exact for any particular tokenizer.
    """
    return (67 * len(text) + 99) // 100


def estimate_session_tokens(doc_or_text) -> int:
    """Whole-session budget: the article appears as context, as guidance and
    as the corrected output, so roughly three times the article."""
    text = doc_or_text if isinstance(doc_or_text, str) else doc_or_text.hyp_text
    return 3 * estimate_tokens(text)


def check_budget(doc_or_text, limit: Optional[int] = DEFAULT_CONTEXT_LIMIT) -> bool:
    return limit is None or estimate_session_tokens(doc_or_text) <= limit
