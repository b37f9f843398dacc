import json

import pytest
from hypothesis import given, strategies as st

from coc_asr.chat import (
    DEFAULT_INSTRUCTION,
    SEPARATOR,
    Conversation,
    ConversationError,
    Guidance,
    Message,
    Role,
    build_conversation,
    check_budget,
    estimate_session_tokens,
    estimate_tokens,
    training_conversation,
)
from coc_asr.corpus import Document, SegmentPair
from coc_asr.textproc import to_pinyin


def segs(*texts, refs=None):
    refs = refs or [None] * len(texts)
    return [SegmentPair(i, t, r, 1) for i, (t, r) in enumerate(zip(texts, refs))]


def test_one_segment():
    conv = build_conversation("你好。", segs("你好。"))
    assert len(conv.messages) == 2
    assert conv.messages[0].content == SEPARATOR.join((DEFAULT_INSTRUCTION, "你好。", "你好。"))
    assert conv.messages[1] == Message(Role.ASSISTANT, "")


def test_three_segments_alternate():
    conv = build_conversation("一。二。三。", segs("一。", "二。", "三。"))
    assert [m.role for m in conv.messages] == [Role.USER, Role.ASSISTANT] * 3
    assert [m.content for m in conv.messages[2::2]] == ["二。", "三。"]
    assert conv.n_segments == 3


def test_pinyin_guidance():
    conv = build_conversation("你好。", segs("你好。"), guidance=Guidance.PINYIN)
    first = conv.messages[0].content
    assert first.endswith(SEPARATOR + "ni3 hao3 。")
    assert to_pinyin("你好。") == "ni3 hao3 。"
    # context stays in characters
    assert SEPARATOR + "你好。" + SEPARATOR in first
    conv = build_conversation("你好。再见。", segs("你好。", "再见。"), guidance="pinyin")
    assert conv.messages[2].content == "zai4 jian4 。"


def test_pinyin_second_turn():
    conv = build_conversation("甲。你好。", segs("甲。", "你好。"), guidance=Guidance.PINYIN)
    assert conv.messages[2].content == "ni3 hao3 。"


def test_errors():
    with pytest.raises(ConversationError):
        build_conversation("x", [])
    with pytest.raises(ConversationError):
        build_conversation("abc", segs("ab"))


def test_custom_instruction():
    conv = build_conversation("a", segs("a"), instruction="Fix it.")
    assert conv.messages[0].content == "Fix it.\n\na\n\na"


def test_training_conversation_fills_references():
    conv = training_conversation("一。二。", segs("一。", "二。", refs=["壹。", "贰。"]))
    assert [m.content for m in conv.messages[1::2]] == ["壹。", "贰。"]
    with pytest.raises(ConversationError):
        training_conversation("一。", segs("一。"))


def test_prefix_and_fill():
    conv = build_conversation("一。二。", segs("一。", "二。"))
    assert len(conv.prefix(0)) == 1
    assert len(conv.prefix(1)) == 3
    conv = conv.with_assistant(0, "壹。")
    assert conv.prefix(1)[1].content == "壹。"
    with pytest.raises(IndexError):
        conv.prefix(2)


def test_validation_rejects_bad_wire():
    with pytest.raises(ConversationError):
        Conversation.from_wire({"messages": []})
    with pytest.raises(ConversationError):
        Conversation.from_wire({"messages": [{"role": "assistant", "content": "x"}]})
    with pytest.raises(ConversationError):
        Conversation.from_wire({"messages": [{"role": "user", "content": ""}]})
    with pytest.raises(ConversationError):
        Conversation.from_wire({"messages": [{"role": "system", "content": "x"}]})
    with pytest.raises(ConversationError):
        Conversation.from_wire({"msgs": []})


def test_wire_field_names():
    conv = build_conversation("你好。", segs("你好。")).with_assistant(0, "你好。")
    wire = json.loads(conv.dumps())
    assert wire == {"messages": [{"role": "user", "content": conv.messages[0].content},
                                 {"role": "assistant", "content": "你好。"}]}


segment_lists = st.lists(st.text(min_size=1, max_size=15).filter(str.strip), min_size=1, max_size=6)


@given(segment_lists, st.sampled_from(list(Guidance)))
def test_wire_round_trip(texts, guidance):
    conv = build_conversation("".join(texts), segs(*texts), guidance=guidance)
    for k, t in enumerate(texts):
        conv = conv.with_assistant(k, t[::-1])
    assert Conversation.loads(conv.dumps()) == conv


@given(segment_lists)
def test_conversation_invariants(texts):
    full = "".join(texts)
    conv = training_conversation(full, segs(*texts, refs=texts))
    assert len(conv.messages) == 2 * len(texts) == 2 * conv.n_segments
    assert conv.messages[0].role is Role.USER
    assert conv.messages[0].content.startswith(DEFAULT_INSTRUCTION + SEPARATOR + full)


# --- token budget -----------------------------------------------------------

def test_estimate_tokens_values():
    assert estimate_tokens("") == 0
    assert estimate_tokens("字" * 6000) == 4020
    assert estimate_tokens("a") == 1


def test_session_estimates():
    assert estimate_session_tokens(Document("e", "")) == 0
    longest = estimate_session_tokens(Document("l", "字" * 80_697))
    assert longest == 3 * 54_067 == 162_201
    assert estimate_session_tokens("字" * 23_984) == 48_210
    assert check_budget("字" * 80_697)
    assert not check_budget("字" * 200_000)
    assert check_budget("字" * 200_000, limit=None)


@given(st.integers(0, 100_000), st.integers(0, 1000))
def test_estimate_monotone(n, extra):
    assert estimate_tokens("x" * n) <= estimate_tokens("x" * (n + extra))
