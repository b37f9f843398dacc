"""Corpus I/O, alignment-based segmentation, synthetic ASR noise and
training-chat export."""
from __future__ import annotations

import bisect
import hashlib
import json
import random
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence, Union

from coc_asr.align import align, project_boundary
from coc_asr.chat import DEFAULT_INSTRUCTION, Guidance, training_conversation
from coc_asr.textproc import Category, split_sentences, tokenize

PathLike = Union[str, Path]


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Document:
    id: str
    hyp_text: str
    ref_text: Optional[str] = None
    # pre-segmented hypothesis (e.g. VAD chunks); must concatenate to hyp_text
    segments: Optional[tuple[str, ...]] = None

    def to_json(self) -> dict:
        obj: dict = {"id": self.id, "hyp": self.hyp_text}
        if self.ref_text is not None:
            obj["ref"] = self.ref_text
        if self.segments is not None:
            obj["segments"] = list(self.segments)
        return obj


@dataclass(frozen=True)
class SegmentPair:
    index: int
    hyp_segment: str
    ref_segment: Optional[str]
    sentence_count: int


def _parse_document(obj, lineno: int) -> Document:
    if not isinstance(obj, dict):
        raise CorpusError(f"line {lineno}: expected a JSON object")
    for key in ("id", "hyp"):
        if not isinstance(obj.get(key), str):
            raise CorpusError(f"line {lineno}: missing or non-string field {key!r}")
    ref = obj.get("ref")
    if ref is not None and not isinstance(ref, str):
        raise CorpusError(f"line {lineno}: field 'ref' must be a string")
    if not obj["hyp"]:
        raise CorpusError(f"line {lineno}: empty 'hyp'")
    segments = obj.get("segments")
    if segments is not None:
        if not isinstance(segments, list) or not all(isinstance(s, str) for s in segments):
            raise CorpusError(f"line {lineno}: 'segments' must be a list of strings")
        if "".join(segments) != obj["hyp"]:
            raise CorpusError(f"line {lineno}: 'segments' do not concatenate to 'hyp'")
        segments = tuple(segments)
    return Document(obj["id"], obj["hyp"], ref, segments)


def iter_jsonl(path: PathLike) -> Iterator[tuple[int, object]]:
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusError(f"{path}: line {lineno}: invalid JSON: {e}") from e


def load_corpus(path: PathLike) -> list[Document]:
    docs: list[Document] = []
    seen: set[str] = set()
    for lineno, obj in iter_jsonl(path):
        try:
            doc = _parse_document(obj, lineno)
        except CorpusError as e:
            raise CorpusError(f"{path}: {e}") from None
        if doc.id in seen:
            raise CorpusError(f"{path}: line {lineno}: duplicate document id {doc.id!r}")
        seen.add(doc.id)
        docs.append(doc)
    return docs


def write_jsonl(path: PathLike, objs: Iterable[dict]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for obj in objs:
            f.write(json.dumps(obj, ensure_ascii=False))
            f.write("\n")
            n += 1
    return n


def write_corpus(path: PathLike, docs: Iterable[Document]) -> int:
    return write_jsonl(path, (d.to_json() for d in docs))


def derive_seed(seed: int, doc_id: str) -> int:
    """Stable per-document seed (independent of document order and PYTHONHASHSEED)."""
    h = hashlib.sha256(f"{seed}\x00{doc_id}".encode("utf-8")).digest()
    return int.from_bytes(h[:8], "big")


# --- segmentation -----------------------------------------------------------

def _hyp_groups(doc: Document, max_sentences: int, seed: int) -> list[tuple[str, int]]:
    if doc.segments is not None:
        return [(s, max(1, len(split_sentences(s)))) for s in doc.segments]
    sents = [s.text for s in split_sentences(doc.hyp_text)]
    # a whitespace-only tail rides with the last real sentence
    if len(sents) > 1 and not sents[-1].strip():
        tail = sents.pop()
        sents[-1] += tail
    rng = random.Random(derive_seed(seed, doc.id))
    groups = []
    pos = 0
    while pos < len(sents):
        k = rng.randint(1, max_sentences)
        chunk = sents[pos : pos + k]
        groups.append(("".join(chunk), len(chunk)))
        pos += k
    return groups


def segmentize(
    doc: Document, max_sentences: int = 5, seed: int = 0, with_ref: bool = True
) -> list[SegmentPair]:
    """Split a document into runs of 1..max_sentences hypothesis sentences.

    Reference cut points come from aligning reference and hypothesis tokens
    and projecting each hypothesis cut through the alignment.
    """
    if not doc.hyp_text:
        raise CorpusError(f"document {doc.id!r}: empty hypothesis")
    if max_sentences < 1:
        raise ValueError("max_sentences must be >= 1")
    groups = _hyp_groups(doc, max_sentences, seed)

    hyp_cuts = []
    pos = 0
    for text, _ in groups:
        pos += len(text)
        hyp_cuts.append(pos)

    ref_cuts: Optional[list[int]] = None
    if with_ref and doc.ref_text is not None:
        ref_text = doc.ref_text
        ref_toks = tokenize(ref_text)
        hyp_toks = tokenize(doc.hyp_text)
        alignment = align(ref_toks, hyp_toks)
        hyp_offsets = [t.char_offset for t in hyp_toks]
        ref_cuts = []
        for c in hyp_cuts[:-1]:
            hb = bisect.bisect_left(hyp_offsets, c)
            r = project_boundary(alignment, hb)
            ref_cuts.append(ref_toks[r].char_offset if r < len(ref_toks) else len(ref_text))
        ref_cuts.append(len(ref_text))

    pairs = []
    h0 = r0 = 0
    for k, (text, count) in enumerate(groups):
        ref_seg = None
        if ref_cuts is not None:
            ref_seg = doc.ref_text[r0 : ref_cuts[k]]
            r0 = ref_cuts[k]
        pairs.append(SegmentPair(k, doc.hyp_text[h0 : hyp_cuts[k]], ref_seg, count))
        h0 = hyp_cuts[k]
    return pairs


# --- noise injection --------------------------------------------------------

MANDARIN_POOL = (
    "的一是在不了有和人这中大为上个国我以要他时来用们生到作地于出就分对成会可主发年动"
    "同工也能下过子说产种面而方后多定行学法所民得经十三之进着等部度家电力里如水化高自"
    "二理起小物现实加量都两体制机当使点从业本去把性好应开它合还因由其些然前外天政四日"
)
ENGLISH_POOL = (
    "the", "and", "AI", "GPT", "model", "data", "Apple", "Google", "app", "iPhone",
    "OK", "video", "online", "team", "project", "cloud", "Python", "server", "NBA", "CEO",
)
PUNCT_POOL = "，。、？！：；"
FILLER = "呃"
DIGIT_WORDS = "零一二三四五六七八九"
_SYMBOL_WORDS = {".": "点", ":": "比", "%": "百分之", ",": ""}


def verbalize_number(span: str) -> str:
    """Digit-by-digit spoken form: "2024" -> "二零二四", "3.5" -> "三点五"."""
    out = []
    for ch in span:
        if ch.isdecimal():
            out.append(DIGIT_WORDS[int(ch)])
        else:
            out.append(_SYMBOL_WORDS.get(ch, ch))
    return "".join(out)


@dataclass(frozen=True)
class NoiseProfile:
    sub_rate: float = 0.0
    del_rate: float = 0.0
    ins_rate: float = 0.0
    punct_drop_rate: float = 0.0
    number_verbalize_rate: float = 0.0
    lowercase_english: bool = False
    filler_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for f in fields(self):
            if f.name.endswith("_rate"):
                v = getattr(self, f.name)
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"{f.name}={v} is not a probability")

    @classmethod
    def parse(cls, spec: str, seed: int = 0) -> "NoiseProfile":
        """Build from a preset name or ``key=value,key=value`` overrides."""
        spec = spec.strip()
        if spec in PRESETS:
            return replace(PRESETS[spec], seed=seed)
        kwargs: dict = {}
        names = {f.name: f.type for f in fields(cls)}
        for part in filter(None, (p.strip() for p in spec.split(","))):
            key, sep, value = part.partition("=")
            key = key.strip()
            if not sep or key not in names:
                raise ValueError(f"bad noise profile entry {part!r}")
            if key == "lowercase_english":
                kwargs[key] = value.strip().lower() in ("1", "true", "yes")
            elif key == "seed":
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        kwargs.setdefault("seed", seed)
        return cls(**kwargs)


PRESETS = {
    "identity": NoiseProfile(),
    "default": NoiseProfile(
        sub_rate=0.05,
        del_rate=0.01,
        ins_rate=0.01,
        punct_drop_rate=0.5,
        number_verbalize_rate=0.5,
        lowercase_english=True,
        filler_rate=0.01,
    ),
}


@dataclass
class NoiseResult:
    text: str
    edits: int
    counts: dict = field(default_factory=dict)


def _substitute(surface: str, category: Category, u: float) -> str:
    if category is Category.ITN:
        digits = "".join(c for c in surface if c.isdecimal())
        r = random.Random(u)
        alt = "".join(str(r.randrange(10)) for _ in digits)
        if alt == digits:
            alt = alt[:-1] + str((int(alt[-1]) + 1) % 10)
        return alt
    pool: Sequence[str]
    if category is Category.CS_ENGLISH:
        pool = ENGLISH_POOL
    elif category is Category.PUNCTUATION:
        pool = PUNCT_POOL
    else:
        pool = MANDARIN_POOL
    choices = [p for p in pool if p != surface]
    return choices[int(u * len(choices))]


def _would_merge(tail: str, piece: str) -> bool:
    return len(tokenize(tail + piece)) != len(tokenize(tail)) + len(tokenize(piece))


def inject_noise_counted(clean: str, profile: NoiseProfile) -> NoiseResult:
    """Corrupt ``clean`` and report how many token edits were injected.

    Every token consumes the same number of random draws whatever happens to
    it, so profiles that differ only in one rate see identical streams.
    """
    rng = random.Random(profile.seed)
    tokens = tokenize(clean)
    counts = dict(sub=0, dele=0, ins=0, punct_drop=0, verbalize=0, lowercase=0, filler=0)
    out: list[str] = []
    tail = ""
    prev_end = 0

    def emit(ws: str, piece: str) -> None:
        nonlocal tail
        if not piece:
            return
        if not ws and tail and _would_merge(tail, piece):
            ws = " "
        out.append(ws)
        out.append(piece)
        tail = (tail + ws + piece)[-16:]

    for tok in tokens:
        ws = clean[prev_end : tok.char_offset]
        prev_end = tok.end
        u_drop, u_del, u_sub, u_pick, u_verb, u_ins, u_ins_pick, u_fill = (rng.random() for _ in range(8))
        cat = tok.category

        if cat is Category.PUNCTUATION and u_drop < profile.punct_drop_rate:
            counts["punct_drop"] += 1
        elif u_del < profile.del_rate:
            counts["dele"] += 1
        else:
            piece = tok.surface
            if u_sub < profile.sub_rate:
                piece = _substitute(piece, cat, u_pick)
                counts["sub"] += 1
            elif cat is Category.ITN and u_verb < profile.number_verbalize_rate:
                piece = verbalize_number(piece)
                counts["verbalize"] += len(tokenize(piece))
            if cat is Category.CS_ENGLISH and profile.lowercase_english:
                lowered = piece.lower()
                if lowered != piece and piece == tok.surface:
                    counts["lowercase"] += 1
                piece = lowered
            emit(ws, piece)
        if u_ins < profile.ins_rate:
            emit("", MANDARIN_POOL[int(u_ins_pick * len(MANDARIN_POOL))])
            counts["ins"] += 1
        if u_fill < profile.filler_rate:
            emit("", FILLER)
            counts["filler"] += 1

    out.append(clean[prev_end:])
    return NoiseResult("".join(out), sum(counts.values()), counts)


def inject_noise(clean: str, profile: NoiseProfile) -> str:
    return inject_noise_counted(clean, profile).text


# --- synthetic clean text ---------------------------------------------------

_CLAUSES = (
    "今天的会议讨论了新的发展计划", "我们需要进一步提高工作效率", "这个问题引起了大家的关注",
    "专家认为市场前景依然广阔", "公司发布了最新的产品", "城市交通状况有所改善",
    "学生们在操场上进行体育锻炼", "研究团队取得了重要进展", "天气预报说明天会下雨",
    "他在报告中提到了几个关键数据", "她对这个结果感到非常满意", "政府出台了相关支持政策",
    "用户可以在手机上完成操作", "这项技术已经广泛应用", "记者在现场进行了采访",
    "经济增长速度保持稳定", "图书馆新增了一批图书", "医生建议大家注意休息",
    "比赛吸引了众多观众", "工程预计年底完工", "孩子们对科学很感兴趣",
    "会议决定成立专门小组", "该地区的旅游业发展迅速", "这部电影获得了好评",
)
_NUMBERS = ("2024", "2025", "45.17", "12:30", "100", "3.5", "60", "1998", "7", "365")
_TERMINALS = "。。。。？！"


def synthetic_text(rng: random.Random, n_sentences: int) -> str:
    sents = []
    for _ in range(n_sentences):
        clauses = []
        for _ in range(rng.randint(1, 3)):
            c = rng.choice(_CLAUSES)
            r = rng.random()
            if r < 0.25:
                c = f"{rng.choice(ENGLISH_POOL)}{c}"
            elif r < 0.45:
                c = f"{c}{rng.choice(_NUMBERS)}个"
            clauses.append(c)
        sents.append("，".join(clauses) + rng.choice(_TERMINALS))
    return "".join(sents)


def synthetic_corpus(
    n_docs: int,
    profile: NoiseProfile,
    seed: int = 0,
    min_sentences: int = 1,
    max_sentences: int = 20,
) -> list[Document]:
    """Clean synthetic articles with noisy hypotheses (ref = clean text)."""
    rng = random.Random(seed)
    docs = []
    for k in range(n_docs):
        doc_id = f"syn-{seed}-{k:05d}"
        clean = synthetic_text(rng, rng.randint(min_sentences, max_sentences))
        docs.append(noisy_document(doc_id, clean, profile))
    return docs


def noisy_document(doc_id: str, clean: str, profile: NoiseProfile) -> Document:
    p = replace(profile, seed=derive_seed(profile.seed, doc_id))
    hyp = inject_noise(clean, p)
    if not hyp.strip():
        # everything dropped; keep the document usable
        hyp = clean
    return Document(doc_id, hyp, clean)


# --- training export --------------------------------------------------------

def export_training_chats(
    docs: Iterable[Document],
    path: PathLike,
    max_sentences: int = 5,
    seed: int = 0,
    guidance: Guidance = Guidance.HYP,
    instruction: str = DEFAULT_INSTRUCTION,
) -> int:
    def chats():
        for doc in docs:
            if doc.ref_text is None:
                raise CorpusError(f"document {doc.id!r} has no reference")
            segs = segmentize(doc, max_sentences, seed)
            yield training_conversation(doc.hyp_text, segs, guidance, instruction).to_wire()

    return write_jsonl(path, chats())
