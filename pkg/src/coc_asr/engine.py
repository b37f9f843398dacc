"""Segment-by-segment correction sessions with a threshold gate.

For each segment the client proposes a correction.  The error rate between
the original hypothesis segment (as reference) and the proposal decides
acceptance; rejected proposals are replaced by the original text.  Whatever
is emitted becomes the assistant turn that later segments see.
"""
from __future__ import annotations

import json
import logging
import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Mapping, Optional, Protocol, Sequence

from coc_asr.align import MetricReport, categorized_report, error_rate
from coc_asr.chat import (
    DEFAULT_CONTEXT_LIMIT,
    DEFAULT_INSTRUCTION,
    Conversation,
    Guidance,
    Message,
    build_conversation,
    estimate_session_tokens,
)
from coc_asr.corpus import Document, SegmentPair, iter_jsonl, segmentize
from coc_asr.textproc import tokenize

log = logging.getLogger(__name__)


class TransportError(RuntimeError):
    """The backend could not produce a completion."""


class ContextOverflowError(RuntimeError):
    pass


class SessionError(RuntimeError):
    def __init__(self, doc_id: str, message: str, transcript: Optional[Conversation] = None,
                 decisions: Sequence["SegmentDecision"] = ()):
        super().__init__(f"document {doc_id!r}: {message}")
        self.doc_id = doc_id
        self.transcript = transcript
        self.decisions = tuple(decisions)


@dataclass(frozen=True)
class EngineConfig:
    threshold: float = 0.3
    max_retries: int = 0
    guidance: Guidance = Guidance.HYP
    context_limit_tokens: Optional[int] = DEFAULT_CONTEXT_LIMIT
    temperature: float = 0.0
    retry_temperature: float = 0.7
    strict_context: bool = False
    # "emitted": history holds what was emitted; "model": the raw proposal
    history: str = "emitted"
    instruction: str = DEFAULT_INSTRUCTION

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError(f"threshold must be > 0, got {self.threshold}")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.temperature < 0 or self.retry_temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.history not in ("emitted", "model"):
            raise ValueError(f"unknown history mode {self.history!r}")
        object.__setattr__(self, "guidance", Guidance(self.guidance))

    def snapshot(self) -> dict:
        d = asdict(self)
        d["guidance"] = self.guidance.value
        return d


@dataclass(frozen=True)
class CorrectionRequest:
    doc_id: str
    segment: SegmentPair
    attempt: int
    messages: tuple[Message, ...]
    temperature: float


class LlmClient(Protocol):
    def complete(self, request: CorrectionRequest) -> str: ...


@dataclass(frozen=True)
class SegmentDecision:
    index: int
    model_output: str
    gate_er: float
    accepted: bool
    retries_used: int
    emitted: str

    def to_json(self) -> dict:
        d = asdict(self)
        if math.isinf(self.gate_er):
            d["gate_er"] = None
        return d


@dataclass(frozen=True)
class SessionResult:
    doc_id: str
    decisions: tuple[SegmentDecision, ...]
    corrected_text: str
    correction_ratio: float
    transcript: Conversation

    @property
    def accepted_count(self) -> int:
        return sum(d.accepted for d in self.decisions)


# --- clients ----------------------------------------------------------------

class IdentityMock:
    """Returns the hypothesis segment unchanged."""

    def complete(self, request: CorrectionRequest) -> str:
        return request.segment.hyp_segment


class OracleMock:
    """Returns the reference segment."""

    def complete(self, request: CorrectionRequest) -> str:
        if request.segment.ref_segment is None:
            raise TransportError(f"{request.doc_id}: oracle needs a reference segment")
        return request.segment.ref_segment


class ReplayClient:
    """Serves outputs recorded as {doc_id, segment_index, attempt, output}."""

    def __init__(self, records: Iterable[Mapping]):
        self._outputs: dict[tuple[str, int, int], str] = {}
        for r in records:
            self._outputs[(r["doc_id"], int(r["segment_index"]), int(r["attempt"]))] = r["output"]

    @classmethod
    def load(cls, path) -> "ReplayClient":
        return cls(obj for _, obj in iter_jsonl(path))

    def complete(self, request: CorrectionRequest) -> str:
        key = (request.doc_id, request.segment.index, request.attempt)
        try:
            return self._outputs[key]
        except KeyError:
            raise TransportError(f"no recorded output for {key}") from None


class RecordingClient:
    """Wraps a client and keeps every output in replay format."""

    def __init__(self, inner: LlmClient):
        self.inner = inner
        self.records: list[dict] = []
        self._lock = threading.Lock()

    def complete(self, request: CorrectionRequest) -> str:
        out = self.inner.complete(request)
        with self._lock:
            self.records.append(
                dict(doc_id=request.doc_id, segment_index=request.segment.index,
                     attempt=request.attempt, output=out)
            )
        return out

    def sorted_records(self) -> list[dict]:
        return sorted(self.records, key=lambda r: (r["doc_id"], r["segment_index"], r["attempt"]))


class HttpClient:
    """OpenAI-style chat-completion endpoint.

    Sends ``{"model", "messages", "temperature"}`` and reads
    ``choices[0].message.content``.  The bearer token comes from ``api_key``
    or the environment variable named by ``api_key_env``.
    """

    def __init__(self, endpoint: str, model: str, api_key: Optional[str] = None,
                 api_key_env: str = "COC_ASR_API_KEY", timeout: float = 120.0,
                 transport_retries: int = 2, backoff: float = 1.0, session=None):
        import requests

        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(api_key_env)
        self.timeout = timeout
        self.transport_retries = transport_retries
        self.backoff = backoff
        self._session = session or requests.Session()
        self._exc = requests.RequestException

    def payload(self, request: CorrectionRequest) -> dict:
        return {
            "model": self.model,
            "messages": [{"role": m.role.value, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
        }

    def complete(self, request: CorrectionRequest) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = self.payload(request)
        last: Optional[Exception] = None
        for attempt in range(self.transport_retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self._session.post(self.endpoint, json=body, headers=headers, timeout=self.timeout)
                resp.raise_for_status()
                content = resp.json()["choices"][0]["message"]["content"]
                if not isinstance(content, str):
                    raise TypeError("message content is not a string")
                return content
            except (self._exc, KeyError, IndexError, TypeError, ValueError) as e:
                last = e
                log.warning("completion request failed (attempt %d): %s", attempt + 1, e)
        raise TransportError(f"endpoint {self.endpoint} failed: {last}")


# --- sessions ---------------------------------------------------------------

def gate_error_rate(hyp_segment: str, proposal: str) -> float:
    return error_rate(tokenize(hyp_segment), tokenize(proposal))


def run_session(doc: Document, segments: Sequence[SegmentPair], client: LlmClient,
                cfg: EngineConfig = EngineConfig(), pinyin_table=None) -> SessionResult:
    need = estimate_session_tokens(doc)
    if cfg.context_limit_tokens is not None and need > cfg.context_limit_tokens:
        msg = f"estimated {need} session tokens exceed limit {cfg.context_limit_tokens}"
        if cfg.strict_context:
            raise ContextOverflowError(f"document {doc.id!r}: {msg}")
        log.warning("document %r: %s; proceeding", doc.id, msg)

    try:
        conv = build_conversation(doc.hyp_text, segments, cfg.guidance, cfg.instruction, pinyin_table)
    except ValueError as e:
        raise SessionError(doc.id, f"malformed conversation: {e}") from e

    decisions: list[SegmentDecision] = []
    for k, seg in enumerate(segments):
        attempt = 0
        while True:
            temp = cfg.temperature if attempt == 0 else cfg.retry_temperature
            request = CorrectionRequest(doc.id, seg, attempt, conv.prefix(k), temp)
            try:
                output = client.complete(request)
            except TransportError as e:
                raise SessionError(doc.id, f"segment {k}: {e}", conv, decisions) from e
            gate = gate_error_rate(seg.hyp_segment, output)
            accepted = gate <= cfg.threshold
            if accepted or attempt >= cfg.max_retries:
                break
            attempt += 1
        emitted = output if accepted else seg.hyp_segment
        decisions.append(SegmentDecision(k, output, gate, accepted, attempt, emitted))
        conv = conv.with_assistant(k, emitted if cfg.history == "emitted" else output)

    corrected = "".join(d.emitted for d in decisions)
    ratio = sum(d.accepted for d in decisions) / len(decisions)
    return SessionResult(doc.id, tuple(decisions), corrected, ratio, conv)


def document_report(ref_text: str, hyp_text: str) -> MetricReport:
    return categorized_report(tokenize(ref_text), tokenize(hyp_text))


def corpus_report(pairs: Iterable[tuple[str, str]]) -> MetricReport:
    """Micro-averaged report over (ref, hyp) pairs."""
    total = MetricReport()
    for ref, hyp in pairs:
        total = total + document_report(ref, hyp)
    return total


@dataclass
class BatchResult:
    results: list[SessionResult]
    failures: dict[str, str] = field(default_factory=dict)
    report: Optional[MetricReport] = None
    baseline: Optional[MetricReport] = None

    @property
    def ok(self) -> bool:
        return not self.failures

    @property
    def correction_ratio(self) -> float:
        n = sum(len(r.decisions) for r in self.results)
        return sum(r.accepted_count for r in self.results) / n if n else 0.0


def run_batch(docs: Sequence[Document], client: LlmClient, cfg: EngineConfig = EngineConfig(),
              parallelism: int = 1, max_sentences: int = 5, seed: int = 0,
              pinyin_table=None) -> BatchResult:
    """Run independent sessions; one document's failure does not stop the rest."""

    def one(doc: Document):
        try:
            segs = segmentize(doc, max_sentences, seed)
            return run_session(doc, segs, client, cfg, pinyin_table)
        except Exception as e:  # recorded per document
            log.error("document %r failed: %s", doc.id, e)
            return e

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(one, docs))
    else:
        outcomes = [one(d) for d in docs]

    results, failures = [], {}
    ref_of = {}
    for doc, out in zip(docs, outcomes):
        if isinstance(out, Exception):
            failures[doc.id] = str(out)
        else:
            results.append(out)
            ref_of[doc.id] = doc
    batch = BatchResult(results, failures)
    scored = [r for r in results if ref_of[r.doc_id].ref_text is not None]
    if scored:
        batch.baseline = corpus_report((ref_of[r.doc_id].ref_text, ref_of[r.doc_id].hyp_text) for r in scored)
        batch.report = corpus_report(
            (ref_of[r.doc_id].ref_text, r.corrected_text) for r in scored
        ).with_baseline(batch.baseline)
    return batch


@dataclass(frozen=True)
class SweepPoint:
    threshold: float
    report: MetricReport
    correction_ratio: float
    accepted: frozenset  # {(doc_id, segment_index)}


def threshold_sweep(docs: Sequence[Document], client: LlmClient, thresholds: Sequence[float],
                    cfg: EngineConfig = EngineConfig(), max_sentences: int = 5,
                    seed: int = 0) -> list[SweepPoint]:
    points = []
    for t in thresholds:
        c = replace(cfg, threshold=t)
        batch = run_batch(docs, client, c, max_sentences=max_sentences, seed=seed)
        if batch.failures:
            raise SessionError(next(iter(batch.failures)), "sweep run failed: "
                               + "; ".join(batch.failures.values()))
        accepted = frozenset(
            (r.doc_id, d.index) for r in batch.results for d in r.decisions if d.accepted
        )
        points.append(SweepPoint(t, batch.report, batch.correction_ratio, accepted))
    return points


def sweep_csv_rows(points: Sequence[SweepPoint]) -> list[str]:
    rows = ["threshold,er_mandarin,err_mandarin,correction_ratio"]
    for p in points:
        er = p.report["mandarin"].er if p.report else math.nan
        e = p.report.err("mandarin") if p.report else None
        rows.append(f"{p.threshold:g},{100 * er:.4f},{'' if e is None else f'{100 * e:.4f}'},{p.correction_ratio:.4f}")
    return rows


def session_records(result: SessionResult) -> list[dict]:
    return [{"doc_id": result.doc_id, **d.to_json()} for d in result.decisions]


def dumps_result(result: SessionResult) -> str:
    return json.dumps({"id": result.doc_id, **result.transcript.to_wire()}, ensure_ascii=False)
