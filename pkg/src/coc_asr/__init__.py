"""Segment-by-segment LLM correction of full-text ASR transcripts."""

__version__ = "0.1.0"

from coc_asr.textproc import Category, Sentence, Token, split_sentences, to_pinyin, tokenize  # noqa: E402
from coc_asr.align import (  # noqa: E402
    Alignment,
    MetricReport,
    categorized_report,
    err,
    error_rate,
    project_boundary,
)
from coc_asr.chat import Conversation, Guidance, build_conversation, estimate_session_tokens, estimate_tokens  # noqa: E402
from coc_asr.corpus import Document, NoiseProfile, SegmentPair, inject_noise, load_corpus, segmentize  # noqa: E402
from coc_asr.engine import EngineConfig, SessionResult, run_batch, run_session  # noqa: E402
