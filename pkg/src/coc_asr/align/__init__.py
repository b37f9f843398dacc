"""Minimal-edit alignment, error rates and segment-boundary projection.

The DP runs in a compiled kernel when one was built, otherwise in the
pure-Python fallback.  Set ``COC_ASR_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import enum
import math
import os
from array import array
from dataclasses import dataclass, field
from typing import Optional, Sequence

from coc_asr.align import _pykernel
from coc_asr.textproc import Category, Token

if os.environ.get("COC_ASR_PURE_PYTHON"):
    _kernel = _pykernel
    KERNEL = "python"
else:
    try:
        from coc_asr.align import _kernel  # type: ignore[attr-defined]

        KERNEL = "cython"
    except ImportError:
        _kernel = _pykernel
        KERNEL = "python"

__all__ = [
    "KERNEL",
    "OpKind",
    "EditOp",
    "Alignment",
    "CategoryStats",
    "MetricReport",
    "align",
    "align_sequences",
    "edit_distance",
    "error_rate",
    "categorized_report",
    "err",
    "project_boundary",
]


class OpKind(enum.IntEnum):
    MATCH = _pykernel.MATCH
    SUBSTITUTE = _pykernel.SUB
    DELETE = _pykernel.DEL
    INSERT = _pykernel.INS


@dataclass(frozen=True)
class EditOp:
    kind: OpKind
    ref_index: Optional[int]
    hyp_index: Optional[int]


@dataclass(frozen=True)
class Alignment:
    ops: tuple[EditOp, ...]
    s_count: int
    d_count: int
    i_count: int
    match_count: int

    @property
    def distance(self) -> int:
        return self.s_count + self.d_count + self.i_count

    @property
    def ref_len(self) -> int:
        return self.s_count + self.d_count + self.match_count

    @property
    def hyp_len(self) -> int:
        return self.s_count + self.i_count + self.match_count


def _encode(ref: Sequence, hyp: Sequence, key) -> tuple[array, array]:
    vocab: dict = {}
    a = array("i", [vocab.setdefault(key(x), len(vocab)) for x in ref])
    b = array("i", [vocab.setdefault(key(x), len(vocab)) for x in hyp])
    return a, b


def _surface(t):
    return t.surface if isinstance(t, Token) else t


def align_sequences(ref: Sequence, hyp: Sequence, kernel=None) -> Alignment:
    """Align two sequences of hashable items (or Tokens, compared by surface)."""
    k = kernel or _kernel
    a, b = _encode(ref, hyp, _surface)
    codes = k.backtrace(a, b)
    ops = []
    counts = [0, 0, 0, 0]
    i = j = 0
    for code in codes:
        counts[code] += 1
        if code == OpKind.DELETE:
            ops.append(EditOp(OpKind.DELETE, i, None))
            i += 1
        elif code == OpKind.INSERT:
            ops.append(EditOp(OpKind.INSERT, None, j))
            j += 1
        else:
            ops.append(EditOp(OpKind(code), i, j))
            i += 1
            j += 1
    return Alignment(
        ops=tuple(ops),
        s_count=counts[OpKind.SUBSTITUTE],
        d_count=counts[OpKind.DELETE],
        i_count=counts[OpKind.INSERT],
        match_count=counts[OpKind.MATCH],
    )


def align(ref: Sequence[Token], hyp: Sequence[Token]) -> Alignment:
    return align_sequences(ref, hyp)


def edit_distance(ref: Sequence, hyp: Sequence, kernel=None) -> int:
    k = kernel or _kernel
    a, b = _encode(ref, hyp, _surface)
    return k.distance(a, b)


def error_rate(ref: Sequence[Token], hyp: Sequence[Token]) -> float:
    """(S + D + I) / len(ref).

    An empty reference gives 0.0 against an empty hypothesis and ``math.inf``
    otherwise.
    """
    if not ref:
        return 0.0 if not hyp else math.inf
    return edit_distance(ref, hyp) / len(ref)


def err(er_corrected: float, er_baseline: float) -> float:
    """Relative change of an error rate against its baseline; negative is better."""
    if not er_baseline > 0:
        raise ValueError(f"ERR undefined for baseline error rate {er_baseline!r}")
    return (er_corrected - er_baseline) / er_baseline


@dataclass
class CategoryStats:
    n_ref: int = 0
    s: int = 0
    d: int = 0
    i: int = 0

    @property
    def errors(self) -> int:
        return self.s + self.d + self.i

    @property
    def er(self) -> float:
        if self.n_ref == 0:
            return 0.0 if self.errors == 0 else math.inf
        return self.errors / self.n_ref

    def __add__(self, other: "CategoryStats") -> "CategoryStats":
        return CategoryStats(
            self.n_ref + other.n_ref, self.s + other.s, self.d + other.d, self.i + other.i
        )


REPORT_KEYS = ("mandarin", "punctuation", "itn", "cs_english", "overall")
_CATEGORY_KEY = {
    Category.MANDARIN: "mandarin",
    Category.PUNCTUATION: "punctuation",
    Category.ITN: "itn",
    Category.CS_ENGLISH: "cs_english",
}


@dataclass
class MetricReport:
    """Per-category S/D/I counts; sums of reports are micro-averages."""

    stats: dict[str, CategoryStats] = field(
        default_factory=lambda: {k: CategoryStats() for k in REPORT_KEYS}
    )
    baseline: Optional["MetricReport"] = None

    def __getitem__(self, key: str) -> CategoryStats:
        return self.stats[key]

    def __add__(self, other: "MetricReport") -> "MetricReport":
        return MetricReport({k: self.stats[k] + other.stats[k] for k in REPORT_KEYS})

    @property
    def overall(self) -> CategoryStats:
        return self.stats["overall"]

    def err(self, key: str) -> Optional[float]:
        if self.baseline is None:
            return None
        base = self.baseline[key].er
        if not base > 0 or math.isinf(base):
            return None
        return err(self[key].er, base)

    def with_baseline(self, baseline: "MetricReport") -> "MetricReport":
        return MetricReport(dict(self.stats), baseline)

    def check_additivity(self) -> None:
        for attr in ("n_ref", "s", "d", "i"):
            total = sum(getattr(self.stats[k], attr) for k in REPORT_KEYS[:-1])
            if total != getattr(self.overall, attr):
                raise AssertionError(f"category {attr} sum {total} != overall")

    def to_dict(self) -> dict:
        out = {}
        for k in REPORT_KEYS:
            st = self.stats[k]
            er = st.er
            out[k] = {
                "er": None if math.isinf(er) else er,
                "err": self.err(k),
                "n_ref": st.n_ref,
                "s": st.s,
                "d": st.d,
                "i": st.i,
            }
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "MetricReport":
        return cls({k: CategoryStats(obj[k]["n_ref"], obj[k]["s"], obj[k]["d"], obj[k]["i"]) for k in REPORT_KEYS})

    def format_table(self) -> str:
        names = ("Mandarin", "Punctuation", "ITN", "CS-English", "Overall")
        cells = []
        for k in REPORT_KEYS:
            er = self.stats[k].er
            cell = "inf" if math.isinf(er) else f"{100 * er:.2f}"
            e = self.err(k)
            if e is not None:
                cell += f" ({100 * e:+.2f})"
            cells.append(cell)
        widths = [max(len(n), len(c)) for n, c in zip(names, cells)]
        head = " | ".join(n.ljust(w) for n, w in zip(names, widths))
        row = " | ".join(c.ljust(w) for c, w in zip(cells, widths))
        return f"ER% (ERR%)\n{head}\n{row}"


def categorized_report(ref: Sequence[Token], hyp: Sequence[Token]) -> MetricReport:
    report = MetricReport()
    stats = report.stats
    for t in ref:
        stats[_CATEGORY_KEY[t.category]].n_ref += 1
    for op in align(ref, hyp).ops:
        if op.kind is OpKind.MATCH:
            continue
        if op.kind is OpKind.INSERT:
            st = stats[_CATEGORY_KEY[hyp[op.hyp_index].category]]
            st.i += 1
        else:
            st = stats[_CATEGORY_KEY[ref[op.ref_index].category]]
            if op.kind is OpKind.SUBSTITUTE:
                st.s += 1
            else:
                st.d += 1
    ov = stats["overall"]
    for k in REPORT_KEYS[:-1]:
        ov.n_ref += stats[k].n_ref
        ov.s += stats[k].s
        ov.d += stats[k].d
        ov.i += stats[k].i
    return report


def project_boundary(alignment: Alignment, hyp_boundary: int) -> int:
    """Map a cut before hypothesis token ``hyp_boundary`` onto the reference.

    Deletions sitting between two hypothesis tokens stay with the earlier
    segment.
    """
    hyp_len = alignment.hyp_len
    if not 0 <= hyp_boundary <= hyp_len:
        raise ValueError(f"hyp_boundary {hyp_boundary} outside [0, {hyp_len}]")
    if hyp_boundary == hyp_len:
        return alignment.ref_len
    if hyp_boundary == 0:
        return 0
    consumed_hyp = consumed_ref = 0
    for op in alignment.ops:
        if op.hyp_index is not None:
            if consumed_hyp == hyp_boundary:
                break
            consumed_hyp += 1
        if op.ref_index is not None:
            consumed_ref += 1
    return consumed_ref
