import math
import random
from functools import lru_cache

import pytest
from hypothesis import given, strategies as st

from coc_asr.align import (
    OpKind,
    align,
    align_sequences,
    categorized_report,
    edit_distance,
    err,
    error_rate,
    project_boundary,
)
from coc_asr.textproc import tokenize


def recursive_distance(a, b):
    """Textbook recursive definition (memoised on suffix positions)."""

    @lru_cache(maxsize=None)
    def d(i, j):
        if i == len(a):
            return len(b) - j
        if j == len(b):
            return len(a) - i
        return min(
            d(i + 1, j + 1) + (a[i] != b[j]),
            d(i + 1, j) + 1,
            d(i, j + 1) + 1,
        )

    return d(0, 0)


def all_alignments(a, b):
    """Every op sequence turning a into b (exponential; keep inputs tiny)."""
    if not a and not b:
        yield ()
        return
    if a and b:
        kind = "M" if a[0] == b[0] else "S"
        for rest in all_alignments(a[1:], b[1:]):
            yield (kind,) + rest
    if a:
        for rest in all_alignments(a[1:], b):
            yield ("D",) + rest
    if b:
        for rest in all_alignments(a, b[1:]):
            yield ("I",) + rest


def brute_force_min(a, b):
    return min(sum(op != "M" for op in ops) for ops in all_alignments(a, b))


def random_pair(rng, max_len=8, alphabet="abcd"):
    return (
        [rng.choice(alphabet) for _ in range(rng.randint(0, max_len))],
        [rng.choice(alphabet) for _ in range(rng.randint(0, max_len))],
    )


def check_alignment(al, a, b):
    assert al.s_count + al.d_count + al.match_count == len(a)
    assert al.s_count + al.i_count + al.match_count == len(b)
    ri = hi = 0
    for op in al.ops:
        if op.kind in (OpKind.MATCH, OpKind.SUBSTITUTE):
            assert (op.ref_index, op.hyp_index) == (ri, hi)
            assert (a[ri] == b[hi]) == (op.kind is OpKind.MATCH)
            ri += 1
            hi += 1
        elif op.kind is OpKind.DELETE:
            assert (op.ref_index, op.hyp_index) == (ri, None)
            ri += 1
        else:
            assert (op.ref_index, op.hyp_index) == (None, hi)
            hi += 1
    assert (ri, hi) == (len(a), len(b))


def test_empty():
    al = align([], [])
    assert al.ops == () and al.distance == 0


def test_single_substitution():
    al = align_sequences(list("abc"), list("axc"))
    assert (al.s_count, al.d_count, al.i_count) == (1, 0, 0)
    assert al.distance == 1 == brute_force_min("abc", "axc")
    assert [op.kind for op in al.ops] == [OpKind.MATCH, OpKind.SUBSTITUTE, OpKind.MATCH]


def test_all_deleted():
    al = align_sequences(["a", "b"], [])
    assert (al.d_count, al.distance) == (2, 2)
    assert error_rate(tokenize("ab"), []) == 1.0


def test_tie_break_prefers_substitution_over_indels():
    al = align_sequences(list("ab"), list("ba"))
    assert [op.kind for op in al.ops] == [OpKind.SUBSTITUTE, OpKind.SUBSTITUTE]


def test_tie_break_prefers_delete_over_insert():
    al = align_sequences(list("a"), list("b"), )
    assert [op.kind for op in al.ops] == [OpKind.SUBSTITUTE]
    al = align_sequences(list("ab"), list("bc"))
    # S,S and D,M,I both cost 2; substitution wins
    assert [op.kind for op in al.ops] == [OpKind.SUBSTITUTE, OpKind.SUBSTITUTE]


def test_matching_is_case_sensitive():
    assert edit_distance(tokenize("Apple"), tokenize("apple")) == 1


def test_brute_force_enumeration_small(kernel):
    rng = random.Random(11)
    for _ in range(300):
        a, b = random_pair(rng, max_len=4, alphabet="abc")
        al = align_sequences(a, b, kernel=kernel)
        assert al.distance == brute_force_min(a, b)
        check_alignment(al, a, b)


def test_dp_matches_recursive_oracle(kernel):
    rng = random.Random(2024)
    for _ in range(500):
        a, b = random_pair(rng)
        expected = recursive_distance(tuple(a), tuple(b))
        assert edit_distance(a, b, kernel=kernel) == expected
        al = align_sequences(a, b, kernel=kernel)
        assert al.distance == expected
        check_alignment(al, a, b)


def test_kernels_agree_on_ops():
    from conftest import KERNELS

    if len(KERNELS) < 2:
        pytest.skip("compiled kernel not built")
    (_, py), (_, cy) = KERNELS
    rng = random.Random(5)
    for _ in range(300):
        a, b = random_pair(rng, max_len=30, alphabet="abcdef")
        assert align_sequences(a, b, kernel=py) == align_sequences(a, b, kernel=cy)


@given(st.lists(st.sampled_from("abcd"), max_size=10), st.lists(st.sampled_from("abcd"), max_size=10))
def test_count_conservation(a, b):
    check_alignment(align_sequences(a, b), a, b)


# --- error rate / ERR -------------------------------------------------------

def test_error_rate_identical():
    toks = tokenize("你好，GPT 2024。")
    assert error_rate(toks, toks) == 0.0


def test_error_rate_one_in_three():
    assert error_rate(tokenize("你好吗"), tokenize("你号吗")) == pytest.approx(1 / 3)
    assert recursive_distance("你好吗", "你号吗") / 3 == pytest.approx(0.3333, abs=1e-4)


def test_error_rate_empty_reference():
    assert error_rate([], []) == 0.0
    assert error_rate([], tokenize("a")) == math.inf


@given(st.text(alphabet="你好ab12。, ", max_size=40))
def test_error_rate_self_zero(text):
    toks = tokenize(text)
    assert error_rate(toks, toks) == 0.0


def test_err_values_from_results_table():
    assert err(7.03, 12.61) == pytest.approx(-0.4425, abs=1e-4)
    assert err(4.19, 5.97) == pytest.approx(-0.2982, abs=1e-4)
    assert err(3.3, 3.3) == 0.0


def test_err_zero_baseline():
    with pytest.raises(ValueError):
        err(1.0, 0.0)


# --- categorized report -----------------------------------------------------

def test_report_punctuation_deletion():
    rep = categorized_report(tokenize("你好。"), tokenize("你好"))
    assert (rep["punctuation"].d, rep["punctuation"].n_ref, rep["punctuation"].er) == (1, 1, 1.0)
    assert rep["mandarin"].er == 0.0
    assert rep.overall.er == pytest.approx(1 / 3)
    rep.check_additivity()


def test_report_equal_texts():
    toks = tokenize("GPT模型, 2024年。")
    rep = categorized_report(toks, toks)
    assert all(rep[k].er == 0 for k in ("mandarin", "punctuation", "itn", "cs_english", "overall"))


def test_insertions_use_hypothesis_category():
    rep = categorized_report(tokenize("你好"), tokenize("你好OK"))
    assert rep["cs_english"].i == 1
    assert rep["cs_english"].n_ref == 0
    assert rep["cs_english"].er == math.inf
    assert rep.overall.er == 0.5


def test_category_er_can_exceed_one():
    rep = categorized_report(tokenize("ab 你"), tokenize("x y z 你"))
    assert rep["cs_english"].er > 1.0


def test_report_json_shape():
    rep = categorized_report(tokenize("你好。"), tokenize("你好"))
    base = categorized_report(tokenize("你好。"), tokenize("你"))
    d = rep.with_baseline(base).to_dict()
    assert set(d) == {"mandarin", "punctuation", "itn", "cs_english", "overall"}
    assert d["overall"]["er"] == pytest.approx(1 / 3)
    assert d["overall"]["err"] == pytest.approx((1 / 3 - 2 / 3) / (2 / 3))
    assert d["itn"]["err"] is None


@given(st.text(alphabet="你好模型abAB12.,%。？ ", max_size=40), st.text(alphabet="你好模型abAB12.,%。？ ", max_size=40))
def test_category_additivity(ref, hyp):
    rep = categorized_report(tokenize(ref), tokenize(hyp))
    rep.check_additivity()
    assert rep.overall.errors == edit_distance(tokenize(ref), tokenize(hyp))


# --- boundary projection ----------------------------------------------------

def test_projection_endpoints():
    al = align_sequences(list("abcd"), list("axd"))
    assert project_boundary(al, 0) == 0
    assert project_boundary(al, 3) == 4


def test_projection_identity():
    al = align_sequences(list("abcde"), list("abcde"))
    assert [project_boundary(al, k) for k in range(6)] == list(range(6))


def test_projection_attaches_deletion_to_earlier_segment():
    # ops: M(a) D(b) M(c) M(d); after hyp "a" the deleted "b" stays behind
    al = align_sequences(list("abcd"), list("acd"))
    assert project_boundary(al, 1) == 2


def test_projection_rejects_out_of_range():
    al = align_sequences(list("ab"), list("ab"))
    with pytest.raises(ValueError):
        project_boundary(al, 3)


@given(st.lists(st.sampled_from("abcd"), max_size=12), st.lists(st.sampled_from("abcd"), max_size=12))
def test_projection_monotone(a, b):
    al = align_sequences(a, b)
    cuts = [project_boundary(al, k) for k in range(len(b) + 1)]
    assert cuts == sorted(cuts)
    assert cuts[-1] == len(a)
    if b:
        assert cuts[0] == 0
