"""Regenerate tests/data/replay_{corpus,records}.jsonl.

Outputs are references corrupted at a per-segment random strength, which
spreads the gate error rates across the 0.2-0.5 sweep range.
"""
import random
from dataclasses import replace
from pathlib import Path

from coc_asr.corpus import PRESETS, NoiseProfile, inject_noise, segmentize, synthetic_corpus, write_corpus, write_jsonl

OUT = Path(__file__).resolve().parents[1] / "tests" / "data"


def main() -> None:
    docs = synthetic_corpus(30, PRESETS["default"], seed=42, min_sentences=4, max_sentences=14)
    rng = random.Random(42)
    records = []
    for doc in docs:
        for seg in segmentize(doc, 5, 0):
            strength = rng.choice([0.0, 0.02, 0.1, 0.2, 0.35, 0.6])
            noise = NoiseProfile(sub_rate=strength, del_rate=strength / 3, ins_rate=strength / 3,
                                 seed=rng.randrange(2**31))
            out = inject_noise(seg.ref_segment, noise) if strength else seg.ref_segment
            records.append({"doc_id": doc.id, "segment_index": seg.index, "attempt": 0, "output": out})
    write_corpus(OUT / "replay_corpus.jsonl", docs)
    write_jsonl(OUT / "replay_records.jsonl", records)
    print(f"{len(docs)} docs, {len(records)} records")


if __name__ == "__main__":
    main()
