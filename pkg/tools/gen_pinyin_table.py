"""Regenerate src/coc_asr/data/pinyin.tsv from pypinyin's single-character dictionary.

Only needed when refreshing the shipped table; the package reads the TSV and
does not import pypinyin at runtime.

    pip install pypinyin
    python tools/gen_pinyin_table.py
"""
from pathlib import Path

from pypinyin.contrib.tone_convert import to_tone3
from pypinyin.pinyin_dict import pinyin_dict

RANGES = [(0x3400, 0x4DBF), (0x4E00, 0x9FFF)]
OUT = Path(__file__).resolve().parents[1] / "src" / "coc_asr" / "data" / "pinyin.tsv"


def main() -> None:
    lines = [
        "# char<TAB>tone-numbered pinyin (first listed reading, neutral tone = 5)",
        "# generated by tools/gen_pinyin_table.py from pypinyin",
    ]
    for lo, hi in RANGES:
        for cp in range(lo, hi + 1):
            readings = pinyin_dict.get(cp)
            if not readings:
                continue
            syllable = to_tone3(readings.split(",")[0], neutral_tone_with_five=True)
            lines.append(f"{chr(cp)}\t{syllable}")
    OUT.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(lines) - 2} entries to {OUT}")


if __name__ == "__main__":
    main()
