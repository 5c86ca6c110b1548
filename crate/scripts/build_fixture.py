"""Build the shipped noun fixture from the `german-nouns` Wiktionary scrape.

The fixture is written in UniMorph layout (lemma<TAB>form<TAB>features) with a
companion lemma,gender map. Nouns are ranked by `wordfreq` Zipf frequency and
the 11,243 most frequent single-word entries are kept.

    pip install german-nouns wordfreq
    python scripts/build_fixture.py data/
"""

import csv
import sys
from pathlib import Path

import wordfreq
from german_nouns.config import CSV_FILE_PATH

SIZE = 11243
CASES = [
    ("nominativ", "NOM"),
    ("genitiv", "GEN"),
    ("dativ", "DAT"),
    ("akkusativ", "ACC"),
]


def usable(word):
    return bool(word) and word.isalpha()


def main(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seen = set()
    entries = []
    with open(CSV_FILE_PATH, encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            sg = row["nominativ singular"]
            pl = row["nominativ plural"]
            gender = row["genus"]
            if gender not in ("m", "f", "n"):
                continue
            if not (usable(sg) and usable(pl)) or not sg[0].isupper():
                continue
            if sg in seen:
                continue
            seen.add(sg)
            entries.append((wordfreq.zipf_frequency(sg, "de"), sg, gender, row))
    entries.sort(key=lambda e: (-e[0], e[1]))
    kept = sorted(entries[:SIZE], key=lambda e: e[1])

    with open(out / "deu_nouns.tsv", "w", encoding="utf-8", newline="\n") as tsv:
        for _, sg, _, row in kept:
            for column, tag in CASES:
                for number, num_tag in (("singular", "SG"), ("plural", "PL")):
                    form = row[f"{column} {number}"]
                    if usable(form):
                        tsv.write(f"{sg}\t{form}\tN;{tag};{num_tag}\n")
    with open(out / "deu_genders.csv", "w", encoding="utf-8", newline="\n") as gmap:
        for _, sg, gender, _ in kept:
            gmap.write(f"{sg},{gender}\n")
    print(f"wrote {len(kept)} nouns to {out}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data")
