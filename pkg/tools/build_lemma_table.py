"""Freeze the bundled English lemma table.

Reads the WordNet-derived ``en_lemma_lookup`` table shipped in the
``spacy-lookups-data`` wheel and writes ``src/docalign/data/lemma_en.tsv.gz``.

Only lowercase ASCII-alphabetic entries are kept, and lookup chains are
resolved so the table is idempotent: ``lemma(lemma(w)) == lemma(w)``.

    pip download --no-deps spacy-lookups-data -d /tmp/wheels
    python tools/build_lemma_table.py /tmp/wheels/spacy_lookups_data-*.whl
"""
import gzip
import json
import re
import sys
import zipfile
from pathlib import Path

ALPHA = re.compile(r"^[a-z]+$")
OUT = Path(__file__).resolve().parents[1] / "src" / "docalign" / "data" / "lemma_en.tsv.gz"


def resolve(table):
    out = {}
    for word in table:
        seen = {word}
        lemma = table[word]
        while lemma in table and table[lemma] != lemma and lemma not in seen:
            seen.add(lemma)
            lemma = table[lemma]
        if lemma != word:
            out[word] = lemma
    return out


def main(wheel):
    with zipfile.ZipFile(wheel) as zf:
        raw = json.loads(gzip.decompress(zf.read("spacy_lookups_data/data/en_lemma_lookup.json.gz")))
    table = {k: v for k, v in raw.items() if ALPHA.match(k) and ALPHA.match(v)}
    table = resolve(table)
    lines = "".join(f"{k}\t{table[k]}\n" for k in sorted(table))
    # mtime=0 keeps the artifact byte-stable across rebuilds
    with open(OUT, "wb") as fh, gzip.GzipFile(fileobj=fh, mode="wb", mtime=0, filename="") as gz:
        gz.write(lines.encode("utf-8"))
    print(f"wrote {len(table)} entries to {OUT}")


if __name__ == "__main__":
    main(sys.argv[1])
