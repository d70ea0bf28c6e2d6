"""Regenerates the synthetic fixtures and their expected values.

Expected values are computed here, independently of the Rust code, and
frozen into expected.json files that the test suites read.

    python3 fixtures/generate.py
"""

import json
import math
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent

NAMES = ["alif", "ba", "jim", "dal", "ha", "waw", "zay", "Ha", "Ta", "ya",
         "kaf", "lam", "mim", "nun", "sin", "ayn", "fa", "sad", "qaf"]
# Cut points: a level maps to 1 + number of cuts strictly below it.
CUTS = {7: [5, 8, 10, 11, 13, 15], 5: [8, 11, 13, 15], 3: [11, 15]}

VOCAB = ["كتب", "الولد", "الدرس", "ذهب", "إلى", "المدرسة", "في", "الصباح",
         "قرأ", "القصة", "الجميلة", "البيت", "كبير", "السماء", "زرقاء",
         "العلم", "نور", "المعرفة", "الحديقة", "واسعة", "الشمس", "مشرقة",
         "الطالب", "مجتهد", "الكتاب", "مفيد", "الجامعة", "البحث", "النظرية",
         "التجربة", "الاقتصاد", "السياسة", "المجتمع", "التاريخ", "الفلسفة"]
DOMAINS = ["Arts & Humanities", "Social Sciences", "STEM"]
READERSHIP = ["Foundational", "Advanced", "Specialized"]


def level_name(n):
    return f"{n}-{NAMES[n - 1]}"


def collapse(level, k):
    if k == 19:
        return level
    return 1 + sum(1 for c in CUTS[k] if c < level)


def is_word(token):
    return any(ch.isalpha() for ch in token)


def word_count(text):
    return sum(1 for t in text.split() if is_word(t))


def pearson(xs, ys):
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    return sxy / math.sqrt(sxx * syy)


def make_sentence(rng, level):
    n = max(1, level + rng.randint(-2, 4))
    words = [rng.choice(VOCAB) for _ in range(n)]
    if rng.random() < 0.2:
        words.insert(rng.randrange(len(words) + 1), str(rng.randint(1900, 2024)))
    if rng.random() < 0.5:
        words[-1] += "."
    elif rng.random() < 0.3:
        words[rng.randrange(len(words))] += "،"
    return " ".join(words)


def corpus_fixture():
    rng = random.Random(20250101)
    docs = []
    for i in range(40):
        docs.append({
            "id": f"doc{i:03d}",
            "source": f"Source {i % 7}",
            "domain": DOMAINS[i % 3],
            "readership": READERSHIP[(i // 3) % 3],
            "split": ["train"] * 8 + ["dev", "test"],
        })
        docs[-1]["split"] = docs[-1]["split"][i % 10]
    rows = []
    for j in range(500):
        d = docs[j % 40] if j < 480 else docs[rng.randrange(40)]
        level = rng.choices(range(1, 20), weights=[1, 2, 3, 3, 4, 4, 5, 5, 6, 6,
                                                   7, 9, 7, 6, 5, 4, 3, 2, 1])[0]
        text = make_sentence(rng, level)
        split = d["split"]
        # A few sentences sit in a split other than their document's.
        if j % 97 == 5:
            split = "test" if split != "test" else "dev"
        rows.append({"id": f"S{j:04d}", "doc": d, "text": text, "level": level,
                     "split": split})
    mismatched = {"S0010", "S0200", "S0399"}
    lines = ["\t".join(["ID", "Document", "Source", "Domain", "Text_Class",
                        "Sentence", "Word_Count", "Readability_Level", "Split"])]
    for r in rows:
        wc = word_count(r["text"]) + (1 if r["id"] in mismatched else 0)
        d = r["doc"]
        lines.append("\t".join([r["id"], d["id"], d["source"], d["domain"],
                                d["readership"], r["text"], str(wc),
                                level_name(r["level"]), r["split"]]))
    (ROOT / "corpus" / "barec_synthetic.tsv").write_text("\n".join(lines) + "\n",
                                                        encoding="utf-8")

    level_counts = [0] * 19
    split_counts = {"train": 0, "dev": 0, "test": 0}
    split_levels = {s: [0] * 19 for s in split_counts}
    cells = {}
    words_by_level = [0] * 19
    for r in rows:
        wc = word_count(r["text"])
        level_counts[r["level"] - 1] += 1
        words_by_level[r["level"] - 1] += wc
        split_counts[r["split"]] += 1
        split_levels[r["split"]][r["level"] - 1] += 1
        key = f'{r["doc"]["domain"]}|{r["doc"]["readership"]}'
        c = cells.setdefault(key, {"documents": set(), "sentences": 0, "words": 0})
        c["documents"].add(r["doc"]["id"])
        c["sentences"] += 1
        c["words"] += wc
    xs = [r["level"] for r in rows]
    ys = [word_count(r["text"]) for r in rows]
    means = [(i + 1, words_by_level[i] / level_counts[i])
             for i in range(19) if level_counts[i]]
    distributed = sum(1 for r in rows if r["split"] != r["doc"]["split"])
    expected = {
        "sentences": len(rows),
        "documents": len({r["doc"]["id"] for r in rows}),
        "words": sum(ys),
        "word_count_mismatches": sorted(mismatched),
        "split_sentences": split_counts,
        "iaa_distributed": distributed,
        "level_counts": level_counts,
        "split_level_counts": split_levels,
        "cells": {k: {"documents": len(v["documents"]), "sentences": v["sentences"],
                      "words": v["words"]} for k, v in sorted(cells.items())},
        "pearson_sentence": pearson(xs, ys),
        "pearson_level_means": pearson([m[0] for m in means], [m[1] for m in means]),
    }
    (ROOT / "corpus" / "expected.json").write_text(json.dumps(expected, indent=2) + "\n")


def scoring_fixture():
    gold = [1, 3, 3, 5, 6, 7, 8, 9, 10, 11, 11, 12, 12, 12, 13, 14, 15, 16, 18, 19]
    pred = [2, 3, 4, 5, 9, 7, 7, 10, 10, 12, 11, 12, 14, 11, 13, 13, 17, 16, 19, 15]
    ids = [f"t{i:02d}" for i in range(len(gold))]
    with open(ROOT / "scoring" / "documents.jsonl", "w") as f:
        f.write(json.dumps({"id": "tdoc", "domain": "stem", "readership": "advanced",
                            "split": "dev", "preassigned_split": True},
                           ensure_ascii=False) + "\n")
    with open(ROOT / "scoring" / "sentences.jsonl", "w") as f:
        for i, g in zip(ids, gold):
            f.write(json.dumps({"id": i, "doc_id": "tdoc", "text": "كتب الولد",
                                "word_count": 2, "level": g}, ensure_ascii=False) + "\n")
    with open(ROOT / "scoring" / "predictions.tsv", "w") as f:
        f.write("id\tlevel\n")
        for i, p in zip(ids, pred):
            f.write(f"{i}\t{p}\n")

    n = len(gold)

    def acc(k):
        return sum(collapse(g, k) == collapse(p, k) for g, p in zip(gold, pred)) / n

    dist = sum(abs(g - p) for g, p in zip(gold, pred)) / n
    # QWK as one minus the ratio of squared differences, observed over all
    # cross pairs scaled to n.
    obs = sum((g - p) ** 2 for g, p in zip(gold, pred))
    exp = sum((g - p) ** 2 for g in gold for p in pred) / n
    expected = {
        "n": n,
        "acc19": acc(19),
        "acc7": acc(7),
        "acc5": acc(5),
        "acc3": acc(3),
        "adjacent_acc19": sum(abs(g - p) <= 1 for g, p in zip(gold, pred)) / n,
        "distance": dist,
        "distance_relative": dist / 19,
        "qwk": 1 - obs / exp,
    }
    (ROOT / "scoring" / "expected.json").write_text(json.dumps(expected, indent=2) + "\n")


if __name__ == "__main__":
    corpus_fixture()
    scoring_fixture()
