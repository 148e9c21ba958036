#!/usr/bin/env python3
"""Independent reference implementations used to freeze expected metric values.

Run: python3 tests/oracles/metric_oracle.py > tests/golden/metric_oracle.json
"""
import json
import math
import re
import unicodedata
from collections import Counter


def chrf(hyp, ref, max_n=6, beta=2.0):
    hyp = " ".join(hyp.split())
    ref = " ".join(ref.split())
    if not ref:
        return 1.0 if not hyp else 0.0
    ps, rs = [], []
    for n in range(1, max_n + 1):
        rg = Counter(ref[i:i + n] for i in range(len(ref) - n + 1))
        if not rg:
            continue
        hg = Counter(hyp[i:i + n] for i in range(len(hyp) - n + 1))
        m = sum((hg & rg).values())
        ps.append(m / sum(hg.values()) if hg else 0.0)
        rs.append(m / sum(rg.values()))
    p, r = sum(ps) / len(ps), sum(rs) / len(rs)
    if p == 0 and r == 0:
        return 0.0
    b2 = beta * beta
    return (1 + b2) * p * r / (b2 * p + r)


SUFFIXES = [("ational", "ate"), ("ization", "ize"), ("fulness", "ful"), ("iveness", "ive"),
            ("ations", "ate"), ("ation", "ate"), ("ingly", ""), ("ments", ""), ("ness", ""),
            ("ment", ""), ("edly", ""), ("ies", "y"), ("ied", "y"), ("ing", ""), ("ers", ""),
            ("er", ""), ("ed", ""), ("es", ""), ("ly", ""), ("s", "")]


def stem(w):
    for suf, rep in SUFFIXES:
        if len(w) >= len(suf) + 3 and w.endswith(suf):
            if suf == "s" and w.endswith("ss"):
                continue
            return w[:-len(suf)] + rep
    return w


def tokenize(s):
    return re.findall(r"[a-z0-9\x80-\U0010ffff]+|[^\sa-z0-9\x80-\U0010ffff]", s.lower())


def meteor(hyp, ref):
    h, r = tokenize(hyp), tokenize(ref)
    if not h or not r:
        return 0.0
    link = [None] * len(h)
    free = set(range(len(r)))
    for key in (lambda w: w, stem):
        for i, w in enumerate(h):
            if link[i] is not None:
                continue
            for j in sorted(free):
                if key(r[j]) == key(w):
                    link[i] = j
                    free.discard(j)
                    break
    matched = [(i, j) for i, j in enumerate(link) if j is not None]
    m = len(matched)
    if m == 0:
        return 0.0
    chunks = 0
    prev = None
    for i, j in enumerate(link):
        if j is None:
            prev = None
            continue
        if prev is None or j != prev + 1:
            chunks += 1
        prev = j
    p, rc = m / len(h), m / len(r)
    fmean = 10 * p * rc / (rc + 9 * p)
    return fmean * (1 - 0.5 * (chunks / m) ** 3)


CHRF_CASES = [
    ("abc", "abc", 6), ("xyz", "abc", 6), ("ab", "abc", 2), ("", "", 6), ("abc", "", 6),
    ("the cat sat", "the cat sat on the mat", 6), ("hello  world", "hello world", 6),
    ("loop runs from 0 to 5", "loop runs from 0 to 4", 6), ("a", "abc", 6),
    ("Die Katze", "die katze", 3),
]
METEOR_CASES = [
    ("the cat sat", "the cat sat"), ("dog", "cat"), ("sat the cat", "the cat sat"),
    ("the cats sitting", "the cat sits"), ("", "the cat"),
    ("The loop prints each element.", "The loop prints every element of the array."),
    ("a b c d", "d c b a"), ("the the the", "the"), ("creates a new list", "create new lists"),
    ("x y", "x z y"),
]


def main():
    out = {
        "chrf": [{"hyp": h, "ref": r, "max_n": n, "score": chrf(h, r, n)} for h, r, n in CHRF_CASES],
        "meteor": [{"hyp": h, "ref": r, "score": meteor(h, r)} for h, r in METEOR_CASES],
        "bertscore": [{
            "hyp": [[1, 0], [0, 1]], "ref": [[1, 0], [math.sqrt(0.5), math.sqrt(0.5)]],
            "precision": (1 + math.sqrt(0.5)) / 2, "recall": (1 + math.sqrt(0.5)) / 2,
        }, {
            "hyp": [[1, 0, 0]], "ref": [[0.6, 0.8, 0], [0, 0, 1]],
            "precision": 0.6, "recall": 0.3,
        }],
        "or_loss": [{"odds_ratio": x, "loss": math.log1p(math.exp(-x))} for x in (1.0, 3.0, 0.5)],
    }
    for b in out["bertscore"]:
        p, r = b["precision"], b["recall"]
        b["f1"] = 2 * p * r / (p + r)
    print(json.dumps(out, indent=2, ensure_ascii=False))


if __name__ == "__main__":
    main()
