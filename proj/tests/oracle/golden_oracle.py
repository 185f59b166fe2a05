#!/usr/bin/env python3
"""Standalone oracle for the bundled fixture run.

Recomputes every stage of the offline pipeline (filter, split, mock labels,
hashed label embeddings, ground-truth cosine, ROUGE/BLEU, mean differences,
hexbins, rendering) with straightforward Python and writes golden files.
It shares no code with the C++ build; the lexical metrics here use explicit
n-gram enumeration and a memoized recursive LCS rather than tabulated DP.

Usage:
    golden_oracle.py <fixtures_dir> <out_dir>
    golden_oracle.py --metric-cases <cases.tsv>
"""

import csv
import functools
import io
import math
import os
import sys
from collections import Counter

import numpy as np

# Parameters of fixtures/radsim.toml, restated here so the oracle does not
# depend on the config reader under test.
SEED = 7
HASH_DIM = 256
HASH_SEED = 0
BLEU_MAX_N = 4
HEX_RADIUS = 0.05
MIN_COUNT = 5
SCHEMA = ["Atelectasis", "Cardiomegaly", "Consolidation", "Edema",
          "Enlarged Cardiomediastinum", "Fracture", "Lung Lesion",
          "Lung Opacity", "No Finding", "Pleural Effusion", "Pleural Other",
          "Pneumonia", "Pneumothorax", "Support Devices"]
NO_FINDING = "No Finding"
METHODS = [("gpt_sim", "GPT_sim"), ("rouge1_f1", "ROUGE_1_F1"),
           ("rouge2_f1", "ROUGE_2_F1"), ("rougel_f1", "ROUGE_L_F1"),
           ("bleu", "BLEU")]
SOURCES = [("chexpert", "CheXpert"), ("negbio", "NegBio")]


# ---------------------------------------------------------------- ingestion

def read_reports(path):
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    return [(r["report_id"], r["text"].replace("\r\n", "\n").replace("\r", "\n"))
            for r in rows]


def read_labels(path):
    code = {"1.0": 1.0, "0.0": 0.0, "-1.0": -1.0, "": -2.0}
    out = {}
    with open(path, newline="", encoding="utf-8") as f:
        for r in csv.DictReader(f):
            out[r["report_id"]] = [code[r[name].strip()] for name in SCHEMA]
    return out


def solely_no_finding(vec):
    nf = SCHEMA.index(NO_FINDING)
    if vec[nf] != 1.0:
        return False
    return all(v in (0.0, -2.0) for i, v in enumerate(vec) if i != nf)


def split(ids, seed):
    ids = sorted(ids)
    raw = np.random.RandomState(seed)._bit_generator
    for i in range(len(ids) - 1, 0, -1):
        bound = i + 1
        limit = 2**32 - (2**32 % bound)
        while True:
            r = int(raw.random_raw())
            if r < limit:
                break
        j = r % bound
        ids[i], ids[j] = ids[j], ids[i]
    if len(ids) % 2:
        ids = ids[:-1]
    half = len(ids) // 2
    return ids[:half], ids[half:]


# ---------------------------------------------------------------- text

def tokenize(text):
    out, cur = [], bytearray()
    for b in text.encode("utf-8"):
        alnum = (48 <= b <= 57) or (65 <= b <= 90) or (97 <= b <= 122) or b >= 128
        if alnum:
            cur.append(b + 32 if 65 <= b <= 90 else b)
        elif cur:
            out.append(cur.decode("utf-8", "surrogateescape"))
            cur = bytearray()
    if cur:
        out.append(cur.decode("utf-8", "surrogateescape"))
    return out


def load_lexicon(path):
    rules, default = [], None
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            key, label = line.split("\t")
            if key.strip() == "*":
                default = label.strip()
            else:
                rules.append((tokenize(key), label.strip()))
    return rules, default


def mock_labels(text, rules, default):
    toks = tokenize(text)
    used = [False] * len(toks)
    hits = []
    for kw, label in rules:
        k = len(kw)
        for i in range(len(toks) - k + 1):
            if toks[i:i + k] == kw and not any(used[i:i + k]):
                for t in range(i, i + k):
                    used[t] = True
                hits.append((i, label))
    hits.sort(key=lambda h: h[0])
    labels, seen = [], set()
    for _, label in hits:
        if label.lower() not in seen:
            seen.add(label.lower())
            labels.append(label)
    if not labels and default:
        labels = [default]
    return labels


# ---------------------------------------------------------------- vectors

def fnv1a64(data, seed):
    h = 0xcbf29ce484222325
    for b in seed.to_bytes(8, "little") + data:
        h ^= b
        h = (h * 0x100000001b3) & 0xFFFFFFFFFFFFFFFF
    return h


def hashed_embedding(text):
    v = [0.0] * HASH_DIM
    for tok in tokenize(text):
        v[fnv1a64(tok.encode("utf-8", "surrogateescape"), HASH_SEED) % HASH_DIM] += 1.0
    n = math.sqrt(sum(x * x for x in v))
    return [x / n for x in v]


def cosine(u, v):
    dot = sum(a * b for a, b in zip(u, v))
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(b * b for b in v))
    if nu == 0.0 or nv == 0.0:
        return None
    return max(-1.0, min(1.0, dot / (nu * nv)))


# ---------------------------------------------------------------- metrics

def ngrams(toks, n):
    return Counter(tuple(toks[i:i + n]) for i in range(len(toks) - n + 1))


def f1(p, r):
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def rouge_n(cand, ref, n):
    c, r = ngrams(cand, n), ngrams(ref, n)
    overlap = sum(min(cnt, r[g]) for g, cnt in c.items())
    tc, tr = sum(c.values()), sum(r.values())
    p = overlap / tc if tc else 0.0
    rec = overlap / tr if tr else 0.0
    return p, rec, f1(p, rec)


def lcs_len(a, b):
    a, b = tuple(a), tuple(b)

    @functools.lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + go(i + 1, j + 1)
        return max(go(i + 1, j), go(i, j + 1))

    return go(0, 0)


def rouge_l(cand, ref):
    if not cand or not ref:
        return 0.0, 0.0, 0.0
    l = lcs_len(cand, ref)
    p, r = l / len(cand), l / len(ref)
    return p, r, f1(p, r)


def bleu(cand, ref, max_n=BLEU_MAX_N, smoothing=False, eps=1e-9):
    if not cand:
        return 0.0
    logs = 0.0
    for n in range(1, max_n + 1):
        c, r = ngrams(cand, n), ngrams(ref, n)
        total = sum(c.values())
        clipped = sum(min(cnt, r[g]) for g, cnt in c.items())
        p = clipped / total if total else 0.0
        if p == 0.0:
            if not smoothing:
                return 0.0
            p = eps
        logs += math.log(p)
    bp = min(1.0, math.exp(1.0 - len(ref) / len(cand)))
    return bp * math.exp(logs / max_n)


# ---------------------------------------------------------------- hexbin

def hex_center(row, col, r):
    dx = math.sqrt(3.0) * r
    x = (col + (0.5 if row % 2 != 0 else 0.0)) * dx
    y = row * (1.5 * r)
    return x, y


def hex_cell(x, y, r):
    dx = math.sqrt(3.0) * r
    dy = 3.0 * r
    ia, ja = math.floor(x / dx + 0.5), math.floor(y / dy + 0.5)
    ib, jb = math.floor(x / dx), math.floor(y / dy)
    a = (2 * ja, ia)
    b = (2 * jb + 1, ib)
    ax, ay = hex_center(*a, r)
    bx, by = hex_center(*b, r)
    da = (x - ax) ** 2 + (y - ay) ** 2
    db = (x - bx) ** 2 + (y - by) ** 2
    return a if da <= db else b


def percentile(sorted_vals, p):
    h = (len(sorted_vals) - 1) * p / 100.0
    lo = math.floor(h)
    if lo + 1 >= len(sorted_vals):
        return sorted_vals[-1]
    return sorted_vals[lo] + (h - lo) * (sorted_vals[lo + 1] - sorted_vals[lo])


def g(x):
    return "%.10g" % x


# ---------------------------------------------------------------- svg

W, H = 480, 500
LEFT, RIGHT, TOP, BOTTOM = 60, 20, 40, 60
AMIN, AMAX = -1.0, 1.0


def px(x):
    return LEFT + (x - AMIN) / (AMAX - AMIN) * (W - LEFT - RIGHT)


def py(y):
    return TOP + (AMAX - y) / (AMAX - AMIN) * (H - TOP - BOTTOM)


def f2(v):
    return "%.2f" % v


def svg(title, bins, band, r):
    out = []
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM
    out.append('<?xml version="1.0" encoding="UTF-8"?>')
    out.append('<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
               'viewBox="0 0 %d %d">' % (W, H, W, H))
    out.append("<title>%s</title>" % title)
    out.append('<rect x="0" y="0" width="%d" height="%d" fill="white"/>' % (W, H))
    out.append('<defs><clipPath id="plot-area"><rect x="%d" y="%d" width="%d" height="%d"/>'
               '</clipPath></defs>' % (LEFT, TOP, pw, ph))
    out.append('<g class="axes" stroke="black" stroke-width="1">')
    out.append('<line x1="%d" y1="%d" x2="%d" y2="%d"/>' % (LEFT, TOP + ph, LEFT + pw, TOP + ph))
    out.append('<line x1="%d" y1="%d" x2="%d" y2="%d"/>' % (LEFT, TOP, LEFT, TOP + ph))
    out.append("</g>")
    out.append('<g class="ticks" font-family="sans-serif" font-size="10">')
    for i in range(9):
        t = AMIN + 0.25 * i
        x, y = px(t), py(t)
        out.append('<line x1="%s" y1="%d" x2="%s" y2="%d" stroke="black"/>'
                   % (f2(x), TOP + ph, f2(x), TOP + ph + 5))
        out.append('<text x="%s" y="%d" text-anchor="middle">%s</text>'
                   % (f2(x), TOP + ph + 18, f2(t)))
        out.append('<line x1="%d" y1="%s" x2="%d" y2="%s" stroke="black"/>'
                   % (LEFT - 5, f2(y), LEFT, f2(y)))
        out.append('<text x="%d" y="%s" text-anchor="end" dominant-baseline="middle">%s</text>'
                   % (LEFT - 8, f2(y), f2(t)))
    out.append("</g>")
    out.append('<text class="x-label" x="%s" y="%d" text-anchor="middle" '
               'font-family="sans-serif" font-size="12">GT similarity</text>'
               % (f2(LEFT + pw / 2.0), H - 15))
    out.append('<text class="y-label" x="15" y="%s" text-anchor="middle" '
               'font-family="sans-serif" font-size="12" transform="rotate(-90 15 %s)">'
               'predicted similarity</text>' % (f2(TOP + ph / 2.0), f2(TOP + ph / 2.0)))
    out.append('<text class="title" x="%s" y="25" text-anchor="middle" '
               'font-family="sans-serif" font-size="14">%s</text>' % (f2(W / 2.0), title))
    out.append('<g class="bins" clip-path="url(#plot-area)">')
    maxc = max(c for _, _, c in bins)
    h = r * math.sqrt(3.0) / 2.0
    for cx, cy, count in bins:
        verts = [(cx + h, cy + r / 2.0), (cx, cy + r), (cx - h, cy + r / 2.0),
                 (cx - h, cy - r / 2.0), (cx, cy - r), (cx + h, cy - r / 2.0)]
        d = " L".join("%s,%s" % (f2(px(vx)), f2(py(vy))) for vx, vy in verts)
        op = 1.0 if maxc <= 1 else 0.2 + 0.8 * math.log(count) / math.log(maxc)
        out.append('<path class="hex" data-count="%d" d="M%s Z" fill="#1f4e79" '
                   'fill-opacity="%.3f"/>' % (count, d, op))
    out.append("</g>")
    lo, hi = band
    out.append('<line class="identity" x1="%s" y1="%s" x2="%s" y2="%s" stroke="#c0392b" '
               'stroke-width="1.5" stroke-dasharray="6,4"/>'
               % (f2(px(lo)), f2(py(lo)), f2(px(hi)), f2(py(hi))))
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- main

def run(fixtures, out_dir):
    reports = read_reports(os.path.join(fixtures, "reports.csv"))
    chex = read_labels(os.path.join(fixtures, "chexpert.csv"))
    neg = read_labels(os.path.join(fixtures, "negbio.csv"))
    rules, default = load_lexicon(os.path.join(fixtures, "mock_lexicon.tsv"))

    retained = [(i, t) for i, t in reports
                if not (solely_no_finding(chex[i]) and solely_no_finding(neg[i]))]
    text = dict(retained)
    group_a, group_b = split([i for i, _ in retained], SEED)
    pairs = [(a, b) for a in group_a for b in group_b]

    labels = {i: mock_labels(t, rules, default) for i, t in retained}
    emb = {i: hashed_embedding("; ".join(labels[i])) for i in labels}
    toks = {i: tokenize(t) for i, t in retained}

    lines = ["a_id,b_id,gt_chexpert,gt_negbio,gpt_sim,rouge1_f1,rouge2_f1,rougel_f1,bleu"]
    for a, b in pairs:
        gc, gn = cosine(chex[a], chex[b]), cosine(neg[a], neg[b])
        row = [a, b, "" if gc is None else g(gc), "" if gn is None else g(gn),
               g(cosine(emb[a], emb[b])),
               g(rouge_n(toks[a], toks[b], 1)[2]), g(rouge_n(toks[a], toks[b], 2)[2]),
               g(rouge_l(toks[a], toks[b])[2]), g(bleu(toks[a], toks[b]))]
        lines.append(",".join(row))
    scores_csv = "\n".join(lines) + "\n"

    # Aggregation works from the written file, as the report stage does.
    parsed = list(csv.DictReader(io.StringIO(scores_csv)))
    md = ["# Mean Differences in Similarity Scores", "",
          "| Comparison | CheXpert | NegBio |", "|---|---:|---:|"]
    means = {}
    for key, name in METHODS:
        cells = []
        for skey, _ in SOURCES:
            diffs = [abs(float(r[key]) - float(r["gt_" + skey]))
                     for r in parsed if r["gt_" + skey] != ""]
            m = sum(diffs) / len(diffs)
            means[(key, skey)] = m
            cells.append("%.4f" % m)
        md.append("| %s | %s |" % (name, " | ".join(cells)))
    summary_md = "\n".join(md) + "\n"

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "scores.csv"), "w", newline="") as f:
        f.write(scores_csv)
    with open(os.path.join(out_dir, "summary.md"), "w", newline="") as f:
        f.write(summary_md)

    for key, name in METHODS:
        for skey, sname in SOURCES:
            pts = [(float(r["gt_" + skey]), float(r[key]))
                   for r in parsed if r["gt_" + skey] != ""]
            cells = Counter(hex_cell(x, y, HEX_RADIUS) for x, y in pts)
            kept = sorted((rc, c) for rc, c in cells.items() if c > MIN_COUNT)
            band = (percentile(sorted(x for x, _ in pts), 5),
                    percentile(sorted(x for x, _ in pts), 95))
            print("%-10s %-8s mean=%.4f bins=%d kept=%d max=%d band=(%.4f, %.4f)"
                  % (name, sname, means[(key, skey)], len(cells), len(kept),
                     max(cells.values()), band[0], band[1]))
            if not kept:
                continue
            bins = [hex_center(row, col, HEX_RADIUS) + (c,) for (row, col), c in kept]
            doc = svg("%s vs GT (%s)" % (name, sname), bins, band, HEX_RADIUS)
            with open(os.path.join(out_dir, "hexbin_%s_%s.svg" % (key, skey)), "w",
                      newline="") as f:
                f.write(doc)

    print("retained=%d groups=%d/%d pairs=%d" % (len(retained), len(group_a),
                                                 len(group_b), len(pairs)))
    for i, _ in retained:
        print("  %s: %s" % (i, labels[i]))


def metric_cases(path):
    """Prints frozen expected values for the curated metric cases."""
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip() or line.startswith("#"):
                continue
            cand, ref = line.rstrip("\n").split("\t")[:2]
            c, r = tokenize(cand), tokenize(ref)
            vals = [rouge_n(c, r, 1)[2], rouge_n(c, r, 2)[2], rouge_l(c, r)[2], bleu(c, r)]
            print("\t".join([cand, ref] + ["%.17g" % v for v in vals]))


if __name__ == "__main__":
    if len(sys.argv) == 3 and sys.argv[1] == "--metric-cases":
        metric_cases(sys.argv[2])
    elif len(sys.argv) == 3:
        run(sys.argv[1], sys.argv[2])
    else:
        sys.exit(__doc__)
