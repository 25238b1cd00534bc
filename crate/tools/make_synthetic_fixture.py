#!/usr/bin/env python3
"""Generate the synthetic end-to-end fixture under crates/relfit-cli/tests/fixtures/.

Builds a small self-consistent corpus (embeddings, MRCONSO/MRREL-style files,
benchmark CSV) where the gold ranking partially disagrees with raw cosine but
the relation graph links high-gold pairs, then cross-checks the full pipeline
(neighbor lists from RN/RQ/SY, 10 retrofit sweeps, cosine, tie-aware Spearman)
with an independent NumPy/SciPy implementation. The two printed correlations
are frozen into the acceptance test; regenerate only if the fixture changes.
"""

import itertools
import os
import numpy as np
from scipy.stats import spearmanr

GREEK = [
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta",
    "iota", "kappa", "lambda", "mu", "nu", "xi", "omicron", "pi", "rho",
    "sigma", "tau", "upsilon",
]
DIM = 8
N_PAIRS = 30
RELS_SELECTED = {"RN", "RQ", "SY"}
OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "crates", "relfit-cli", "tests", "fixtures")


def build(seed):
    rng = np.random.default_rng(seed)
    terms = [f"{g} factor" for g in GREEK]
    cuis = {t: f"C{i + 1:07d}" for i, t in enumerate(terms)}
    vecs = {t: rng.normal(size=DIM) for t in terms}

    all_pairs = list(itertools.combinations(range(len(terms)), 2))
    idx = rng.choice(len(all_pairs), size=N_PAIRS, replace=False)
    pairs = [all_pairs[i] for i in sorted(idx)]

    def cos(u, v):
        return float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))

    base_cos = [cos(vecs[terms[a]], vecs[terms[b]]) for a, b in pairs]
    order = np.argsort(np.argsort(base_cos))  # rank 0..N-1
    gold = []
    for k in range(N_PAIRS):
        g = 0.5 + 9.0 * order[k] / (N_PAIRS - 1) + rng.normal(0.0, 2.5)
        gold.append(round(float(np.clip(g, 0.0, 10.0)), 2))

    # Link high-gold pairs, cycling through the selected relations; add a few
    # RO edges on low-gold pairs (RO is outside the selected set).
    edges = []
    rel_cycle = ["RN", "RQ", "SY"]
    hi = [k for k in range(N_PAIRS) if gold[k] >= 7.0]
    lo = [k for k in range(N_PAIRS) if gold[k] <= 3.0]
    for j, k in enumerate(hi):
        a, b = pairs[k]
        edges.append((cuis[terms[a]], rel_cycle[j % 3], cuis[terms[b]]))
    for k in lo[:3]:
        a, b = pairs[k]
        edges.append((cuis[terms[a]], "RO", cuis[terms[b]]))

    # Pairs that lose their CUIs in the benchmark file (skipped at scoring).
    missing_cui = set(rng.choice(N_PAIRS, size=2, replace=False).tolist())

    scored = [k for k in range(N_PAIRS) if k not in missing_cui]
    rho_base = spearmanr([base_cos[k] for k in scored], [gold[k] for k in scored]).statistic

    # Neighbor lists from the selected relations, then retrofit: per sweep,
    # heads in lexicographic order, q_i <- (alpha*qhat_i + mean(neighbors)) / (alpha+1).
    lists = {}
    term_of = {c: t for t, c in cuis.items()}
    for c1, rel, c2 in edges:
        if rel not in RELS_SELECTED or c1 not in term_of or c2 not in term_of:
            continue
        t1, t2 = term_of[c1], term_of[c2]
        if t1 == t2:
            continue
        lists.setdefault(t1, set()).add(t2)
        lists.setdefault(t2, set()).add(t1)

    alpha = 1.0
    qhat = {t: v.copy() for t, v in vecs.items()}
    q = {t: v.copy() for t, v in vecs.items()}
    heads = sorted(t for t in lists if t in q)
    for _ in range(10):
        for t in heads:
            nbrs = [n for n in sorted(lists[t]) if n in q]
            if not nbrs:
                continue
            acc = np.zeros(DIM)
            for n in nbrs:
                acc += q[n]
            q[t] = (alpha * qhat[t] + acc / len(nbrs)) / (alpha + 1.0)

    retro_cos = [cos(q[terms[a]], q[terms[b]]) for a, b in pairs]
    rho_retro = spearmanr([retro_cos[k] for k in scored], [gold[k] for k in scored]).statistic
    return terms, cuis, vecs, pairs, gold, edges, missing_cui, rho_base, rho_retro


def conso_row(cui, lat, ts, s):
    f = [""] * 18
    f[0], f[1], f[2], f[14] = cui, lat, ts, s
    f[11], f[12] = "SRC", "PT" if ts == "P" else "SY"
    return "|".join(f) + "|"


def rel_row(c1, rel, c2):
    f = [""] * 16
    f[0], f[3], f[4] = c1, rel, c2
    f[10] = "SRC"
    return "|".join(f) + "|"


def main():
    for seed in range(1000):
        terms, cuis, vecs, pairs, gold, edges, missing_cui, rb, rr = build(seed)
        if 0.25 <= rb <= 0.65 and rr - rb >= 0.08:
            break
    else:
        raise SystemExit("no suitable seed found")

    os.makedirs(OUT_DIR, exist_ok=True)

    with open(os.path.join(OUT_DIR, "embeddings.tsv"), "w") as f:
        for t in sorted(terms):
            f.write(t + "\t" + " ".join(repr(float(x)) for x in vecs[t]) + "\n")

    with open(os.path.join(OUT_DIR, "mrconso.rrf"), "w") as f:
        for t in terms:
            f.write(conso_row(cuis[t], "ENG", "P", t) + "\n")
        # synonym rows, one duplicate-preferred row, one non-English row
        f.write(conso_row(cuis[terms[0]], "ENG", "S", terms[0] + " protein") + "\n")
        f.write(conso_row(cuis[terms[1]], "ENG", "S", terms[1] + " element") + "\n")
        f.write(conso_row(cuis[terms[2]], "ENG", "P", terms[2] + " duplicate preferred") + "\n")
        f.write(conso_row(cuis[terms[3]], "SPA", "S", "factor " + GREEK[3]) + "\n")

    with open(os.path.join(OUT_DIR, "mrrel.rrf"), "w") as f:
        for c1, rel, c2 in edges:
            f.write(rel_row(c1, rel, c2) + "\n")
        # reverse duplicate of the first edge, a self-loop, an unknown CUI
        if edges:
            c1, rel, c2 = edges[0]
            f.write(rel_row(c2, rel, c1) + "\n")
        f.write(rel_row(cuis[terms[4]], "RN", cuis[terms[4]]) + "\n")
        f.write(rel_row("C0000099", "RN", cuis[terms[0]]) + "\n")

    with open(os.path.join(OUT_DIR, "benchmark.csv"), "w") as f:
        f.write("term1,cui1,term2,cui2,score\n")
        for k, (a, b) in enumerate(pairs):
            t1, t2 = terms[a], terms[b]
            c1 = "" if k in missing_cui else cuis[t1]
            c2 = "" if k in missing_cui else cuis[t2]
            f.write(f"{t1},{c1},{t2},{c2},{gold[k]}\n")

    n_scored = N_PAIRS - len(missing_cui)
    print(f"seed = {seed}")
    print(f"pairs scored = {n_scored}/{N_PAIRS}")
    print(f"edges = {len(edges)} ({sum(1 for e in edges if e[1] in RELS_SELECTED)} selected)")
    print(f"baseline spearman = {float(rb)!r}")
    print(f"retrofitted spearman = {float(rr)!r}")


if __name__ == "__main__":
    main()
