#!/usr/bin/env python3
"""Generate the committed test fixtures and golden files.

Standalone on purpose: this script must not import the package it checks.
It hand-constructs a 10-triplet dataset with 4-d integer embeddings over
3 layers (layer 2 is built to track the human norms best), writes the
embedding dump in the documented format, and computes every golden value
(measure tables, MAE, rank correlations, best layers, reversed-compound
correlations, the 11x3 weighted-transparency grid) with plain stdlib
arithmetic. Golden floats are reproduced exactly by the package because
both sides evaluate the same IEEE expressions on exact integer inputs and
use exactly-rounded summation.

Run from the repository root:  python scripts/make_fixtures.py
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from fractions import Fraction
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "tests" / "data"

# --- the 10-triplet dataset -------------------------------------------------
# gold norms use eighths so that error sums stay exact in binary floating point

TRIPLETS = [
    # compound, left, right, lmd [0,10], st [1,7]
    ("handgun", "hand", "gun", 8.25, 6.25),
    ("bodyguard", "body", "guard", 7.25, 5.625),
    ("policeman", "police", "man", 3.0, 6.125),
    ("wartime", "war", "time", 3.5, 6.375),
    ("muskrat", "musk", "rat", 7.5, 2.75),
    ("primrose", "prim", "rose", 8.0, 2.0),
    ("milestone", "mile", "stone", 3.375, 2.25),
    ("cheapskate", "cheap", "skate", 2.0, 1.875),
    ("ponytail", "pony", "tail", 6.125, 5.0),
    ("snowball", "snow", "ball", 5.5, 6.5),
]

N = len(TRIPLETS)
DIM = 4
LAYERS = (1, 2, 3)

# layer "quality" plan: layer 2 sees the human ordering, layers 1 and 3 see
# permuted orderings, reversed compounds see a strong shuffle at all layers
PERM_LAYER = {
    1: [3, 4, 0, 1, 2, 8, 9, 5, 6, 7],
    2: list(range(N)),
    3: [0, 2, 1, 4, 3, 6, 5, 8, 7, 9],
}
PERM_REVERSED = [7, 2, 9, 4, 0, 8, 3, 6, 1, 5]

LEFT_VEC = (2, 0, 0, 0)
RIGHT_VEC = (0, 2, 0, 0)

WEIGHTS = [i / 10 for i in range(11)]


# --- arithmetic mirrors (same IEEE expressions as the toolkit) ---------------

def cosine_int(u: tuple[int, ...], v: tuple[int, ...]) -> float:
    dot = float(sum(a * b for a, b in zip(u, v)))
    nu = math.sqrt(float(sum(a * a for a in u)))
    nv = math.sqrt(float(sum(b * b for b in v)))
    c = dot / (nu * nv)
    return min(1.0, max(-1.0, c))


def lmd_formula(L: float, R: float) -> float:
    return 5.0 * (R - L) + 5.0


def st_formula(L: float, R: float) -> float:
    return 3.0 * (L + R) + 1.0


def st_weighted_formula(L: float, R: float, alpha: float) -> float:
    return 6.0 * (alpha * L + (1.0 - alpha) * R) + 1.0


def mae(pred: list[float], gold: list[float]) -> float:
    return math.fsum(abs(p - g) for p, g in zip(pred, gold)) / len(pred)


def average_ranks(values: list[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x: list[float], y: list[float]) -> float:
    rx, ry = average_ranks(x), average_ranks(y)
    mx = math.fsum(rx) / len(rx)
    my = math.fsum(ry) / len(ry)
    dx = [r - mx for r in rx]
    dy = [r - my for r in ry]
    ssx = math.fsum(d * d for d in dx)
    ssy = math.fsum(d * d for d in dy)
    rho = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(ssx * ssy)
    return min(1.0, max(-1.0, rho))


# --- compound-vector construction --------------------------------------------

def targets(lmd_gold: float, st_gold: float) -> tuple[Fraction, Fraction]:
    """Cosine targets hit exactly would make predictions affine in the norms."""
    st_part = Fraction(11, 20) * (Fraction(st_gold) - 1) / 6
    lmd_part = Fraction(3, 5) * (Fraction(lmd_gold) - 5) / 10
    return st_part - lmd_part, st_part + lmd_part


def best_compound_vector(t_l: Fraction, t_r: Fraction) -> tuple[int, int, int, int]:
    """Integer (a, b, z, 0) minimizing the squared cosine-target error.

    With left=(2,0,0,0) and right=(0,2,0,0): L = a/|c| and R = b/|c|.
    Exact rational search keeps the choice deterministic.
    """
    best: tuple[Fraction, tuple[int, int, int, int]] | None = None
    for z in range(1, 17):
        for a in range(-16, 17):
            for b in range(-16, 17):
                nsq = a * a + b * b + z * z
                if nsq == 0:
                    continue
                # compare (a/n - t_l)^2 + (b/n - t_r)^2 without square roots:
                # expand to rational arithmetic over n^2
                err = (
                    Fraction(a * a + b * b, nsq)
                    - 2 * (a * t_l + b * t_r) / _sqrt_fraction(nsq)
                    + t_l * t_l + t_r * t_r
                )
                cand = (err, (a, b, z, 0))
                if best is None or cand[0] < best[0]:
                    best = cand
    assert best is not None
    return best[1]


_SQRT_CACHE: dict[int, Fraction] = {}


def _sqrt_fraction(nsq: int) -> Fraction:
    # high-precision rational sqrt; only feeds the argmin, not the goldens
    if nsq not in _SQRT_CACHE:
        _SQRT_CACHE[nsq] = Fraction(math.isqrt(nsq * 10**24), 10**12)
    return _SQRT_CACHE[nsq]


def build_vectors() -> dict[str, dict[int, tuple[int, ...]]]:
    """word -> layer -> integer vector for all 40 fixture words."""
    vectors: dict[str, dict[int, tuple[int, ...]]] = {}
    for compound, left, right, _, _ in TRIPLETS:
        vectors[left] = {ell: LEFT_VEC for ell in LAYERS}
        vectors[right] = {ell: RIGHT_VEC for ell in LAYERS}
        vectors[compound] = {}
        vectors[right + left] = {}  # reversed form

    for ell in LAYERS:
        perm = PERM_LAYER[ell]
        layer_vecs = []
        for i, (compound, _, _, _, _) in enumerate(TRIPLETS):
            lmd_gold, st_gold = TRIPLETS[perm[i]][3], TRIPLETS[perm[i]][4]
            t_l, t_r = targets(lmd_gold, st_gold)
            vec = best_compound_vector(t_l, t_r)
            vectors[compound][ell] = vec
            layer_vecs.append(vec)
        for i, (compound, left, right, _, _) in enumerate(TRIPLETS):
            vectors[right + left][ell] = layer_vecs[PERM_REVERSED[i]]
    return vectors


# --- golden computation -------------------------------------------------------

def compute_goldens(vectors: dict[str, dict[int, tuple[int, ...]]]) -> dict:
    tables: dict[str, dict[str, dict[str, float]]] = {}
    evals: dict[str, dict[str, dict[str, float | int]]] = {}
    reversed_rho: dict[str, dict[str, dict[str, float]]] = {}
    weighted: dict[str, dict[str, dict[str, float]]] = {}

    order = sorted(t[0] for t in TRIPLETS)  # evaluation iterates compounds sorted
    gold_by_compound = {t[0]: (t[3], t[4]) for t in TRIPLETS}

    rho_by_layer: dict[int, dict[str, float]] = {}
    mae_by_layer: dict[int, dict[str, float]] = {}

    for ell in LAYERS:
        table: dict[str, dict[str, float]] = {}
        for compound, left, right, _, _ in TRIPLETS:
            c_vec = vectors[compound][ell]
            L = cosine_int(vectors[left][ell], c_vec)
            R = cosine_int(vectors[right][ell], c_vec)
            table[compound] = {
                "L": L, "R": R,
                "lmd": lmd_formula(L, R), "st": st_formula(L, R),
            }
        tables[str(ell)] = table

        evals[str(ell)] = {}
        rho_by_layer[ell], mae_by_layer[ell] = {}, {}
        for measure, gi in (("lmd", 0), ("st", 1)):
            pred = [table[c][measure] for c in order]
            human = [gold_by_compound[c][gi] for c in order]
            m, r = mae(pred, human), spearman(pred, human)
            evals[str(ell)][measure] = {"mae": m, "rho": r, "n": N}
            rho_by_layer[ell][measure] = r
            mae_by_layer[ell][measure] = m

        # reversed compounds: same constituents, order-swapped compound word
        rev_table: dict[str, dict[str, float]] = {}
        for compound, left, right, _, _ in TRIPLETS:
            rc = right + left
            c_vec = vectors[rc][ell]
            L = cosine_int(vectors[left][ell], c_vec)
            R = cosine_int(vectors[right][ell], c_vec)
            rev_table[rc] = {"lmd": lmd_formula(L, R), "st": st_formula(L, R)}
        rev_order = sorted(rev_table)
        rev_gold = {t[2] + t[1]: (t[3], t[4]) for t in TRIPLETS}
        reversed_rho[str(ell)] = {}
        for measure, gi in (("lmd", 0), ("st", 1)):
            pred = [rev_table[c][measure] for c in rev_order]
            human = [rev_gold[c][gi] for c in rev_order]
            reversed_rho[str(ell)][measure] = {
                "rho_original": rho_by_layer[ell][measure],
                "rho_reversed": spearman(pred, human),
            }

        # weighted transparency grid
        human_st = [gold_by_compound[c][1] for c in order]
        for alpha in WEIGHTS:
            cells = weighted.setdefault(repr(alpha), {})
            pred = [
                st_weighted_formula(tables[str(ell)][c]["L"], tables[str(ell)][c]["R"], alpha)
                for c in order
            ]
            cells[str(ell)] = {
                "mae": mae(pred, human_st),
                "rho": spearman(pred, human_st),
                "n": N,
            }

    def argbest(per_layer: dict[int, float], larger: bool) -> int:
        best_layer, best = None, None
        for layer in sorted(per_layer):
            v = per_layer[layer]
            if best is None or (v > best if larger else v < best):
                best_layer, best = layer, v
        return best_layer  # type: ignore[return-value]

    best = {
        "lmd_rho": argbest({k: v["lmd"] for k, v in rho_by_layer.items()}, True),
        "st_rho": argbest({k: v["st"] for k, v in rho_by_layer.items()}, True),
        "lmd_mae": argbest({k: v["lmd"] for k, v in mae_by_layer.items()}, False),
        "st_mae": argbest({k: v["st"] for k, v in mae_by_layer.items()}, False),
    }
    return {
        "tables": tables,
        "eval": evals,
        "best": best,
        "reversed": reversed_rho,
        "weighted": weighted,
    }


# --- fixture writers ----------------------------------------------------------

def write_dataset() -> None:
    lines = ["compound,left,right,lmd,st"]
    for compound, left, right, lmd_gold, st_gold in TRIPLETS:
        lines.append(f"{compound},{left},{right},{lmd_gold},{st_gold}")
    (DATA / "triplets.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_dump(vectors: dict[str, dict[int, tuple[int, ...]]]) -> None:
    dump = DATA / "dump_fixture"
    dump.mkdir(parents=True, exist_ok=True)
    records = []
    for i, word in enumerate(sorted(vectors)):
        layers = [[float(x) for x in vectors[word][ell]] for ell in LAYERS]
        records.append(json.dumps({
            "word": word,
            "n_instances": 5 + (i * 7) % 90,
            "layers": layers,
        }, ensure_ascii=False))
    payload = "\n".join(records) + "\n"
    (dump / "records-00000.jsonl").write_text(payload, encoding="utf-8")
    checksum = hashlib.sha256(payload.encode("utf-8")).hexdigest()
    manifest = {
        "format_version": 1,
        "dim": DIM,
        "n_layers": len(LAYERS),
        "first_layer": 1,
        "setting": {"kind": "in_context"},
        "record_count": len(records),
        "files": {"records-00000.jsonl": checksum},
        "provenance": "fixture: hand-constructed 4-d integer vectors",
    }
    (dump / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def write_static_files() -> None:
    # 5-word demo file, dim 4
    demo = [
        ("hand", "0.1 0.2 0.3 0.4"),
        ("gun", "0.5 0.1 0.9 0.2"),
        ("handgun", "0.4 0.1 0.8 0.3"),
        ("war", "0.9 0.4 0.2 0.1"),
        ("time", "0.3 0.7 0.5 0.6"),
    ]
    (DATA / "static_demo.txt").write_text(
        "".join(f"{w} {v}\n" for w, v in demo), encoding="utf-8"
    )

    # 6-triplet dataset and a vector file covering only 4 of the 6 compounds
    six = [t for t in TRIPLETS if t[0] in
           ("handgun", "bodyguard", "wartime", "muskrat", "milestone", "snowball")]
    lines = ["compound,left,right,lmd,st"]
    for compound, left, right, lmd_gold, st_gold in six:
        lines.append(f"{compound},{left},{right},{lmd_gold},{st_gold}")
    (DATA / "triplets6.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    rng = random.Random(20)
    entries = []
    for compound, left, right, _, _ in six:
        entries.extend([left, right])
        if compound not in ("muskrat", "milestone"):  # the two absentees
            entries.append(compound)
    body = []
    for word in entries:
        comps = " ".join(f"{rng.uniform(0.05, 1.0):.3f}" for _ in range(DIM))
        body.append(f"{word} {comps}\n")
    (DATA / "static_partial.txt").write_text("".join(body), encoding="utf-8")


def write_corpus() -> None:
    lines: list[str] = []
    for k in range(260):
        lines.append(f"officer {k} placed the handgun in locker {k % 7} before roll call.")
    for k in range(3):
        lines.append(f"the museum wing {k} documents daily life in wartime.")
    for k in range(12):
        lines.append(f"the sun rose over ridge {k} and warmed the camp.")
    for k in range(30):
        lines.append(f"sunlight fades across meadow {k} long before dusk.")
    lines.extend(["a muskrat slipped into the reeds by the dam."] * 5)
    for k in range(4):
        lines.append(f"the war ended after {k + 2} hard years.")
    filler = 1000 - len(lines)
    for k in range(filler):
        lines.append(f"note {k}: the committee deferred item {k % 13} to the next session.")
    rng = random.Random(1234)
    rng.shuffle(lines)
    (DATA / "corpus_fixture.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_concreteness() -> None:
    # covers constituents and most compounds; three compounds are left out
    # and one entry is duplicated with an equal value
    missing = {"muskrat", "primrose", "cheapskate"}
    rows = []
    rng = random.Random(7)
    for compound, left, right, _, _ in TRIPLETS:
        for word in (compound, left, right):
            if word not in missing:
                rows.append(f"{word} {rng.uniform(1.5, 5.0):.2f}")
    rows.append(rows[1])  # duplicate with an equal value is legal
    (DATA / "concreteness.txt").write_text("\n".join(rows) + "\n", encoding="utf-8")


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    write_dataset()
    vectors = build_vectors()
    write_dump(vectors)
    goldens = compute_goldens(vectors)
    (DATA / "golden" ).mkdir(exist_ok=True)
    (DATA / "golden" / "fixture_golden.json").write_text(
        json.dumps(goldens, indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )
    write_static_files()
    write_corpus()
    write_concreteness()

    print("layer rho (lmd):", {k: round(v["lmd"]["rho"], 3) for k, v in goldens["eval"].items()})
    print("layer rho (st): ", {k: round(v["st"]["rho"], 3) for k, v in goldens["eval"].items()})
    print("best:", goldens["best"])
    print("reversed lmd rho:",
          {k: round(v["lmd"]["rho_reversed"], 3) for k, v in goldens["reversed"].items()})
    alpha_half = goldens["weighted"]["0.5"]
    print("alpha=0.5 rho == st rho:",
          all(alpha_half[str(l)]["rho"] == goldens["eval"][str(l)]["st"]["rho"] for l in LAYERS))


if __name__ == "__main__":
    main()
