#!/usr/bin/env python3
"""Writes the bundled synthetic corpus, vector sidecar and SE inventory to data/."""
import argparse
import json
import math
import random
import re
from pathlib import Path

PROBLEMS = [
    ("pneumonia", ["C0032285"], ["pna"]),
    ("hypertension", ["C0020538"], ["htn", "high blood pressure"]),
    ("atrial fibrillation", ["C0004238"], ["afib"]),
    ("acute kidney injury", ["C0022660"], ["aki"]),
    ("congestive heart failure", ["C0018802"], ["chf"]),
    ("urinary tract infection", ["C0042029"], ["uti"]),
    ("diabetes mellitus", ["C0011849"], ["diabetes"]),
    ("chest pain", ["C0008031"], []),
    ("sepsis", ["C0243026"], []),
    ("anemia", ["C0002871"], []),
    ("hyponatremia", ["C0020625"], []),
    ("delirium", ["C0011206"], []),
]
TREATMENTS = [
    ("ceftriaxone", ["C0007561"], []),
    ("vancomycin", ["C0042313"], ["vanc"]),
    ("furosemide", ["C0016860"], ["lasix"]),
    ("metoprolol", ["C0025859"], []),
    ("insulin", ["C0021641"], []),
    ("heparin drip", ["C0019134"], ["heparin"]),
    ("normal saline", ["C0445115"], ["ivf"]),
    ("aspirin", ["C0004057"], []),
    ("packed red blood cells", ["C0086591"], ["prbc"]),
    ("lisinopril", ["C0065374"], []),
]
TESTS = [
    ("white blood cell count", ["C0023508"], ["wbc"]),
    ("chest x-ray", ["C0039985"], ["cxr"]),
    ("blood cultures", ["C0200949"], []),
    ("creatinine", ["C0010294"], ["cr"]),
    ("troponin", ["C0041199"], []),
    ("echocardiogram", ["C0013516"], ["echo"]),
    ("urinalysis", ["C0042014"], ["ua"]),
    ("hemoglobin", ["C0019046"], ["hgb"]),
    ("ct scan", ["C0040405"], []),
    ("lactate", ["C0376261"], []),
]

SOURCE_TEMPLATES = {
    "PROBLEM": [
        "Patient presented with {e}.",
        "Assessment notable for {e}.",
        "Concern for {e} on exam.",
        "History of {e} noted.",
    ],
    "TREATMENT": [
        "Started on {e}.",
        "Continued {e} overnight.",
        "Received {e} in the emergency department.",
        "Plan to titrate {e}.",
    ],
    "TEST": [
        "{E} was obtained.",
        "Repeat {e} pending.",
        "{E} reviewed with the team.",
        "Trending {e} daily.",
    ],
}
FILLER = [
    "Vitals stable overnight.",
    "Tolerating diet without issue.",
    "Ambulating with assistance.",
    "Family updated at bedside.",
    "No acute events.",
    "Pain controlled on current regimen.",
    "Social work consulted for discharge planning.",
]
REF_TEMPLATES = [
    "The patient was admitted with {a} and treated with {b}.",
    "{A} improved after {b}.",
    "Course was complicated by {a} which was monitored with {b}.",
    "{A} was managed and {b} was followed.",
    "Given {a}, the team started {b}.",
]
SECTIONS = ["HPI", "Assessment and Plan", "Labs", "Hospital Course"]
TITLES = ["Admission Note", "Progress Note", "Nursing Note", "Discharge Note"]

TYPES = {"PROBLEM": PROBLEMS, "TREATMENT": TREATMENTS, "TEST": TESTS}


def cap(text):
    return text[0].upper() + text[1:]


class Doc:
    """Accumulates text and mention spans with exact byte offsets."""

    def __init__(self):
        self.text = ""
        self.mentions = []

    def add(self, template, entities):
        parts = template.split("{")
        out = parts[0]
        for part, (surface, stype, codes) in zip(parts[1:], entities):
            key, rest = part.split("}", 1)
            shown = cap(surface) if key.isupper() else surface
            start = len(self.text) + len(out)
            out += shown
            self.mentions.append((start, start + len(shown), shown, stype, codes))
            out += rest
        self.text += out
        return out


def surface_of(entry, rng, synonyms=True):
    name, codes, syns = entry
    if synonyms and syns and rng.random() < 0.35:
        return rng.choice(syns), []
    return name, codes


def make_admission(idx, rng):
    aid = "adm%06d" % (idx + 1)
    chosen = {t: rng.sample(pool, k=4) for t, pool in TYPES.items()}
    # Salient concepts appear in the reference; the rest stay source-only.
    salient = {t: chosen[t][:2] for t in TYPES}
    n_notes = rng.randint(2, 4)
    total_days = n_notes + rng.randint(0, 2)
    notes, mentions = [], []
    mid = 0
    source_sentences = []
    for n in range(n_notes):
        note_id = "%s-n%d" % (aid, n + 1)
        day = 1 if n == 0 else (total_days if n == n_notes - 1 else min(total_days - 1, n + 1))
        sections = []
        note_doc = Doc()
        for s_i, header in enumerate(rng.sample(SECTIONS, k=2)):
            if s_i:
                note_doc.text += "\n\n"
            note_doc.text += header + "\n"
            lines = []
            for _ in range(rng.randint(3, 5)):
                if rng.random() < 0.2:
                    line = rng.choice(FILLER)
                    note_doc.text += line
                else:
                    t = rng.choice(list(TYPES))
                    entry = rng.choice(chosen[t])
                    surface, codes = surface_of(entry, rng)
                    line = note_doc.add(rng.choice(SOURCE_TEMPLATES[t]), [(surface, t, codes)])
                lines.append(line)
                source_sentences.append(line)
                note_doc.text += " "
            note_doc.text = note_doc.text[:-1]
            sections.append({"header": header, "text": " ".join(lines)})
        for start, end, text, stype, codes in note_doc.mentions:
            mid += 1
            mentions.append({"mention_id": "%s-m%03d" % (aid, mid), "doc_ref": note_id, "start": start,
                             "end": end, "text": text, "semantic_type": stype, "codes": codes})
        notes.append({"note_id": note_id, "title": TITLES[min(n, len(TITLES) - 1)],
                      "timestamp": "2150-03-%02dT%02d:00:00" % (1 + n, 8 + n), "day_index": day,
                      "total_days": total_days, "sections": sections})

    ref = Doc()
    ref_sentences = []
    for k in range(rng.randint(3, 5)):
        if k and rng.random() < 0.35 and source_sentences:
            # Verbatim copy of a source sentence; mentions re-found by surface.
            line = rng.choice(source_sentences)
            if ref.text:
                ref.text += " "
            base = len(ref.text)
            ref.text += line
            for etype, pool in TYPES.items():
                for entry in chosen[etype]:
                    for surf in [entry[0]] + entry[2]:
                        for variant in (surf, cap(surf)):
                            hit = re.search(r"(?<![A-Za-z])" + re.escape(variant) + r"(?![A-Za-z])", line)
                            pos = hit.start() if hit else -1
                            if pos >= 0 and not any(base + pos < e and s < base + pos + len(variant)
                                                    for s, e, *_ in ref.mentions):
                                ref.mentions.append((base + pos, base + pos + len(variant), variant, etype,
                                                     entry[1] if surf == entry[0] else []))
            ref_sentences.append(line)
            continue
        a_type, b_type = rng.choice([("PROBLEM", "TREATMENT"), ("PROBLEM", "TEST"), ("TREATMENT", "TEST")])
        a = rng.choice(salient[a_type])
        # Occasionally an entity the notes never mention.
        b_pool = salient[b_type] if rng.random() < 0.85 else [e for e in TYPES[b_type] if e not in chosen[b_type]]
        b = rng.choice(b_pool)
        sa, ca = surface_of(a, rng)
        sb, cb = surface_of(b, rng)
        if ref.text:
            ref.text += " "
        ref_sentences.append(ref.add(rng.choice(REF_TEMPLATES), [(sa, a_type, ca), (sb, b_type, cb)]))
    ref.mentions.sort()
    for start, end, text, stype, codes in ref.mentions:
        mid += 1
        mentions.append({"mention_id": "%s-m%03d" % (aid, mid), "doc_ref": "REFERENCE", "start": start,
                         "end": end, "text": text, "semantic_type": stype, "codes": codes})

    record = {"admission_id": aid, "notes": notes, "reference": ref.text, "mentions": mentions}
    if idx % 2 == 0:
        # Lead baseline: the first sentence of each note.
        record["generated"] = {"lead": " ".join(n["sections"][0]["text"].split(". ")[0].rstrip(".") + "."
                                                for n in notes)}
    return record


def unit(rng, dim):
    v = [rng.gauss(0, 1) for _ in range(dim)]
    norm = math.sqrt(sum(x * x for x in v))
    return [x / norm for x in v]


def with_cosine(base, cos, rng):
    """A unit vector at exactly `cos` from unit vector `base`."""
    noise = unit(rng, len(base))
    dot = sum(a * b for a, b in zip(noise, base))
    ortho = [n - dot * b for n, b in zip(noise, base)]
    norm = math.sqrt(sum(x * x for x in ortho))
    ortho = [x / norm for x in ortho]
    sin = math.sqrt(1 - cos * cos)
    return [cos * b + sin * o for b, o in zip(base, ortho)]


def write_vectors(path, rng, dim=16):
    rows = {}
    for pool in TYPES.values():
        for name, _, syns in pool:
            base = unit(rng, dim)
            rows[name] = base
            for i, syn in enumerate(syns):
                rows[syn] = with_cosine(base, 0.9 if i == 0 else 0.76, rng)
    for word in {w for pool in TYPES.values() for name, _, syns in pool for t in [name] + syns for w in t.split()}:
        rows.setdefault(word, unit(rng, dim))
    with open(path, "w") as f:
        f.write("dim %d\n" % dim)
        for key in sorted(rows):
            f.write(key + "\t" + " ".join("%.8f" % x for x in rows[key]) + "\n")


def write_inventory(path, corpus):
    rows = []
    for rec in corpus[:5]:
        summary = rec.get("generated", {}).get("lead") or rec["reference"]
        # Sentences split at ". " followed by an uppercase letter, as the service does.
        sentences, start = [], 0
        for i in range(len(summary)):
            if summary[i] == "." and i + 2 < len(summary) and summary[i + 1] == " " and summary[i + 2].isupper():
                sentences.append(summary[start:i + 1])
                start = i + 2
        sentences.append(summary[start:])
        n = 0
        for s_i, sentence in enumerate(sentences):
            words = sentence.rstrip(".").split(" ")
            offset = 0
            for w_i, word in enumerate(words):
                if w_i % 2 == 0 and len(word) > 3:
                    n += 1
                    rows.append({"admission_id": rec["admission_id"], "se_id": "%s-se%02d" % (rec["admission_id"], n),
                                 "sentence_index": s_i, "start": offset, "end": offset + len(word), "text": word})
                offset += len(word) + 1
    with open(path, "w") as f:
        for r in rows:
            f.write(json.dumps(r) + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data"))
    ap.add_argument("--seed", type=int, default=13)
    ap.add_argument("--admissions", type=int, default=20)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus = [make_admission(i, rng) for i in range(args.admissions)]
    with open(out / "mini_corpus.jsonl", "w") as f:
        for rec in corpus:
            f.write(json.dumps(rec, sort_keys=True) + "\n")
    write_vectors(out / "vectors.txt", random.Random(args.seed + 1))
    write_inventory(out / "se_inventory.jsonl", corpus)


if __name__ == "__main__":
    main()
