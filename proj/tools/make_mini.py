#!/usr/bin/env python3
"""Regenerates the bundled mini dataset under data/mini.

Three questions, 40 participants, 3 models. Each question has three planted
opinion groups; votes follow the group's prototype with some noise, and
ratings follow a per-(group, model) affinity. Output is deterministic.
"""
import csv
import json
import os
import random
import sys

OUT = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "data", "mini")
rng = random.Random(20251018)


def pick(seq):
    return seq[int(rng.random() * len(seq))]


VOCAB = {
    "age_band": ["18-29", "30-44", "45-64", "65+"],
    "sex": ["female", "male"],
    "ethnicity": ["white", "black", "asian", "hispanic", "mixed", "other"],
    "ethnicity_simplified": ["white", "black", "asian", "hispanic", "other"],
    "party": ["democrat", "republican", "independent"],
}
SIMPLE = {"white": "white", "black": "black", "asian": "asian", "hispanic": "hispanic", "mixed": "other", "other": "other"}
MODELS = ["alpha", "beta", "gamma"]
QUESTIONS = [
    ("q01", "model_slant", "Guns", "Should gun laws in the United States be made stricter?"),
    ("q02", "prism", "Work", "Is it better to have a stable job or to follow your passion?"),
    ("q03", "prism", "Family", "How much should adult children be expected to care for their parents?"),
]
VIEWS = {
    "q01": ["stricter background checks are needed", "existing laws should be enforced first",
            "self-defense rights must not be restricted"],
    "q02": ["stability protects your family", "passion is what keeps people going",
            "it depends on your stage of life"],
    "q03": ["children owe their parents care", "care should be shared with the state",
            "parents should not expect anything"],
}
STANCES = ["support", "oppose", "mixed"]
# Mean rating a group gives each model; rows are groups, columns models.
AFFINITY = {
    "q01": [[4.6, 3.4, 4.1], [3.9, 4.4, 2.8], [2.4, 4.5, 3.9]],
    "q02": [[4.4, 4.2, 3.1], [4.3, 2.7, 4.5], [3.2, 4.6, 4.2]],
    "q03": [[4.5, 3.8, 3.6], [2.9, 4.4, 4.3], [4.1, 3.0, 4.4]],
}
N_PARTICIPANTS = 40
SEEDS_PER_QUESTION = 3
VOTES_PER_PARTICIPANT = 15

participants = []
for i in range(1, N_PARTICIPANTS + 1):
    eth = pick(VOCAB["ethnicity"])
    participants.append({
        "id": f"p{i:03d}",
        "age_band": pick(VOCAB["age_band"]),
        "sex": pick(VOCAB["sex"]),
        "ethnicity": eth,
        "ethnicity_simplified": SIMPLE[eth],
        "party": pick(VOCAB["party"]),
    })

statements, votes, ratings, stances, responses = [], [], [], [], []
for qid, source, topic, text in QUESTIONS:
    groups = {p["id"]: int(rng.random() * 3) for p in participants}
    stmts = []
    for s in range(SEEDS_PER_QUESTION):
        stmts.append({"id": f"{qid}-s{s + 1:02d}", "question_id": qid, "author_id": "seed",
                      "text": f"Seed statement {s + 1}: {VIEWS[qid][s]}.", "lean": s})
    for p in participants:
        g = groups[p["id"]]
        stmts.append({"id": f"{qid}-{p['id']}", "question_id": qid, "author_id": p["id"],
                      "text": f"In my view {VIEWS[qid][g]}, speaking as participant {p['id']}.", "lean": g})
    # Prototype vote of each group on each statement: agree with own lean.
    for p in participants:
        g = groups[p["id"]]
        pool = [s for s in stmts if s["author_id"] != p["id"]]
        rng.shuffle(pool)
        for s in pool[:VOTES_PER_PARTICIPANT]:
            value = 1 if s["lean"] == g else -1
            u = rng.random()
            if u < 0.08:
                value = 0
            elif u < 0.13:
                value = -value
            votes.append({"voter_id": p["id"], "statement_id": s["id"],
                          "value": {1: "agree", 0: "neutral", -1: "disagree"}[value]})
        stances.append({"participant_id": p["id"], "question_id": qid, "stance": STANCES[g]})
        for mi, m in enumerate(MODELS):
            r = AFFINITY[qid][g][mi] + (rng.random() - 0.5) * 1.6
            ratings.append({"participant_id": p["id"], "question_id": qid, "model_id": m,
                            "rating": max(1, min(5, int(round(r))))})
    for s in stmts:
        del s["lean"]
    statements.extend(stmts)
    for mi, m in enumerate(MODELS):
        covered = [VIEWS[qid][g] for g in range(3) if AFFINITY[qid][g][mi] >= 4.0]
        body = "; ".join(covered) if covered else "there is no single answer"
        responses.append({"question_id": qid, "model_id": m,
                          "text": f"[{m}] On '{text}' some argue that {body}."})

os.makedirs(OUT, exist_ok=True)


def write(name, header, rows):
    with open(os.path.join(OUT, name), "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=header, lineterminator="\n")
        w.writeheader()
        for r in sorted(rows, key=lambda r: tuple(str(r[h]) for h in header)):
            w.writerow(r)


write("participants.csv", ["id", "age_band", "sex", "ethnicity", "ethnicity_simplified", "party"], participants)
write("questions.csv", ["id", "source", "topic", "text"],
      [{"id": q, "source": s, "topic": t, "text": x} for q, s, t, x in QUESTIONS])
write("statements.csv", ["id", "question_id", "author_id", "text"], statements)
write("votes.csv", ["voter_id", "statement_id", "value"], votes)
write("ratings.csv", ["participant_id", "question_id", "model_id", "rating"], ratings)
write("stances.csv", ["participant_id", "question_id", "stance"], stances)
with open(os.path.join(OUT, "responses.json"), "w") as f:
    json.dump(sorted(responses, key=lambda r: (r["question_id"], r["model_id"])), f, indent=2)
    f.write("\n")
manifest = {
    "version": "mini-1",
    "files": {"participants": "participants.csv", "questions": "questions.csv",
              "statements": "statements.csv", "votes": "votes.csv", "ratings": "ratings.csv",
              "responses": "responses.json", "stances": "stances.csv"},
    "vocabularies": VOCAB,
}
with open(os.path.join(OUT, "manifest.json"), "w") as f:
    json.dump(manifest, f, indent=2)
    f.write("\n")
