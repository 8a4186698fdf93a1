#!/usr/bin/env python3
"""Regenerates the bundled synthetic corpora and word-vector table.

Six news topics with mostly disjoint vocabularies plus shared filler words.
Output is deterministic for a fixed seed.
"""
import argparse
import json
import random
from pathlib import Path

TOPICS = {
    "water": ["freshwater", "irrigation", "drought", "reservoir", "rainfall", "river", "aquifer", "farmers",
              "crops", "climate", "flooding", "wetlands", "conservation", "groundwater", "dam"],
    "gaming": ["xbox", "microsoft", "gaming", "console", "playstation", "studio", "developers", "software",
               "graphics", "release", "players", "multiplayer", "cloud", "chip", "technology"],
    "football": ["football", "league", "striker", "goal", "match", "coach", "stadium", "season", "transfer",
                 "championship", "midfielder", "penalty", "fans", "referee", "tournament"],
    "oil": ["oil", "prices", "barrel", "crude", "opec", "markets", "investors", "inflation", "exports",
            "refinery", "stocks", "economy", "trade", "supply", "demand"],
    "outbreak": ["virus", "outbreak", "vaccine", "hospital", "patients", "infections", "doctors", "health",
                 "clinic", "symptoms", "cases", "treatment", "disease", "nurses", "quarantine"],
    "election": ["election", "parliament", "voters", "ballot", "candidate", "campaign", "minister", "coalition",
                 "opposition", "polls", "senate", "president", "government", "vote", "constituency"],
}

FILLER = ["report", "officials", "week", "people", "region", "announced", "local", "national", "percent",
          "million", "statement", "sources", "country", "city", "thursday", "monday", "new", "major"]

# Taxonomy label words that should land near a topic in the word-vector table.
LABEL_WORDS = {
    "environment": "water",
    "science": "gaming",
    "technology": "gaming",
    "sport": "football",
    "economy": "oil",
    "business": "oil",
    "finance": "oil",
    "health": "outbreak",
    "politics": "election",
}
OTHER_LABEL_WORDS = ["arts", "culture", "entertainment", "media", "crime", "law", "justice", "disaster",
                     "accident", "emergency", "incident", "education", "human", "interest", "labour",
                     "lifestyle", "leisure", "religion", "society", "weather", "conflict", "war", "peace"]


def make_doc(rng, topic, n_words):
    vocab = TOPICS[topic]
    words = []
    for _ in range(n_words):
        r = rng.random()
        if r < 0.72:
            words.append(rng.choice(vocab))
        elif r < 0.95:
            words.append(rng.choice(FILLER))
        else:
            other = rng.choice([t for t in TOPICS if t != topic])
            words.append(rng.choice(TOPICS[other]))
    words[0] = words[0].capitalize()
    return " ".join(words) + "."


def write_corpus(path, n_docs, seed, prefix):
    rng = random.Random(seed)
    topics = list(TOPICS)
    with open(path, "w", encoding="utf-8") as out:
        for i in range(n_docs):
            topic = topics[i % len(topics)]
            doc = {
                "id": f"{prefix}-{i:04d}",
                "text": make_doc(rng, topic, rng.randint(25, 40)),
                "url": f"https://news.example/{topic}/{i}",
                "date": f"2024-03-{1 + i % 28:02d}T00:00:00",
                "source": f"wire{i % 4}",
            }
            out.write(json.dumps(doc, sort_keys=True) + "\n")


def write_wordvec(path, dim, seed):
    rng = random.Random(seed)

    def unit(v):
        n = sum(x * x for x in v) ** 0.5
        return [x / n for x in v]

    centers = {t: unit([rng.gauss(0, 1) for _ in range(dim)]) for t in TOPICS}
    rows = {}
    for topic, words in TOPICS.items():
        for w in words:
            rows.setdefault(w, [c + rng.gauss(0, 0.25) for c in centers[topic]])
    for w in FILLER + OTHER_LABEL_WORDS:
        rows.setdefault(w, [rng.gauss(0, 0.3) for _ in range(dim)])
    for w, topic in LABEL_WORDS.items():
        rows[w] = [c + rng.gauss(0, 0.2) for c in centers[topic]]
    with open(path, "w", encoding="utf-8") as out:
        for w in sorted(rows):
            out.write(w + " " + " ".join(f"{x:.6f}" for x in rows[w]) + "\n")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--data-dir", default=str(Path(__file__).resolve().parent.parent / "data"))
    ap.add_argument("--seed", type=int, default=20240301)
    args = ap.parse_args()
    data = Path(args.data_dir)
    (data / "corpora").mkdir(parents=True, exist_ok=True)
    (data / "wordvec").mkdir(parents=True, exist_ok=True)
    write_corpus(data / "corpora" / "synthetic_200.jsonl", 200, args.seed, "s200")
    write_corpus(data / "corpora" / "synthetic_300.jsonl", 300, args.seed + 1, "s300")
    write_wordvec(data / "wordvec" / "synthetic_50d.txt", 50, args.seed + 2)


if __name__ == "__main__":
    main()
