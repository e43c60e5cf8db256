#!/usr/bin/env python3
"""Generate a synthetic safety-violation pool with Zipf-skewed keywords.

Each record's violation text is dominated by its keyword so that the hashing
embedder clusters the pool roughly by keyword — handy for selection and
coverage experiments without any real data.
"""
import argparse
import json
import random

TEMPLATES = [
    "{kw} left unattended near the {place}",
    "{kw} balanced on the edge of the {place}",
    "{kw} blocking the path to the {place}",
    "{kw} within reach of children by the {place}",
]
PLACES = ["stove", "counter", "doorway", "sink", "workbench", "stairs"]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", help="output JSONL path")
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--keywords", type=int, default=30)
    ap.add_argument("--zipf", type=float, default=1.2,
                    help="Zipf exponent for keyword frequency skew")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    keywords = [f"hazard{k:02d}" for k in range(args.keywords)]
    weights = [1.0 / (k + 1) ** args.zipf for k in range(args.keywords)]
    with open(args.out, "w", encoding="utf-8") as fh:
        for i in range(args.n):
            kw = rng.choices(keywords, weights=weights)[0]
            template = rng.choice(TEMPLATES)
            text = template.format(kw=" ".join([kw] * 4),
                                   place=rng.choice(PLACES))
            fh.write(json.dumps({
                "id": f"rec{i:04d}",
                "image_uri": f"file:///synthetic/{i:04d}.jpg",
                "violation_text": f"{text} (hazard marker rec{i:04d})",
                "source_title": f"synthetic scene {i}",
                "keywords": [kw],
            }, sort_keys=True) + "\n")
    print(f"wrote {args.n} records with {args.keywords} keywords to {args.out}")


if __name__ == "__main__":
    main()
