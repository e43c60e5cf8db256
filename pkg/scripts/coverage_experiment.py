#!/usr/bin/env python3
"""Compare keyword coverage of clustered vs random selection over many trials.

Reads a pool (ideally from make_synthetic_pool.py), selects one record per
k-means cluster and the same number uniformly at random, and reports how
often the clustered split covers at least as many distinct keywords.
"""
import argparse
import random

from safedialog import vectorspace
from safedialog.corpus import ingest_records
from safedialog.selector import random_select


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("records")
    ap.add_argument("--select", type=int, default=200)
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--dim", type=int, default=64)
    args = ap.parse_args()

    with open(args.records, encoding="utf-8") as fh:
        pools = ingest_records(fh).pools
    records = pools.eligible_unlabeled()
    ids = [r.id for r in records]
    kw_of = {r.id: r.keywords for r in records}

    vectors = vectorspace.embed([r.effective_text() for r in records],
                                vectorspace.HashingEmbedder(dim=args.dim))

    wins = strict = 0
    for trial in range(args.trials):
        rng = random.Random(trial)
        model = vectorspace.kmeans(vectors, m=args.select, seed=trial,
                                   ids=ids, n_init=1, max_iter=50)
        clustered = [rng.choice(sorted(members))
                     for members in model.members().values()]
        randomized = random_select(ids, args.select, seed=trial)
        cov_c = len(set().union(*(kw_of[r] for r in clustered)))
        cov_r = len(set().union(*(kw_of[r] for r in randomized)))
        wins += cov_c >= cov_r
        strict += cov_c > cov_r
        print(f"trial {trial:3d}: clustered={cov_c:3d} random={cov_r:3d}")
    print(f"clustered >= random in {wins}/{args.trials} trials, "
          f"strictly greater in {strict}")


if __name__ == "__main__":
    main()
