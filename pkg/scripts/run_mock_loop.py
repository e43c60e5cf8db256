#!/usr/bin/env python3
"""End-to-end mock experiment: ingest -> cluster -> active loop -> evaluate.

Runs entirely on deterministic mock backends, so two invocations with the
same seed produce byte-identical artifacts in the output directory.
"""
import argparse
import json
import os

from safedialog.corpus import build_basic_splits, ingest_records
from safedialog.evaluator import evaluate_split
from safedialog.gateway import AuditLog, RoleBindings
from safedialog.loop import LoopConfig, MockLearner, run_loop
from safedialog.selector import AttributeSet


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("records", help="JSONL pool (see make_synthetic_pool.py)")
    ap.add_argument("--out", default="mock_run", help="output directory")
    ap.add_argument("--budget", type=int, default=40)
    ap.add_argument("--batch", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--test-size", type=int, default=20)
    args = ap.parse_args()

    os.makedirs(args.out, exist_ok=True)
    with open(args.records, encoding="utf-8") as fh:
        result = ingest_records(fh)
    for err in result.errors:
        print(f"warning: {err}")
    pools = result.pools

    audit_fh = open(os.path.join(args.out, "audit.jsonl"), "w",
                    encoding="utf-8")
    bindings = RoleBindings.all_mock(audit=AuditLog(audit_fh))

    splits = build_basic_splits(
        pools, {"train": args.budget, "test": args.test_size}, args.seed)
    config = LoopConfig(budget_B=args.budget, batch_N=args.batch,
                        clusters_m=args.batch, seed=args.seed)
    ck = os.path.join(args.out, "checkpoints")
    os.makedirs(ck, exist_ok=True)
    state = run_loop(pools, config, bindings, MockLearner(),
                     checkpoint_dir=ck)
    print(f"loop: {state.iteration} iterations, "
          f"{state.labeled_count} labeled, "
          f"{state.remaining_budget} budget left")

    report = evaluate_split(splits["test"], pools, bindings, AttributeSet())
    with open(os.path.join(args.out, "report.json"), "w",
              encoding="utf-8") as fh:
        fh.write(report.to_json())
    with open(os.path.join(args.out, "test_split.json"), "w",
              encoding="utf-8") as fh:
        json.dump({"name": splits["test"].name,
                   "record_ids": splits["test"].record_ids,
                   "seed": splits["test"].seed}, fh, sort_keys=True)
    audit_fh.close()
    print(report.to_table())


if __name__ == "__main__":
    main()
