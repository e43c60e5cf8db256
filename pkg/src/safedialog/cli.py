"""Command-line interface.

Exit codes: 1 usage, 2 I/O, 3 backend failure, 4 invariant violation.
"""
from __future__ import annotations

import csv
import json
import sys

import click

from . import corpus as corpus_mod
from . import evaluator as evaluator_mod
from . import vectorspace
from .errors import BackendError, SafedialogError
from .gateway import (
    AuditLog,
    BackendConfig,
    HttpBackend,
    MockBackend,
    ROLE_NAMES,
    RoleBindings,
    RoleClient,
    default_role_scripts,
)
from .loop import LoopConfig, MockLearner, run_loop
from .selector import AttributeSet


def load_bindings(path: str | None, audit: AuditLog | None = None) -> RoleBindings:
    """Bindings file: JSON map role -> {"type": "mock"} or an HTTP config.

    With no file, every role is a deterministic mock.
    """
    if path is None:
        return RoleBindings.all_mock(audit=audit)
    with open(path, encoding="utf-8") as fh:
        spec = json.load(fh)
    kwargs = {}
    for role in ROLE_NAMES:
        entry = spec.get(role, {"type": "mock"})
        if entry.get("type") == "mock":
            backend = MockBackend(default_role_scripts().get(role),
                                  model_id=f"mock-{role}")
        else:
            backend = HttpBackend(BackendConfig(
                endpoint=entry["endpoint"],
                model_id=entry.get("model_id", role),
                temperature=entry.get("temperature", 0.0),
                timeout=entry.get("timeout", 30.0),
                max_retries=entry.get("max_retries", 2),
                api_key_env=entry.get("api_key_env"),
            ))
        kwargs[role] = RoleClient(role, backend, audit)
    return RoleBindings(**kwargs)


def load_pools(path: str) -> corpus_mod.CorpusPools:
    with open(path, encoding="utf-8") as fh:
        result = corpus_mod.ingest_records(fh)
    for err in result.errors:
        click.echo(f"warning: {err}", err=True)
    return result.pools


@click.group()
def cli():
    """Safety-dialogue corpus, active-learning loop, evaluation, and service."""


@cli.command()
@click.argument("records", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), help="write the validated pool here")
def ingest(records, out):
    """Validate a line-delimited record file and report problems."""
    pools = load_pools(records)
    eligible = pools.eligible_unlabeled()
    click.echo(f"records: {len(pools.unlabeled)}  "
               f"selection-eligible: {len(eligible)}")
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            pools.dump(fh)


@cli.group()
def annotate():
    """Annotation utilities: agreement and dataset statistics."""


@annotate.command()
@click.argument("file_a", type=click.Path(exists=True))
@click.argument("file_b", type=click.Path(exists=True))
def kappa(file_a, file_b):
    """Cohen's kappa between two single-column label CSVs."""
    def read_labels(path):
        with open(path, encoding="utf-8") as fh:
            return [row[0] for row in csv.reader(fh) if row]
    k = corpus_mod.cohen_kappa(read_labels(file_a), read_labels(file_b))
    click.echo(f"{k:g}")


@annotate.command()
@click.argument("records", type=click.Path(exists=True))
@click.option("--histogram-out", type=click.Path(),
              help="write keyword histogram CSV here")
def stats(records, histogram_out):
    """Pool counts and the keyword histogram."""
    pools = load_pools(records)
    hist = corpus_mod.keyword_histogram(pools.unlabeled)
    click.echo(f"records: {len(pools.unlabeled)}  "
               f"eligible: {len(pools.eligible_unlabeled())}  "
               f"keywords: {len(hist)}")
    if histogram_out:
        with open(histogram_out, "w", encoding="utf-8", newline="") as fh:
            corpus_mod.write_histogram_csv(hist, fh)


@cli.command()
@click.argument("records", type=click.Path(exists=True))
@click.option("-m", "--clusters", type=int, default=50, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--dim", type=int, default=256, show_default=True)
@click.option("--out", type=click.Path(), help="write id->cluster JSON here")
def cluster(records, clusters, seed, dim, out):
    """Embed the eligible pool and k-means it into m clusters."""
    pools = load_pools(records)
    eligible = pools.eligible_unlabeled()
    embedder = vectorspace.HashingEmbedder(dim=dim)
    vectors = vectorspace.embed([r.effective_text() for r in eligible],
                                embedder)
    model = vectorspace.kmeans(vectors, m=clusters, seed=seed,
                               ids=[r.id for r in eligible])
    click.echo(f"clusters: {model.m}  inertia: {model.inertia:.6f}")
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(model.assignment, fh, sort_keys=True, indent=1)


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              required=True)
@click.option("--records", type=click.Path(exists=True), required=True)
@click.option("--bindings", "bindings_path", type=click.Path(exists=True))
@click.option("--checkpoint-dir", type=click.Path(file_okay=False))
@click.option("--resume", "resume_path", type=click.Path(exists=True),
              help="checkpoint file to resume from")
@click.option("--audit-log", type=click.Path())
def loop(config_path, records, bindings_path, checkpoint_dir, resume_path,
         audit_log):
    """Run the active-learning loop."""
    import os
    with open(config_path, encoding="utf-8") as fh:
        config = LoopConfig.from_dict(json.load(fh))
    pools = load_pools(records)
    if resume_path:
        _apply_resume(pools, resume_path)
    audit_fh = open(audit_log, "w", encoding="utf-8") if audit_log else None
    audit = AuditLog(audit_fh) if audit_fh else None
    bindings = load_bindings(bindings_path, audit)
    if checkpoint_dir:
        os.makedirs(checkpoint_dir, exist_ok=True)
    try:
        state = run_loop(pools, config, bindings, MockLearner(),
                         checkpoint_dir=checkpoint_dir)
    finally:
        if audit_fh:
            audit_fh.close()
    click.echo(f"iterations: {state.iteration}  labeled: {state.labeled_count}"
               f"  remaining budget: {state.remaining_budget}")


def _apply_resume(pools, checkpoint_path):
    """Replay a checkpoint's labeled examples into the pools."""
    from .dialogue import Conversation
    from .loop import LabeledExample
    from .relations import CoherenceAnnotation
    with open(checkpoint_path, encoding="utf-8") as fh:
        ckpt = json.load(fh)
    for ex in ckpt["labeled_examples"]:
        record = pools.get(ex["record_id"])
        pools.move_to_labeled(LabeledExample(
            record=record,
            annotation=CoherenceAnnotation.from_dict(ex["annotation"]),
            teacher_dialogue=Conversation.from_dict(ex["teacher_dialogue"]),
            iteration=ex["iteration"],
        ))


@cli.command()
@click.option("--records", type=click.Path(exists=True), required=True)
@click.option("--split", "split_path", type=click.Path(exists=True),
              required=True, help="JSON file with name/record_ids/seed")
@click.option("--bindings", "bindings_path", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), help="write the JSON report here")
@click.option("--label", default="learner", show_default=True)
def evaluate(records, split_path, bindings_path, out, label):
    """Evaluate the learner on a test split and emit the metric report."""
    pools = load_pools(records)
    with open(split_path, encoding="utf-8") as fh:
        d = json.load(fh)
    split = corpus_mod.DatasetSplit(d["name"], d["record_ids"],
                                    d.get("seed", 0))
    bindings = load_bindings(bindings_path)
    report = evaluator_mod.evaluate_split(split, pools, bindings,
                                          AttributeSet(), model_label=label)
    click.echo(report.to_table())
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())


@cli.command()
@click.option("--records", type=click.Path(exists=True), required=True)
@click.option("--bindings", "bindings_path", type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8400, show_default=True)
@click.option("--auth-token", default=None)
@click.option("--static-path", type=click.Path(exists=True, file_okay=False))
def serve(records, bindings_path, host, port, auth_token, static_path):
    """Run the HTTP service."""
    import uvicorn

    from .service import ServiceConfig, create_app
    pools = load_pools(records)
    bindings = load_bindings(bindings_path)
    app = create_app(pools, bindings,
                     ServiceConfig(auth_token=auth_token,
                                   static_path=static_path))
    uvicorn.run(app, host=host, port=port)


@cli.command()
@click.option("--server", default="http://127.0.0.1:8400", show_default=True)
@click.option("--image", "image_path", type=click.Path(exists=True),
              required=True)
@click.option("--auth-token", default=None)
def chat(server, image_path, auth_token):
    """Terminal REPL against a running service's session endpoints."""
    import base64

    import requests
    headers = {"X-Auth-Token": auth_token} if auth_token else {}
    with open(image_path, "rb") as fh:
        payload = base64.b64encode(fh.read()).decode()
    resp = requests.post(f"{server}/sessions",
                         json={"image": payload}, headers=headers)
    if resp.status_code not in (200, 201):
        raise BackendError(f"server said {resp.status_code}: {resp.text}")
    body = resp.json()
    if body.get("status") == "idle":
        click.echo("no safety violation detected; nothing to discuss")
        return
    session_id = body["session_id"]
    click.echo(f"agent: {body['first_turn']}")
    while True:
        try:
            text = click.prompt("you", prompt_suffix="> ")
        except (EOFError, click.Abort):
            break
        resp = requests.post(f"{server}/sessions/{session_id}/messages",
                             json={"text": text}, headers=headers)
        if resp.status_code != 200:
            raise BackendError(f"server said {resp.status_code}: {resp.text}")
        click.echo(f"agent: {resp.json()['agent_text']}")
    requests.delete(f"{server}/sessions/{session_id}", headers=headers)


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as e:
        click.echo(f"usage error: {e}", err=True)
        sys.exit(1)
    except click.Abort:
        sys.exit(1)
    except (OSError, json.JSONDecodeError) as e:
        click.echo(f"I/O error: {e}", err=True)
        sys.exit(2)
    except BackendError as e:
        click.echo(f"backend error: {e}", err=True)
        sys.exit(3)
    except (SafedialogError, ValueError) as e:
        click.echo(f"invariant violation: {e}", err=True)
        sys.exit(4)
    sys.exit(0)


if __name__ == "__main__":
    main()
