"""Batch front door: register datasets, run every analytic headlessly,
export JSON/TSV artifacts, and launch the HTTP service.

JSON outputs are byte-identical to the corresponding service payloads for
matching parameters. Exit codes: 0 success, 1 data/computation error with
context on stderr, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import views
from .datamodel import load_bundle, predictions_to_lines, save_predictions
from .errors import ConsistencyError, DataError, FormatError, SolverError
from .metrics import FilterSpec, build_confusion
from .probe import ProbeConfig, probe_layer
from .seriation import (ALGORITHMS, build_hierarchy_recursive, partition_blocks,
                        seriate)


class CliError(Exception):
    """Data or computation failure reported with exit code 1."""


def _write_out(data: bytes, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    else:
        Path(out).write_bytes(data)


def _emit(payload: dict, fmt: str, out: str | None, tsv_fn=None) -> None:
    if fmt == "tsv":
        if tsv_fn is None:
            raise CliError("this command has no TSV representation; use --format json")
        _write_out(tsv_fn(payload).encode("utf-8"), out)
    else:
        _write_out(views.canonical_json_bytes(payload), out)


def _bundle(args):
    return load_bundle(args.dataset)


def _set_id(bundle, value):
    if value is not None:
        bundle.eval_set(value)
        return value
    return bundle.only_set_id()


def _group_id(bundle, value):
    if value in (None, "root"):
        return bundle.hierarchy.root.group_id
    gid = int(value)
    bundle.hierarchy.node(gid)
    return gid


def _order_for(bundle, eval_set, order_arg):
    if order_arg in (None, "hierarchy"):
        return list(bundle.hierarchy.leaf_order)
    payload = json.loads(Path(order_arg).read_text(encoding="utf-8"))
    order = payload["order"] if isinstance(payload, dict) else payload
    return [int(c) for c in order]


def _parse_range(text):
    if text is None:
        return None
    lo, hi = (float(x) for x in text.split(","))
    return (lo, hi)


def _filter_spec(args) -> FilterSpec:
    spec = FilterSpec(
        min_cell_value=args.min_cell,
        top_k=args.topk,
        predicted_prob_range=_parse_range(args.pred_prob),
        actual_prob_range=_parse_range(args.act_prob),
        exclude_diagonal=not args.include_diagonal,
    )
    spec.validate()
    return spec


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(args) -> None:
    manifest: dict = {"dataset_id": args.dataset_id} if args.dataset_id else {}
    manifest["hierarchy"] = args.hierarchy
    manifest["predictions"] = {}
    for item in args.predictions:
        name, _, path = item.partition("=")
        if not path:
            raise CliError(f"--predictions needs NAME=PATH, got {item!r}")
        manifest["predictions"][name] = path
    if args.responses:
        manifest["responses"] = {}
        for item in args.responses:
            name, _, paths = item.partition("=")
            data, _, sidecar = paths.partition(",")
            if not sidecar:
                raise CliError(f"--responses needs LAYER=DATA,SIDECAR, got {item!r}")
            manifest["responses"][name] = {"data": data, "sidecar": sidecar}
    if args.thumbnails:
        manifest["thumbnails"] = args.thumbnails

    out = Path(args.out)
    if out.is_dir() or args.out.endswith("/"):
        out = out / "dataset.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    manifest["_base"] = str(out.parent)
    bundle = load_bundle(manifest)  # full validation pass
    manifest.pop("_base")
    out.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    print(f"registered dataset {bundle.dataset_id}: {bundle.n_classes} classes, "
          f"{len(bundle.eval_sets)} set(s), {len(bundle.tensors)} layer(s)",
          file=sys.stderr)


def cmd_metrics(args) -> None:
    bundle = _bundle(args)
    set_id = _set_id(bundle, args.set)
    group = _group_id(bundle, args.group) if args.group else None
    payload = views.metrics_payload(bundle, set_id, group_id=group)
    _emit(payload, args.format, args.out, views.metrics_tsv)


def cmd_confusion(args) -> None:
    bundle = _bundle(args)
    set_id = _set_id(bundle, args.set)
    order = _order_for(bundle, set_id, args.order)
    payload = views.confusion_payload(bundle, set_id, order,
                                      spec=_filter_spec(args), blocks=args.blocks)
    _emit(payload, args.format, args.out)


def cmd_seriate(args) -> None:
    bundle = _bundle(args)
    set_id = _set_id(bundle, args.set)
    eval_set = bundle.eval_set(set_id)
    matrix = build_confusion(eval_set, list(bundle.hierarchy.leaf_order))
    scope = None
    if args.scope:
        lo, hi = (int(x) for x in args.scope.split(","))
        scope = (lo, hi)
    order = seriate(matrix, args.algorithm, scope)
    boundaries = score = None
    if args.blocks is not None:
        part = partition_blocks(build_confusion(eval_set, order), args.blocks)
        boundaries, score = part.boundaries, part.score
    payload = views.seriation_payload(bundle, set_id, args.algorithm, order,
                                      boundaries, score)
    _emit(payload, args.format, args.out)


def cmd_hierarchy_build(args) -> None:
    bundle = _bundle(args)
    set_id = _set_id(bundle, args.set)
    matrix = build_confusion(bundle.eval_set(set_id), list(bundle.hierarchy.leaf_order))
    blocks = [int(x) for x in args.blocks.split(",")]
    built = build_hierarchy_recursive(matrix, algorithm=args.algorithm,
                                      blocks=blocks if len(blocks) > 1 else blocks[0],
                                      max_depth=args.max_depth,
                                      min_block_size=args.min_block_size)
    params = {"algorithm": args.algorithm,
              "blocks": blocks if len(blocks) > 1 else blocks[0],
              "max_depth": args.max_depth, "min_block_size": args.min_block_size}
    payload = views.hierarchy_build_payload(bundle, set_id, params, built)
    _emit(payload, args.format, args.out)


def cmd_relevance(args) -> None:
    bundle = _bundle(args)
    set_id = _set_id(bundle, args.set)
    gid = _group_id(bundle, args.group)
    payload = views.relevance_payload(bundle, args.layer, set_id, gid)
    _emit(payload, args.format, args.out)


def cmd_responsemap(args) -> None:
    bundle = _bundle(args)
    set_id = _set_id(bundle, args.set)
    ds = None
    if args.downsample:
        h, _, w = args.downsample.partition("x")
        ds = (int(h), int(w))
    group = _group_id(bundle, args.order_by_relevance) if args.order_by_relevance else None
    payload = views.responsemap_payload(bundle, args.layer, set_id,
                                        threshold=args.threshold, downsample=ds,
                                        order_by_group=group)
    _emit(payload, args.format, args.out)


def cmd_correlation(args) -> None:
    bundle = _bundle(args)
    set_id = _set_id(bundle, args.set)
    payload = views.correlation_payload(bundle, args.cls, args.layer, set_id)
    _emit(payload, args.format, args.out)


def cmd_probe(args) -> None:
    bundle = _bundle(args)
    set_id = _set_id(bundle, args.set)
    tensor = bundle.tensor(args.layer)
    config = ProbeConfig(layer_id=args.layer, max_epochs=args.epochs,
                         initial_step=args.step, l2_penalty=args.l2,
                         tolerance=args.tol, seed=args.seed,
                         holdout_fraction=args.holdout)
    result = probe_layer(tensor, bundle.eval_set(set_id), config, top_m=args.top_m)
    if args.out is None or args.out == "-":
        for line in predictions_to_lines(result):
            sys.stdout.write(line + "\n")
    else:
        save_predictions(result, args.out)
    print(f"probe {result.set_id}: {result.n_samples} samples", file=sys.stderr)


def cmd_compare(args) -> None:
    bundle = _bundle(args)
    payload = views.compare_payload(bundle, args.base, args.variant, args.metric)
    _emit(payload, args.format, args.out, views.compare_tsv)


def cmd_serve(args) -> None:
    import os

    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig.load(config_file=args.config, env=os.environ,
                                port=args.port, dataset_root=args.root,
                                workers=args.workers, cache_size=args.cache_size)
    app = create_app(config)
    uvicorn.run(app, host=args.host, port=config.port, log_level="info")


# ---------------------------------------------------------------------------
# argument wiring


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blocks",
        description="Classifier diagnostics via hierarchical class similarity")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, dataset=True):
        if dataset:
            p.add_argument("--dataset", required=True,
                           help="dataset manifest (file or directory)")
        p.add_argument("--format", choices=("json", "tsv"), default="json")
        p.add_argument("--out", default=None, help="output path (default stdout)")

    p = sub.add_parser("ingest", help="validate input files and write a manifest")
    p.add_argument("--hierarchy", required=True)
    p.add_argument("--predictions", action="append", required=True,
                   metavar="NAME=PATH")
    p.add_argument("--responses", action="append", default=[],
                   metavar="LAYER=DATA,SIDECAR")
    p.add_argument("--thumbnails", default=None)
    p.add_argument("--dataset-id", default=None)
    p.add_argument("--out", required=True, help="manifest file or directory")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("metrics", help="group-level precision/recall/F1")
    common(p)
    p.add_argument("--set", default=None)
    p.add_argument("--group", default=None, help="group_id or 'root' (default: all)")
    p.set_defaults(fn=cmd_metrics)

    p = sub.add_parser("confusion", help="sparse confusion matrix with filters")
    common(p)
    p.add_argument("--set", default=None)
    p.add_argument("--order", default="hierarchy",
                   help="'hierarchy' or a seriate output JSON file")
    p.add_argument("--min-cell", type=int, default=None)
    p.add_argument("--topk", type=int, default=None)
    p.add_argument("--pred-prob", default=None, metavar="LO,HI")
    p.add_argument("--act-prob", default=None, metavar="LO,HI")
    p.add_argument("--include-diagonal", action="store_true")
    p.add_argument("--blocks", type=int, default=None)
    p.set_defaults(fn=cmd_confusion)

    p = sub.add_parser("seriate", help="reorder classes to expose block structure")
    common(p)
    p.add_argument("--set", default=None)
    p.add_argument("--algorithm", choices=ALGORITHMS, default="spectral")
    p.add_argument("--scope", default=None, metavar="START,STOP")
    p.add_argument("--blocks", type=int, default=None,
                   help="also partition into this many blocks")
    p.set_defaults(fn=cmd_seriate)

    p = sub.add_parser("hierarchy-build",
                       help="construct a class hierarchy by recursive refinement")
    common(p)
    p.add_argument("--set", default=None)
    p.add_argument("--algorithm", choices=ALGORITHMS, default="spectral")
    p.add_argument("--blocks", default="2", help="block count, or one per level (csv)")
    p.add_argument("--max-depth", type=int, default=3)
    p.add_argument("--min-block-size", type=int, default=2)
    p.set_defaults(fn=cmd_hierarchy_build)

    p = sub.add_parser("relevance", help="rank neurons by relevance to a group")
    common(p)
    p.add_argument("--layer", required=True)
    p.add_argument("--set", default=None)
    p.add_argument("--group", required=True, help="group_id or 'root'")
    p.set_defaults(fn=cmd_relevance)

    p = sub.add_parser("responsemap", help="per-class mean response profiles")
    common(p)
    p.add_argument("--layer", required=True)
    p.add_argument("--set", default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--downsample", default=None, metavar="HxW")
    p.add_argument("--order-by-relevance", default=None, metavar="GROUP_ID")
    p.set_defaults(fn=cmd_responsemap)

    p = sub.add_parser("correlation",
                       help="sample correlation matrix of one class at one layer")
    common(p)
    p.add_argument("--class", dest="cls", type=int, required=True)
    p.add_argument("--layer", required=True)
    p.add_argument("--set", default=None)
    p.set_defaults(fn=cmd_correlation)

    p = sub.add_parser("probe", help="train a linear probe on one layer")
    p.add_argument("--dataset", required=True)
    p.add_argument("--layer", required=True)
    p.add_argument("--set", default=None)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--holdout", type=float, default=0.0)
    p.add_argument("--top-m", type=int, default=None,
                   help="truncate rankings to this many guesses")
    p.add_argument("--out", default=None, help="predictions JSONL (default stdout)")
    p.set_defaults(fn=cmd_probe)

    p = sub.add_parser("compare", help="per-group metric deltas between two sets")
    common(p)
    p.add_argument("--base", required=True)
    p.add_argument("--variant", required=True)
    p.add_argument("--metric", choices=("precision", "recall", "f1"),
                   default="precision")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--root", default=None, help="dataset root directory")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--cache-size", type=int, default=None)
    p.add_argument("--config", default=None, help="JSON config file")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.fn(args)
    except (CliError, FormatError, DataError, ConsistencyError, SolverError,
            KeyError, ValueError, OSError) as exc:
        message = exc.args[0] if exc.args else str(exc)
        print(f"blocks: error: {message}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
