"""HTTP facade over the analytics library.

Serves immutable registered datasets to the UI and external tools. All GET
endpoints are pure functions of (dataset, query) and are answered from a
byte cache after first computation, so identical queries return
byte-identical bodies. Long computations (seriation, probes, hierarchy
construction) run through the job protocol.

Completed probe jobs additionally park their output as a derived
evaluation set (set id ``probe:<layer>``) next to the bundle, so confusion
and hierarchy endpoints can be pointed at probe predictions without
re-registering the dataset; the bundle itself stays immutable.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse

from . import views
from .compare import evaluate_set_expression
from .datamodel import DatasetBundle, EvaluationSet, load_bundle, load_manifest
from .errors import ConsistencyError, FormatError
from .jobs import JOB_KINDS, ByteCache, JobCancelled, JobManager
from .metrics import FilterSpec, build_confusion, filter_samples
from .probe import ProbeConfig, extract_features, probe_predictions, train_probe
from .seriation import ALGORITHMS, build_hierarchy_recursive, partition_blocks, seriate

_THUMB_EXTS = (".jpg", ".jpeg", ".png", ".gif", ".webp", ".bmp")


@dataclass
class ServiceConfig:
    port: int = 8077
    dataset_root: str = "."
    workers: int = 2
    cache_size: int = 256

    @classmethod
    def load(cls, config_file: str | None = None, env: Mapping[str, str] | None = None,
             **overrides) -> "ServiceConfig":
        """Precedence: explicit overrides > environment > config file > defaults."""
        values: dict = {}
        if config_file:
            values.update(json.loads(Path(config_file).read_text(encoding="utf-8")))
        env = env or {}
        for key, name in (("port", "BLOCKS_PORT"), ("dataset_root", "BLOCKS_DATA_ROOT"),
                          ("workers", "BLOCKS_WORKERS"), ("cache_size", "BLOCKS_CACHE_SIZE")):
            if name in env:
                values[key] = env[name]
        for key, val in overrides.items():
            if val is not None:
                values[key] = val
        cfg = cls(
            port=int(values.get("port", cls.port)),
            dataset_root=str(values.get("dataset_root", cls.dataset_root)),
            workers=int(values.get("workers", cls.workers)),
            cache_size=int(values.get("cache_size", cls.cache_size)),
        )
        if cfg.workers < 1 or cfg.cache_size < 1 or not (0 < cfg.port < 65536):
            raise ValueError(f"invalid service configuration: {cfg}")
        return cfg


class ServiceState:
    def __init__(self, config: ServiceConfig):
        self.config = config
        self.bundles: dict[str, DatasetBundle] = {}
        self.derived_sets: dict[str, dict[str, EvaluationSet]] = {}
        self.registry_lock = threading.Lock()
        self.cache = ByteCache(config.cache_size)
        self.jobs = JobManager(config.workers, self.cache)

    def bundle(self, dataset_id: str) -> DatasetBundle:
        try:
            return self.bundles[dataset_id]
        except KeyError:
            raise HTTPException(404, f"unknown dataset {dataset_id!r}") from None

    def eval_set(self, dataset_id: str, set_id: str) -> EvaluationSet:
        bundle = self.bundle(dataset_id)
        if set_id in bundle.eval_sets:
            return bundle.eval_sets[set_id]
        derived = self.derived_sets.get(dataset_id, {})
        if set_id in derived:
            return derived[set_id]
        raise HTTPException(404, f"unknown eval set {set_id!r}")

    def sets_view(self, dataset_id: str) -> dict[str, EvaluationSet]:
        bundle = self.bundle(dataset_id)
        out = dict(bundle.eval_sets)
        out.update(self.derived_sets.get(dataset_id, {}))
        return out

    def default_set(self, dataset_id: str, set_id: str | None) -> str:
        if set_id is not None:
            self.eval_set(dataset_id, set_id)
            return set_id
        bundle = self.bundle(dataset_id)
        try:
            return bundle.only_set_id()
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from None


def _bad_request(exc: Exception) -> HTTPException:
    return HTTPException(422, str(exc))


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    state = ServiceState(config)
    app = FastAPI(title="classblocks", version="0.1.0")
    app.state.blocks = state
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])

    def json_response(payload: bytes) -> Response:
        return Response(content=payload, media_type="application/json")

    def cached(key_parts: tuple, builder) -> Response:
        key = json.dumps(key_parts, separators=(",", ":"), default=str)
        hit = state.cache.get(key)
        if hit is None:
            try:
                hit = views.canonical_json_bytes(builder())
            except HTTPException:
                raise
            except KeyError as exc:
                raise HTTPException(404, str(exc)) from None
            except ValueError as exc:
                raise _bad_request(exc) from None
            state.cache.put(key, hit)
        return json_response(hit)

    # -- registration -------------------------------------------------------

    @app.post("/api/v1/datasets")
    async def register(request: Request):
        body = await request.json()
        root = Path(config.dataset_root)
        try:
            if "manifest" in body:
                manifest_path = root / body["manifest"]
                manifest = load_manifest(manifest_path)
            else:
                manifest = dict(body)
                manifest.setdefault("_base", str(root))
            with state.registry_lock:
                bundle = load_bundle(manifest)
                if bundle.dataset_id in state.bundles:
                    raise HTTPException(409, f"dataset {bundle.dataset_id!r} already registered")
                state.bundles[bundle.dataset_id] = bundle
        except (FormatError, ConsistencyError, OSError, ValueError) as exc:
            if isinstance(exc, HTTPException):
                raise
            raise _bad_request(exc) from None
        return {
            "dataset_id": bundle.dataset_id,
            "n_classes": bundle.n_classes,
            "sets": sorted(bundle.eval_sets),
            "layers": sorted(bundle.tensors),
        }

    @app.get("/api/v1/datasets")
    def list_datasets():
        return {"datasets": [{
            "dataset_id": d,
            "n_classes": b.n_classes,
            "sets": sorted(set(b.eval_sets) | set(state.derived_sets.get(d, {}))),
            "layers": sorted(b.tensors),
        } for d, b in sorted(state.bundles.items())]}

    # -- views ---------------------------------------------------------------

    @app.get("/api/v1/datasets/{d}/hierarchy")
    def hierarchy(d: str, metric: str | None = None, set: str | None = None):
        bundle = state.bundle(d)
        if metric is not None and metric not in ("precision", "recall", "f1"):
            raise HTTPException(422, f"metric must be precision|recall|f1, got {metric!r}")
        set_id = state.default_set(d, set) if metric is not None else None

        def build():
            if metric is None:
                return views.hierarchy_payload(bundle)
            shim = _bundle_with_set(bundle, state.eval_set(d, set_id))
            return views.hierarchy_payload(shim, set_id=set_id, metric=metric)

        return cached(("hierarchy", d, metric, set_id), build)

    def _filter_spec(minCell, topk, predProbLo, predProbHi, actProbLo, actProbHi,
                     diag) -> FilterSpec:
        pred = None
        if predProbLo is not None or predProbHi is not None:
            pred = (predProbLo if predProbLo is not None else 0.0,
                    predProbHi if predProbHi is not None else 1.0)
        act = None
        if actProbLo is not None or actProbHi is not None:
            act = (actProbLo if actProbLo is not None else 0.0,
                   actProbHi if actProbHi is not None else 1.0)
        spec = FilterSpec(min_cell_value=minCell, top_k=topk,
                          predicted_prob_range=pred, actual_prob_range=act,
                          exclude_diagonal=not diag)
        try:
            spec.validate()
        except ValueError as exc:
            raise _bad_request(exc) from None
        return spec

    def _resolve_order(d: str, order: str) -> list[int]:
        bundle = state.bundle(d)
        if order == "hierarchy":
            return list(bundle.hierarchy.leaf_order)
        if order.startswith("job:"):
            job = None
            try:
                job = state.jobs.get(order[4:])
            except KeyError:
                raise HTTPException(404, f"unknown job {order[4:]!r}") from None
            if job.state != "done" or job.result is None:
                raise HTTPException(422, f"job {job.job_id} is {job.state}, not done")
            payload = json.loads(job.result)
            if "order" not in payload:
                raise HTTPException(422, f"job {job.job_id} carries no ordering")
            return [int(c) for c in payload["order"]]
        raise HTTPException(422, f"order must be 'hierarchy' or 'job:<id>', got {order!r}")

    @app.get("/api/v1/datasets/{d}/sets/{s}/confusion")
    def confusion(d: str, s: str, order: str = "hierarchy",
                  minCell: int | None = None, topk: int | None = None,
                  predProbLo: float | None = None, predProbHi: float | None = None,
                  actProbLo: float | None = None, actProbHi: float | None = None,
                  diag: bool = False, blocks: int | None = None):
        bundle = state.bundle(d)
        eval_set = state.eval_set(d, s)
        spec = _filter_spec(minCell, topk, predProbLo, predProbHi,
                            actProbLo, actProbHi, diag)
        class_order = _resolve_order(d, order)

        def build():
            # derived sets are not part of the bundle; route through a shim
            shim = _bundle_with_set(bundle, eval_set)
            return views.confusion_payload(shim, eval_set.set_id, class_order,
                                           spec=spec, blocks=blocks)

        key = ("confusion", d, s, tuple(class_order), minCell, topk, predProbLo,
               predProbHi, actProbLo, actProbHi, diag, blocks)
        return cached(key, build)

    @app.get("/api/v1/datasets/{d}/layers/{l}/responsemap")
    def responsemap(d: str, l: str, set: str | None = None,
                    threshold: float | None = None,
                    dsH: int | None = None, dsW: int | None = None,
                    orderBy: str | None = None):
        bundle = state.bundle(d)
        if l not in bundle.tensors:
            raise HTTPException(404, f"unknown layer {l!r}")
        set_id = state.default_set(d, set)
        group = None
        if orderBy is not None:
            if not orderBy.startswith("relevance:"):
                raise HTTPException(422, "orderBy must look like relevance:<group_id>")
            try:
                group = int(orderBy.split(":", 1)[1])
            except ValueError:
                raise _bad_request(ValueError("orderBy group_id must be an integer"))
        ds = None
        if dsH is not None or dsW is not None:
            if dsH is None or dsW is None:
                raise HTTPException(422, "dsH and dsW must be given together")
            ds = (dsH, dsW)

        def build():
            return views.responsemap_payload(bundle, l, set_id, threshold=threshold,
                                             downsample=ds, order_by_group=group)

        return cached(("responsemap", d, l, set_id, threshold, ds, group), build)

    @app.get("/api/v1/datasets/{d}/layers/{l}/relevance")
    def relevance(d: str, l: str, group: int, set: str | None = None):
        bundle = state.bundle(d)
        if l not in bundle.tensors:
            raise HTTPException(404, f"unknown layer {l!r}")
        set_id = state.default_set(d, set)
        return cached(("relevance", d, l, set_id, group),
                      lambda: views.relevance_payload(bundle, l, set_id, group))

    @app.get("/api/v1/datasets/{d}/classes/{c}/correlation")
    def correlation(d: str, c: int, layer: str, set: str | None = None):
        bundle = state.bundle(d)
        if layer not in bundle.tensors:
            raise HTTPException(404, f"unknown layer {layer!r}")
        if not (0 <= c < bundle.n_classes):
            raise HTTPException(404, f"unknown class {c}")
        set_id = state.default_set(d, set)
        return cached(("correlation", d, c, layer, set_id),
                      lambda: views.correlation_payload(bundle, c, layer, set_id))

    @app.get("/api/v1/datasets/{d}/compare")
    def compare(d: str, base: str, variant: str, metric: str = "precision"):
        bundle = state.bundle(d)
        state.eval_set(d, base)
        state.eval_set(d, variant)

        def build():
            shim = _bundle_with_sets(bundle, state.sets_view(d))
            return views.compare_payload(shim, base, variant, metric)

        return cached(("compare", d, base, variant, metric), build)

    @app.get("/api/v1/datasets/{d}/metrics")
    def metrics_view(d: str, set: str | None = None, group: int | None = None):
        bundle = state.bundle(d)
        set_id = state.default_set(d, set)

        def build():
            shim = _bundle_with_set(bundle, state.eval_set(d, set_id))
            return views.metrics_payload(shim, set_id, group_id=group)

        return cached(("metrics", d, set_id, group), build)

    @app.get("/api/v1/datasets/{d}/samples")
    def samples(d: str, set: str | None = None, group: int | None = None,
                band: str | None = None, expr: str | None = None,
                groupByClass: bool = False,
                minCell: int | None = None, topk: int | None = None,
                predProbLo: float | None = None, predProbHi: float | None = None,
                actProbLo: float | None = None, actProbHi: float | None = None,
                diag: bool = False):
        bundle = state.bundle(d)

        def build():
            if expr is not None:
                try:
                    selection = evaluate_set_expression(expr, state.sets_view(d))
                except ValueError as exc:
                    raise _bad_request(exc) from None
                anchor = selection.set_id
            elif group is not None and band is not None:
                anchor = state.default_set(d, set)
                shim = _bundle_with_set(bundle, state.eval_set(d, anchor))
                selection = views.band_selection(shim, anchor, group, band)
            else:
                anchor = state.default_set(d, set)
                spec = _filter_spec(minCell, topk, predProbLo, predProbHi,
                                    actProbLo, actProbHi, diag)
                selection = filter_samples(state.eval_set(d, anchor), spec)
            shim = _bundle_with_set(bundle, state.eval_set(d, anchor))
            return views.samples_payload(shim, anchor, selection,
                                         group_by_class=groupByClass)

        key = ("samples", d, set, group, band, expr, groupByClass, minCell, topk,
               predProbLo, predProbHi, actProbLo, actProbHi, diag)
        return cached(key, build)

    @app.get("/api/v1/datasets/{d}/thumbnails/{sample_id}")
    def thumbnail(d: str, sample_id: str):
        bundle = state.bundle(d)
        if bundle.thumbnail_dir is None:
            raise HTTPException(404, "dataset has no thumbnails")
        for ext in _THUMB_EXTS:
            path = bundle.thumbnail_dir / f"{sample_id}{ext}"
            if path.is_file():
                return FileResponse(path)
        raise HTTPException(404, f"no thumbnail for sample {sample_id!r}")

    # -- jobs ----------------------------------------------------------------

    @app.post("/api/v1/datasets/{d}/jobs")
    async def submit_job(d: str, request: Request):
        body = await request.json()
        kind = body.get("kind")
        params = body.get("params") or {}
        if kind not in JOB_KINDS:
            raise HTTPException(422, f"kind must be one of {JOB_KINDS}")
        bundle = state.bundle(d)
        fn = _make_job(state, d, bundle, kind, params)
        cache_key = json.dumps(["jobres", d, kind, params], sort_keys=True,
                               separators=(",", ":"))
        job = state.jobs.submit(kind, cache_key, fn)
        return job.ticket()

    @app.get("/api/v1/jobs/{job_id}")
    def job_status(job_id: str):
        try:
            return state.jobs.get(job_id).ticket()
        except KeyError as exc:
            raise HTTPException(404, str(exc)) from None

    @app.get("/api/v1/jobs/{job_id}/result")
    def job_result(job_id: str):
        try:
            job = state.jobs.get(job_id)
        except KeyError as exc:
            raise HTTPException(404, str(exc)) from None
        if job.state != "done" or job.result is None:
            raise HTTPException(422, f"job {job_id} is {job.state}, no result")
        return json_response(job.result)

    @app.delete("/api/v1/jobs/{job_id}")
    def job_cancel(job_id: str):
        try:
            return state.jobs.cancel(job_id).ticket()
        except KeyError as exc:
            raise HTTPException(404, str(exc)) from None

    return app


def _bundle_with_set(bundle: DatasetBundle, eval_set: EvaluationSet) -> DatasetBundle:
    """The bundle itself, or a shallow stand-in exposing a derived set."""
    if eval_set.set_id in bundle.eval_sets:
        return bundle
    merged = dict(bundle.eval_sets)
    merged[eval_set.set_id] = eval_set
    return _bundle_with_sets(bundle, merged)


def _bundle_with_sets(bundle: DatasetBundle, sets: dict) -> DatasetBundle:
    from types import MappingProxyType
    return DatasetBundle(dataset_id=bundle.dataset_id, classes=bundle.classes,
                         hierarchy=bundle.hierarchy,
                         eval_sets=MappingProxyType(dict(sets)),
                         tensors=bundle.tensors,
                         thumbnail_dir=bundle.thumbnail_dir)


def _make_job(state: ServiceState, dataset_id: str, bundle: DatasetBundle,
              kind: str, params: dict):
    """Validate params now (field-level errors) and return the runnable."""

    def need_set() -> EvaluationSet:
        set_id = params.get("set")
        if set_id is None:
            try:
                set_id = bundle.only_set_id()
            except ValueError as exc:
                raise HTTPException(422, f"set: {exc}") from None
        try:
            return state.eval_set(dataset_id, set_id)
        except HTTPException:
            raise HTTPException(422, f"set: unknown eval set {set_id!r}") from None

    if kind == "seriation":
        eval_set = need_set()
        algorithm = params.get("algorithm", "spectral")
        if algorithm not in ALGORITHMS:
            raise HTTPException(422, f"algorithm: must be one of {ALGORITHMS}")
        scope = params.get("scope")
        if scope is not None:
            if (not isinstance(scope, (list, tuple)) or len(scope) != 2
                    or not all(isinstance(x, int) for x in scope)):
                raise HTTPException(422, "scope: must be [start, stop]")
            if not (0 <= scope[0] < scope[1] <= bundle.n_classes
                    and scope[1] - scope[0] >= 2):
                raise HTTPException(422, f"scope: {scope} invalid for "
                                         f"{bundle.n_classes} classes")
        blocks = params.get("blocks")
        if blocks is not None and not (isinstance(blocks, int)
                                       and 1 <= blocks <= bundle.n_classes):
            raise HTTPException(422, f"blocks: must be 1..{bundle.n_classes}")

        def run_seriation(report, should_stop):
            order0 = list(bundle.hierarchy.leaf_order)
            matrix = build_confusion(eval_set, order0)
            report(0.2)
            new_order = seriate(matrix, algorithm,
                                tuple(scope) if scope else None)
            if should_stop():
                raise JobCancelled()
            report(0.7)
            boundaries = score = None
            if blocks is not None:
                part = partition_blocks(build_confusion(eval_set, new_order), blocks)
                boundaries, score = part.boundaries, part.score
            payload = views.seriation_payload(bundle, eval_set.set_id, algorithm,
                                              new_order, boundaries, score)
            return views.canonical_json_bytes(payload)

        return run_seriation

    if kind == "hierarchy-build":
        eval_set = need_set()
        algorithm = params.get("algorithm", "spectral")
        if algorithm not in ALGORITHMS:
            raise HTTPException(422, f"algorithm: must be one of {ALGORITHMS}")
        blocks = params.get("blocks", 2)
        max_depth = params.get("max_depth", 3)
        min_block_size = params.get("min_block_size", 2)

        def run_build(report, should_stop):
            matrix = build_confusion(eval_set, list(bundle.hierarchy.leaf_order))
            report(0.2)
            if should_stop():
                raise JobCancelled()
            built = build_hierarchy_recursive(matrix, algorithm=algorithm,
                                              blocks=blocks, max_depth=max_depth,
                                              min_block_size=min_block_size)
            payload = views.hierarchy_build_payload(
                bundle, eval_set.set_id,
                {"algorithm": algorithm, "blocks": blocks, "max_depth": max_depth,
                 "min_block_size": min_block_size}, built)
            return views.canonical_json_bytes(payload)

        return run_build

    # probe
    eval_set = need_set()
    layer_id = params.get("layer")
    if layer_id not in bundle.tensors:
        raise HTTPException(422, f"layer: unknown layer_id {layer_id!r}")
    try:
        config = ProbeConfig(
            layer_id=layer_id,
            max_epochs=int(params.get("max_epochs", 500)),
            initial_step=float(params.get("initial_step", 0.1)),
            l2_penalty=float(params.get("l2_penalty", 1e-4)),
            tolerance=float(params.get("tolerance", 1e-7)),
            seed=int(params.get("seed", 0)),
            holdout_fraction=float(params.get("holdout_fraction", 0.0)),
        )
        config.validate()
    except (TypeError, ValueError) as exc:
        raise HTTPException(422, f"probe config: {exc}") from None
    tensor = bundle.tensors[layer_id]

    def run_probe(report, should_stop):
        feats = extract_features(tensor)
        idx = [eval_set.id_index[sid] for sid in tensor.sample_order]
        labels = eval_set.true_ids[idx]
        report(0.05)

        def on_epoch(epoch, total, loss):
            if should_stop():
                raise JobCancelled()
            report(0.05 + 0.85 * (epoch / total))

        model = train_probe(feats, labels, config, n_classes=eval_set.n_classes,
                            on_epoch=on_epoch)
        result = probe_predictions(model, feats, tensor.sample_order, labels,
                                   set_id=f"probe:{layer_id}")
        state.derived_sets.setdefault(dataset_id, {})[result.set_id] = result
        from .datamodel import predictions_to_lines
        payload = {
            "dataset_id": bundle.dataset_id,
            "set_id": result.set_id,
            "layer_id": layer_id,
            "epochs": len(model.loss_trace) - 1,
            "final_loss": model.loss_trace[-1],
            "predictions": list(predictions_to_lines(result)),
        }
        return views.canonical_json_bytes(payload)

    return run_probe
