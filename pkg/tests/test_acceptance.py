"""Acceptance suite: one test per release criterion, at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS line per
criterion. Timed criteria assert their stated budget.
"""

import json
import struct
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

import oracles
from classblocks import (ClassGroup, ConfusionMatrix, EvaluationSet, FormatError,
                         ProbeConfig, ResponseTensor, SampleRecord,
                         TruncationError, build_confusion,
                         build_hierarchy_recursive, build_response_map,
                         correlation_view, downsample_profile, group_metrics,
                         hierarchy_from_json, load_hierarchy, load_predictions,
                         load_responses, per_class_accuracy, probe_layer,
                         rank_neurons, register_dataset, save_hierarchy,
                         save_predictions, save_responses, selection_bands,
                         spectral_order, topk_error, train_probe)
from classblocks.metrics import FilterSpec, filter_samples
from classblocks.probe import _loss_and_grad, _loss_only
from classblocks.seriation import partition_counts
from classblocks.service import ServiceConfig, create_app
from conftest import make_record, random_eval, write_dataset_dir


def report(line):
    print(f"\nPASS — {line}")


# ---------------------------------------------------------------------------


def test_criterion_metrics_oracle_equivalence():
    """100 random 10-class 1000-sample sets match brute-force oracles."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    for trial in range(100):
        es = random_eval(10, 1000, seed=trial, top_m=None)
        samples = es.samples

        members = rng.choice(10, size=int(rng.integers(1, 10)), replace=False)
        g = ClassGroup(0, frozenset(int(c) for c in members))
        gm = group_metrics(es, g)
        o_tp, o_fp, o_fn = oracles.group_counts(samples, g.class_ids)
        assert (gm.tp, gm.fp, gm.fn) == (o_tp, o_fp, o_fn)
        o_p, o_r, o_f = oracles.group_prf(samples, g.class_ids)
        assert abs(gm.precision - o_p) < 1e-12
        assert abs(gm.recall - o_r) < 1e-12
        assert abs(gm.f1 - o_f) < 1e-12

        acc = per_class_accuracy(es)
        o_acc = oracles.per_class_accuracy(samples, 10)
        for a, b in zip(acc, o_acc):
            assert (a is None and b is None) or abs(a - b) < 1e-12

        k = int(rng.integers(1, 11))
        assert abs(topk_error(es, k) - oracles.topk_error(samples, k)) < 1e-12

        bands = selection_bands(es, g)
        o_bands = oracles.bands(samples, g.class_ids)
        assert list(bands.tp.sample_ids) == o_bands[0]
        assert list(bands.fp.sample_ids) == o_bands[1]
        assert list(bands.fn.sample_ids) == o_bands[2]

        spec = FilterSpec(min_cell_value=2, top_k=3,
                          predicted_prob_range=(0.05, 0.95),
                          actual_prob_range=(0.0, 0.6), exclude_diagonal=True)
        sel = filter_samples(es, spec)
        o_ids, o_unknown = oracles.filter_ids(
            samples, min_cell=2, top_k=3, pred_prob=(0.05, 0.95),
            act_prob=(0.0, 0.6), exclude_diagonal=True)
        assert list(sel.sample_ids) == o_ids
        assert sel.unknown_count == o_unknown
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0, f"metrics oracle sweep took {elapsed:.1f}s"
    report(f"metrics oracle equivalence (100 sets, {elapsed:.1f}s)")


def test_criterion_f1_identity_and_bounds():
    """f1 == 2PR/(P+R) within 1e-12; min(P,R) <= f1 <= max(P,R); root == 1."""
    rng = np.random.default_rng(7)
    checked = 0
    for trial in range(60):
        es = random_eval(8, 400, seed=trial + 500)
        members = rng.choice(8, size=int(rng.integers(1, 9)), replace=False)
        gm = group_metrics(es, ClassGroup(0, frozenset(int(c) for c in members)))
        p, r = gm.precision, gm.recall
        if p + r > 0:
            assert abs(gm.f1 - 2 * p * r / (p + r)) < 1e-12
            if p > 0 and r > 0:
                assert min(p, r) - 1e-12 <= gm.f1 <= max(p, r) + 1e-12
                checked += 1
        else:
            assert gm.f1 == 0.0
        root = group_metrics(es, ClassGroup(0, frozenset(range(8))))
        assert (root.precision, root.recall, root.f1) == (1.0, 1.0, 1.0)
    assert checked > 20
    report(f"group F-measure identity and bounds ({checked} positive-support fixtures)")


def test_criterion_relevance_oracle_and_rescaling():
    """1000 random (G, non-G) instances within 1e-10; ranks scale-invariant."""
    rng = np.random.default_rng(99)
    instances = 0
    for block in range(50):
        n_samples = int(rng.integers(8, 60))
        labels = rng.integers(0, 2, size=n_samples)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        values = rng.normal(rng.uniform(-1, 2), rng.uniform(0.2, 2.0),
                            size=(n_samples, 20)).astype(np.float32)
        ids = [f"b{block}s{i}" for i in range(n_samples)]
        recs = [make_record(sid, int(c), int(c), 2) for sid, c in zip(ids, labels)]
        es = EvaluationSet.build("val", recs, n_classes=2)
        tensor = ResponseTensor.build("l", ids, [(1, 1)] * 20, values)
        g = ClassGroup(0, frozenset({0}))
        ranked = rank_neurons(tensor, es, g)
        by_id = {r.neuron_id: r.value for r in ranked}
        in_g = labels == 0
        for neuron in range(20):
            want = oracles.relevance(
                values[in_g, neuron].astype(np.float64).tolist(),
                values[~in_g, neuron].astype(np.float64).tolist())
            got = by_id[neuron]
            if want == float("inf"):
                assert got == np.inf
            else:
                assert abs(got - want) < 1e-10
            instances += 1

        scales = rng.uniform(0.1, 10.0, size=20).astype(np.float32)
        scaled = ResponseTensor.build("l", ids, [(1, 1)] * 20, values * scales)
        assert [r.neuron_id for r in rank_neurons(scaled, es, g)] == \
               [r.neuron_id for r in ranked]
    assert instances == 1000
    report("neuron relevance quantile oracle (1000 instances) and scale-invariant ranks")


def test_criterion_partition_exactness():
    """DP equals exhaustive enumeration for n<=12, b<=4 on 200 matrices."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(4242)
    for trial in range(200):
        n = int(rng.integers(2, 13))
        b = int(rng.integers(1, min(n, 4) + 1))
        counts = rng.integers(0, 12, size=(n, n))
        part = partition_counts(counts, b)
        bounds, score = oracles.best_partition(counts.tolist(), b)
        assert part.boundaries == bounds, (trial, n, b)
        assert part.score == score, (trial, n, b)
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0, f"partition exactness sweep took {elapsed:.1f}s"
    report(f"partition exactness vs exhaustive enumeration (200 matrices, {elapsed:.1f}s)")


def test_criterion_planted_block_recovery():
    """Planted structure: flat 3x10 >= 95/100; 2-level 16-class >= 90/100."""
    t0 = time.perf_counter()
    flat_wins = 0
    planted = [frozenset(range(k * 10, (k + 1) * 10)) for k in range(3)]
    for seed in range(100):
        rng = np.random.default_rng(seed)
        labels = [i // 10 for i in range(30)]
        C = np.zeros((30, 30), dtype=np.int64)
        for i in range(30):
            for j in range(30):
                if i == j:
                    C[i, j] = 50
                elif labels[i] == labels[j]:
                    C[i, j] = rng.integers(20, 40)  # ~20x denser than cross
                else:
                    C[i, j] = rng.integers(0, 3)
        perm = rng.permutation(30)
        m = ConfusionMatrix(order=tuple(int(x) for x in perm),
                            counts=C[np.ix_(perm, perm)])
        order = spectral_order(m)
        part = partition_counts(
            np.asarray(m.counts)[np.ix_([m.order.index(c) for c in order],
                                        [m.order.index(c) for c in order])], 3)
        blocks = [frozenset(order[lo:hi]) for lo, hi in part.ranges()]
        if set(blocks) == set(planted):
            flat_wins += 1
    assert flat_wins >= 95, f"flat planted recovery {flat_wins}/100"

    tree_wins = 0
    sub = [i // 4 for i in range(16)]
    sup = [i // 8 for i in range(16)]
    want_subs = {frozenset(range(k * 4, k * 4 + 4)) for k in range(4)}
    for seed in range(100):
        rng = np.random.default_rng(10_000 + seed)
        C = np.zeros((16, 16), dtype=np.int64)
        for i in range(16):
            for j in range(16):
                if i == j:
                    C[i, j] = 60
                elif sub[i] == sub[j]:
                    C[i, j] = rng.integers(45, 55)
                elif sup[i] == sup[j]:
                    C[i, j] = rng.integers(28, 36)
                else:
                    C[i, j] = rng.integers(0, 3)
        perm = rng.permutation(16)
        m = ConfusionMatrix(order=tuple(int(x) for x in perm),
                            counts=C[np.ix_(perm, perm)])
        h = build_hierarchy_recursive(m, algorithm="spectral", blocks=2,
                                      max_depth=2, min_block_size=2)
        top = h.root.children
        if len(top) != 2:
            continue
        if {frozenset(sup[c] for c in ch.class_ids) for ch in top} != \
                {frozenset({0}), frozenset({1})}:
            continue
        got_subs = set()
        ok = True
        for ch in top:
            if len(ch.children) != 2:
                ok = False
                break
            got_subs.update(frozenset(g.class_ids) for g in ch.children)
        if ok and got_subs == want_subs:
            tree_wins += 1
    assert tree_wins >= 90, f"2-level planted recovery {tree_wins}/100"
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0, f"planted recovery sweep took {elapsed:.1f}s"
    report(f"planted-block recovery (flat {flat_wins}/100, "
           f"2-level {tree_wins}/100, {elapsed:.1f}s)")


def test_criterion_probe_checks():
    """Gradient check, monotone trace, separable accuracy, layer progression."""
    # analytic vs central differences on random small instances
    rng = np.random.default_rng(31)
    for _ in range(5):
        X = rng.normal(size=(20, 5))
        y = rng.integers(0, 3, size=20)
        Y = np.zeros((20, 3))
        Y[np.arange(20), y] = 1.0
        W = rng.normal(scale=0.4, size=(3, 5))
        b = rng.normal(scale=0.4, size=3)
        _, gW, gb = _loss_and_grad(W, b, X, Y, y, 1e-4)
        h = 1e-5
        for arr, grad in ((W, gW), (b, gb)):
            it = np.nditer(arr, flags=["multi_index"])
            while not it.finished:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + h
                up = _loss_only(W, b, X, y, 1e-4)
                arr[idx] = orig - h
                down = _loss_only(W, b, X, y, 1e-4)
                arr[idx] = orig
                numeric = (up - down) / (2 * h)
                denom = max(abs(numeric), abs(grad[idx]), 1e-12)
                assert abs(numeric - grad[idx]) / denom < 1e-4
                it.iternext()

    # monotone loss trace on every run + separable blobs at 100%
    for seed in range(5):
        gen = np.random.default_rng(seed)
        a = gen.normal((-2, 0), 0.3, size=(50, 2))
        c = gen.normal((+2, 0), 0.3, size=(50, 2))
        X = np.vstack([a, c])
        y = np.array([0] * 50 + [1] * 50)
        model = train_probe(X, y, ProbeConfig(layer_id="l", max_epochs=500))
        assert np.all(np.diff(model.loss_trace) <= 0)
        scores = X @ model.weights.T + model.bias
        assert (scores.argmax(axis=1) == y).mean() == 1.0

    # layer progression: both layers separate supergroups, only layer 2 leaves
    gen = np.random.default_rng(77)
    n_per = 30
    labels = np.repeat(np.arange(4), n_per)
    ids = [f"s{i}" for i in range(len(labels))]
    superg = labels // 2
    l1 = np.zeros((len(labels), 2), dtype=np.float32)
    l1[np.arange(len(labels)), superg] = 3.0
    l1 += gen.normal(0, 0.3, l1.shape).astype(np.float32)
    l2 = np.zeros((len(labels), 4), dtype=np.float32)
    l2[np.arange(len(labels)), labels] = 3.0
    l2 += gen.normal(0, 0.3, l2.shape).astype(np.float32)
    recs = [make_record(sid, int(c), int(c), 4) for sid, c in zip(ids, labels)]
    es = EvaluationSet.build("val", recs, n_classes=4)
    groups = [ClassGroup(0, frozenset({0, 1})), ClassGroup(1, frozenset({2, 3}))]
    leaf_acc = {}
    for layer_id, feats in (("layer1", l1), ("layer2", l2)):
        tensor = ResponseTensor.build(layer_id, ids, [(1, feats.shape[1])], feats)
        probe_es = probe_layer(tensor, es, ProbeConfig(layer_id=layer_id,
                                                       max_epochs=500))
        for g in groups:
            assert group_metrics(probe_es, g).recall > 0.95
        correct = sum(1 for s in probe_es.samples if s.predicted == s.true_class)
        leaf_acc[layer_id] = correct / probe_es.n_samples
    assert leaf_acc["layer2"] > 0.9
    assert leaf_acc["layer1"] < 0.75
    report(f"probe checks (gradient, monotone trace, separable 100%, "
           f"layer progression {leaf_acc['layer1']:.2f} vs {leaf_acc['layer2']:.2f})")


def test_criterion_response_aggregation():
    """Per-class means, downsampling conservation, correlation properties."""
    rng = np.random.default_rng(55)
    labels = rng.integers(0, 10, size=200)
    ids = [f"s{i}" for i in range(200)]
    recs = [make_record(sid, int(c), int(c), 10) for sid, c in zip(ids, labels)]
    es = EvaluationSet.build("val", recs, n_classes=10)
    tensor = ResponseTensor.build(
        "l", ids, [(4, 4), (2, 3)],
        rng.normal(1.0, 2.0, size=(200, 22)).astype(np.float32))
    rmap = build_response_map(tensor, es, list(range(10)))
    for cls in range(10):
        rows = [i for i, c in enumerate(labels) if c == cls]
        want = tensor.flat[rows].astype(np.float64).mean(axis=0)
        got = np.concatenate([p.values[cls] for p in rmap.profiles])
        assert np.abs(got - want).max() < 1e-6

    grid = rng.normal(size=(12, 12))
    pooled = downsample_profile(grid, (4, 4))
    assert abs(pooled.mean() - grid.mean()) < 1e-6  # equal windows
    grid2 = rng.normal(size=(5, 7))
    pooled2 = downsample_profile(grid2, (2, 3))
    row_edges = [(5 * i) // 2 for i in range(3)]
    col_edges = [(7 * j) // 3 for j in range(4)]
    weighted = sum(
        pooled2[i, j] * (row_edges[i + 1] - row_edges[i]) * (col_edges[j + 1] - col_edges[j])
        for i in range(2) for j in range(3)) / 35
    assert abs(weighted - grid2.mean()) < 1e-6

    # correlation properties + planted subclasses
    proto_a = rng.normal(0, 1, size=24)
    proto_b = rng.normal(0, 1, size=24)
    rows = [proto_a + rng.normal(0, 0.15, 24) for _ in range(20)]
    rows += [proto_b + rng.normal(0, 0.15, 24) for _ in range(20)]
    which = [0] * 20 + [1] * 20
    shuffle = rng.permutation(40)
    values = np.stack([rows[i] for i in shuffle]).astype(np.float32)
    cids = [f"c{int(i)}" for i in shuffle]
    crecs = [make_record(sid, 0, 0, 1) for sid in cids]
    ces = EvaluationSet.build("c", crecs, n_classes=1)
    ct = ResponseTensor.build("l", cids, [(4, 6)], values)
    view = correlation_view(ct, ces, 0)
    assert np.allclose(view.corr, view.corr.T)
    assert np.allclose(np.diag(view.corr), 1.0)
    assert view.corr.min() >= -1.0 and view.corr.max() <= 1.0
    kind = np.array([which[int(s[1:])] for s in view.sample_order])
    within = view.corr[np.ix_(kind == 0, kind == 0)].mean()
    cross = view.corr[np.ix_(kind == 0, kind == 1)].mean()
    assert within - cross >= 0.3
    report(f"response aggregation (means, pooling, correlation; "
           f"subclass separation {within - cross:.2f})")


def test_criterion_format_round_trips(tmp_path):
    """write -> read -> write is byte-identical; malformed fixtures error."""
    # predictions
    es = random_eval(6, 50, seed=3, top_m=4)
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_predictions(es, p1)
    save_predictions(load_predictions(p1, set_id="val"), p2)
    assert p1.read_bytes() == p2.read_bytes()

    # hierarchy
    h = hierarchy_from_json({"children": [
        {"children": [{"class_id": 0}, {"class_id": 1}]},
        {"children": [{"class_id": 2}, {"children": [
            {"class_id": 3}, {"class_id": 4}]}]},
        {"class_id": 5},
    ]})
    h1, h2 = tmp_path / "h1.json", tmp_path / "h2.json"
    save_hierarchy(h, h1)
    save_hierarchy(load_hierarchy(h1), h2)
    assert h1.read_bytes() == h2.read_bytes()

    # tensor
    rng = np.random.default_rng(8)
    t = ResponseTensor.build("conv", [f"s{i}" for i in range(7)], [(3, 2), (1, 5)],
                             rng.normal(size=(7, 11)).astype(np.float32))
    b1, s1 = tmp_path / "t1.blkr", tmp_path / "t1.json"
    b2, s2 = tmp_path / "t2.blkr", tmp_path / "t2.json"
    save_responses(t, b1, s1)
    save_responses(load_responses(b1, s1), b2, s2)
    assert b1.read_bytes() == b2.read_bytes()
    assert s1.read_bytes() == s2.read_bytes()

    # malformed fixtures
    trunc = tmp_path / "trunc.blkr"
    header = b"BLKR" + struct.pack("<III", 1, 3, 1) + struct.pack("<HH", 2, 2)
    trunc.write_bytes(header + np.zeros(5, dtype="<f4").tobytes())
    side = tmp_path / "trunc.json"
    side.write_text(json.dumps({"layer_id": "x", "samples": ["a", "b", "c"]}))
    with pytest.raises(TruncationError):
        load_responses(trunc, side)

    bad_probs = tmp_path / "bad.jsonl"
    bad_probs.write_text(
        '{"sample_id": "a", "true": 0, "pred": [[0, 0.1], [1, 0.9]]}\n')
    with pytest.raises(FormatError, match="not non-increasing at line 1"):
        load_predictions(bad_probs)

    with pytest.raises(FormatError, match="leaf for class 7 missing"):
        hierarchy_from_json(
            {"children": [{"class_id": c} for c in range(10) if c != 7]},
            n_classes=10)
    report("format round-trips byte-identical; malformed fixtures rejected")


def _build_big_bundle():
    """1000 classes, 50k samples, one 64-neuron 4x4 layer."""
    rng = np.random.default_rng(123)
    n_classes, n_samples = 1000, 50_000
    true = rng.integers(0, n_classes, size=n_samples)
    correct = rng.random(n_samples) < 0.6
    noise = rng.integers(1, n_classes, size=n_samples)
    pred = np.where(correct, true, (true + noise) % n_classes)
    probs = (0.5, 0.2, 0.15, 0.1, 0.05)
    records = []
    for i in range(n_samples):
        p0 = int(pred[i])
        ranked = tuple(((p0 + 211 * j) % n_classes, probs[j]) for j in range(5))
        records.append(SampleRecord(sample_id=f"s{i}", true_class=int(true[i]),
                                    predictions=ranked))
    es = EvaluationSet.build("val", records, n_classes=n_classes)
    groups = [{"label": f"g{k}",
               "children": [{"class_id": c} for c in range(k * 100, (k + 1) * 100)]}
              for k in range(10)]
    hierarchy = hierarchy_from_json({"label": "root", "children": groups})
    flat = rng.standard_normal((n_samples, 64 * 16), dtype=np.float32)
    tensor = ResponseTensor.build("conv5", [f"s{i}" for i in range(n_samples)],
                                  [(4, 4)] * 64, flat)
    return register_dataset(hierarchy, [es], [tensor], dataset_id="big")


def test_criterion_service_determinism_and_scale(dataset_dir):
    """Byte-identical GETs; CLI == service bytes; warm big-dataset queries < 2s."""
    # determinism + CLI equivalence on the toy dataset
    config = ServiceConfig(dataset_root=str(dataset_dir.parent))
    app = create_app(config)
    with TestClient(app) as client:
        client.post("/api/v1/datasets", json={"manifest": "demo"})
        url = "/api/v1/datasets/demo/sets/val/confusion?minCell=1&blocks=2&topk=1"
        assert client.get(url).content == client.get(url).content

        from classblocks.cli import main as cli_main
        import io, contextlib, sys
        buf = io.BytesIO()

        class _Cap:
            buffer = buf
            def flush(self):
                pass

        old = sys.stdout
        sys.stdout = _Cap()
        try:
            code = cli_main(["confusion", "--dataset", str(dataset_dir),
                             "--set", "val", "--min-cell", "1", "--blocks", "2",
                             "--topk", "1"])
        finally:
            sys.stdout = old
        assert code == 0
        assert buf.getvalue() == client.get(url).content

    # big synthetic dataset: register and time warm queries
    bundle = _build_big_bundle()
    app = create_app(ServiceConfig())
    with TestClient(app) as client:
        app.state.blocks.bundles[bundle.dataset_id] = bundle
        confusion_url = "/api/v1/datasets/big/sets/val/confusion?minCell=2"
        rmap_url = ("/api/v1/datasets/big/layers/conv5/responsemap"
                    "?set=val&threshold=0.5&dsH=2&dsW=2")
        timings = {}
        for name, url in (("confusion", confusion_url), ("responsemap", rmap_url)):
            warm = client.get(url)
            assert warm.status_code == 200
            t0 = time.perf_counter()
            again = client.get(url)
            timings[name] = time.perf_counter() - t0
            assert again.content == warm.content
            assert timings[name] < 2.0, f"{name} took {timings[name]:.2f}s warm"
    report("service determinism, CLI byte-identity, 1000-class scale "
           f"(warm confusion {timings['confusion']*1000:.0f}ms, "
           f"responsemap {timings['responsemap']*1000:.0f}ms)")
