import json

import pytest
from fastapi.testclient import TestClient

from classblocks import load_predictions
from classblocks.cli import main
from classblocks.service import ServiceConfig, create_app


def run_cli(capsysbinary, *argv):
    code = main(list(argv))
    captured = capsysbinary.readouterr()
    return code, captured.out, captured.err


class TestIngest:
    def test_ingest_writes_manifest(self, tmp_path, dataset_dir, capsysbinary):
        out = tmp_path / "fresh"
        out.mkdir()
        code, _, err = run_cli(
            capsysbinary, "ingest",
            "--hierarchy", str(dataset_dir / "hierarchy.json"),
            "--predictions", f"val={dataset_dir / 'val.jsonl'}",
            "--responses", f"conv1={dataset_dir / 'conv1.blkr'},{dataset_dir / 'conv1.json'}",
            "--dataset-id", "fresh",
            "--out", str(out))
        assert code == 0, err
        manifest = json.loads((out / "dataset.json").read_text())
        assert manifest["dataset_id"] == "fresh"
        code, stdout, _ = run_cli(capsysbinary, "metrics", "--dataset", str(out),
                                  "--group", "root", "--format", "tsv")
        assert code == 0

    def test_ingest_rejects_bad_data(self, tmp_path, capsysbinary):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"sample_id": "a", "true": 0, "pred": [[0, 0.2], [1, 0.5]]}\n')
        hier = tmp_path / "h.json"
        hier.write_text(json.dumps({"children": [{"class_id": 0}, {"class_id": 1}]}))
        code, _, err = run_cli(capsysbinary, "ingest", "--hierarchy", str(hier),
                               "--predictions", f"val={bad}",
                               "--out", str(tmp_path / "m.json"))
        assert code == 1
        assert b"not non-increasing at line 1" in err


class TestMetrics:
    def test_root_group_tsv(self, dataset_dir, capsysbinary):
        code, out, _ = run_cli(capsysbinary, "metrics", "--dataset",
                               str(dataset_dir), "--set", "val",
                               "--group", "root", "--format", "tsv")
        assert code == 0
        lines = out.decode().strip().split("\n")
        assert lines[0].startswith("group_id\tlabel")
        fields = lines[1].split("\t")
        assert fields[2] == "1.0" and fields[3] == "1.0" and fields[4] == "1.0"

    def test_unknown_set_is_data_error(self, dataset_dir, capsysbinary):
        code, _, err = run_cli(capsysbinary, "metrics", "--dataset",
                               str(dataset_dir), "--set", "ghost")
        assert code == 1
        assert b"ghost" in err

    def test_usage_error_exit_2(self, dataset_dir):
        with pytest.raises(SystemExit) as exc:
            main(["metrics", "--dataset", str(dataset_dir), "--bogus-flag"])
        assert exc.value.code == 2


class TestSeriate:
    def test_seriate_writes_order_and_boundaries(self, dataset_dir, tmp_path,
                                                 capsysbinary):
        out = tmp_path / "order.json"
        code, _, _ = run_cli(capsysbinary, "seriate", "--dataset", str(dataset_dir),
                             "--set", "val", "--algorithm", "spectral",
                             "--blocks", "2", "--out", str(out))
        assert code == 0
        payload = json.loads(out.read_text())
        assert sorted(payload["order"]) == [0, 1, 2, 3]
        assert len(payload["boundaries"]) == 1

    def test_matches_direct_library_call(self, dataset_dir, tmp_path, capsysbinary):
        from classblocks import build_confusion, load_bundle, spectral_order
        code, out, _ = run_cli(capsysbinary, "seriate", "--dataset",
                               str(dataset_dir), "--set", "val",
                               "--algorithm", "spectral")
        assert code == 0
        bundle = load_bundle(dataset_dir)
        matrix = build_confusion(bundle.eval_set("val"),
                                 list(bundle.hierarchy.leaf_order))
        assert json.loads(out)["order"] == list(spectral_order(matrix))

    def test_confusion_accepts_order_file(self, dataset_dir, tmp_path, capsysbinary):
        order_file = tmp_path / "order.json"
        run_cli(capsysbinary, "seriate", "--dataset", str(dataset_dir),
                "--set", "val", "--out", str(order_file))
        code, out, _ = run_cli(capsysbinary, "confusion", "--dataset",
                               str(dataset_dir), "--set", "val",
                               "--order", str(order_file))
        assert code == 0
        assert json.loads(out)["order"] == json.loads(order_file.read_text())["order"]


class TestProbeCommand:
    def test_probe_emits_loadable_predictions(self, dataset_dir, tmp_path,
                                              capsysbinary):
        out = tmp_path / "probe.jsonl"
        code, _, err = run_cli(capsysbinary, "probe", "--dataset", str(dataset_dir),
                               "--layer", "conv1", "--set", "val",
                               "--epochs", "50", "--out", str(out))
        assert code == 0, err
        es = load_predictions(out, set_id="probe:conv1", n_classes=4)
        assert es.n_samples == 6

    def test_probe_deterministic_across_runs(self, dataset_dir, tmp_path,
                                             capsysbinary):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        for path in (a, b):
            code, _, _ = run_cli(capsysbinary, "probe", "--dataset",
                                 str(dataset_dir), "--layer", "conv1",
                                 "--epochs", "40", "--seed", "7",
                                 "--set", "val", "--out", str(path))
            assert code == 0
        assert a.read_bytes() == b.read_bytes()


class TestHierarchyBuild:
    def test_build_outputs_tree_and_order(self, dataset_dir, capsysbinary):
        code, out, _ = run_cli(capsysbinary, "hierarchy-build", "--dataset",
                               str(dataset_dir), "--set", "val", "--blocks", "2",
                               "--max-depth", "2")
        assert code == 0
        payload = json.loads(out)
        assert sorted(payload["order"]) == [0, 1, 2, 3]
        assert payload["params"]["blocks"] == 2


class TestCompareCommand:
    def test_tsv_columns(self, dataset_dir, capsysbinary):
        code, out, _ = run_cli(capsysbinary, "compare", "--dataset",
                               str(dataset_dir), "--base", "val",
                               "--variant", "gray", "--metric", "recall",
                               "--format", "tsv")
        assert code == 0
        lines = out.decode().strip().split("\n")
        assert lines[0] == "group_id\tlabel\tbase\tvariant\tdelta"
        assert len(lines) > 1


class TestByteIdentityWithService:
    @pytest.mark.parametrize("cli_args,url", [
        (("confusion", "--set", "val", "--min-cell", "1", "--blocks", "2"),
         "/api/v1/datasets/demo/sets/val/confusion?minCell=1&blocks=2"),
        (("metrics", "--set", "val"),
         "/api/v1/datasets/demo/metrics?set=val"),
        (("responsemap", "--layer", "conv1", "--set", "val", "--threshold", "0.5"),
         "/api/v1/datasets/demo/layers/conv1/responsemap?set=val&threshold=0.5"),
        (("compare", "--base", "val", "--variant", "gray", "--metric", "recall"),
         "/api/v1/datasets/demo/compare?base=val&variant=gray&metric=recall"),
    ])
    def test_cli_equals_service_bytes(self, dataset_dir, capsysbinary, cli_args, url):
        code, out, err = run_cli(capsysbinary, cli_args[0], "--dataset",
                                 str(dataset_dir), *cli_args[1:])
        assert code == 0, err
        app = create_app(ServiceConfig(dataset_root=str(dataset_dir.parent)))
        with TestClient(app) as client:
            client.post("/api/v1/datasets", json={"manifest": "demo"})
            body = client.get(url).content
        assert out == body
