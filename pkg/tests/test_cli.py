"""End-to-end command-line runs: outputs, exit codes, and reproducibility."""

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from patchcert.cli import main
from patchcert.synthetic import instance_to_entry
from conftest import monotone_suite


def write_manifest(path: Path, instances, classes):
    with path.open("w") as fh:
        fh.write(json.dumps({"classes": classes, "kind": "synthetic"}) + "\n")
        for inst in instances:
            fh.write(json.dumps(instance_to_entry(inst), sort_keys=True) + "\n")


@pytest.fixture(scope="module")
def manifest(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    path = root / "manifest.jsonl"
    code = main(
        [
            "gen-synthetic", "--count", "10", "--classes", "4", "--seed", "5",
            "--out", str(root), "--manifest-out", str(path),
        ]
    )
    assert code == 0
    return path


def read_curve(path: Path):
    with path.open() as fh:
        assert fh.readline().startswith("# config_hash=")
        return list(csv.DictReader(fh))


def snapshot(outdir: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(outdir.iterdir()) if p.is_file()}


COMMON = ["--masks", "2x2", "--patch", "2", "--thresholds", "standard", "--seed", "5"]


class TestInfer:
    def test_outputs_and_bound_relation(self, manifest, tmp_path):
        out = tmp_path / "inf"
        assert main(["infer", "--manifest", str(manifest), "--out", str(out), *COMMON]) == 0
        rows = read_curve(out / "curve.csv")
        assert {r["setting"] for r in rows} == {"undefended-clean", "defended-clean"}
        header, *records = [
            json.loads(ln) for ln in (out / "predictions.jsonl").read_text().splitlines()
        ]
        assert "config_hash" in header and header["seed"] == 5
        assert all(len(r["defended"]) == 4 for r in records)
        summary = json.loads((out / "summary.json").read_text())
        assert set(summary["settings"]) == {"undefended-clean", "defended-clean"}

    def test_missing_manifest_is_config_error(self, tmp_path):
        code = main(["infer", "--manifest", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path)])
        assert code == 2


class TestCertify:
    def test_record_schema_and_settings(self, manifest, tmp_path):
        out = tmp_path / "cert"
        assert main(["certify", "--manifest", str(manifest), "--out", str(out), *COMMON]) == 0
        header, *records = [
            json.loads(ln) for ln in (out / "certify.jsonl").read_text().splitlines()
        ]
        expected = {
            "image_id", "threshold", "tp_lower", "fp_upper", "fn_upper",
            "kappa", "fn_new", "fp_new", "attacker_mode", "query_count",
        }
        assert all(set(r) == expected for r in records)
        assert all(r["attacker_mode"] == "worst" for r in records)
        rows = read_curve(out / "curve.csv")
        assert {r["setting"] for r in rows} == {"certified", "location-aware"}

    def test_certified_bounded_by_defended(self, manifest, tmp_path):
        inf_out, cert_out = tmp_path / "inf", tmp_path / "cert"
        main(["infer", "--manifest", str(manifest), "--out", str(inf_out), *COMMON])
        main(["certify", "--manifest", str(manifest), "--out", str(cert_out), *COMMON])
        defended = {
            r["threshold"]: r for r in read_curve(inf_out / "curve.csv")
            if r["setting"] == "defended-clean"
        }
        for row in read_curve(cert_out / "curve.csv"):
            if row["setting"] != "certified":
                continue
            ref = defended[row["threshold"]]
            assert float(row["precision"]) <= float(ref["precision"]) + 1e-12
            assert float(row["recall"]) <= float(ref["recall"]) + 1e-12

    def test_byte_identical_reruns(self, manifest, tmp_path):
        out = tmp_path / "repro"
        args = ["certify", "--manifest", str(manifest), "--out", str(out), *COMMON]
        assert main(args) == 0
        first = snapshot(out)
        assert main(args) == 0
        assert snapshot(out) == first


class TestVerify:
    def test_clean_suite_passes(self, manifest, tmp_path):
        out = tmp_path / "ver"
        code = main(["verify", "--manifest", str(manifest), "--out", str(out), *COMMON])
        assert code == 0
        doc = json.loads((out / "verify.json").read_text())
        assert doc["ok"] and not doc["violations"]
        assert doc["checked_placements"] > 0
        assert doc["protection_violations"] == []

    def test_negative_control_fails_loudly(self, manifest, tmp_path):
        out = tmp_path / "nc"
        code = main(
            ["verify", "--manifest", str(manifest), "--out", str(out),
             "--negative-control", *COMMON]
        )
        assert code == 3
        doc = json.loads((out / "verify.json").read_text())
        assert doc["negative_control"]
        assert all(v > 0 for v in doc["mutation_flags"].values())

    def test_onnx_backend_is_skipped(self, manifest, tmp_path):
        code = main(
            ["verify", "--manifest", str(manifest), "--out", str(tmp_path),
             "--backend", "onnx", "--model", "x.onnx", "--onnx-classes", "4"]
        )
        assert code == 2


@pytest.fixture(scope="module")
def mono_manifest(tmp_path_factory):
    path = tmp_path_factory.mktemp("mono") / "manifest.jsonl"
    write_manifest(path, monotone_suite(21, 20), classes=5)
    return path


class TestSweep:
    def test_patch_size_never_improves_certified_ap(self, mono_manifest, tmp_path):
        out = tmp_path / "sweep"
        code = main(
            ["sweep", "--manifest", str(mono_manifest), "--parameter", "patch-size",
             "--masks", "3x3", "--thresholds", "standard", "--out", str(out)]
        )
        assert code == 0
        with (out / "sweep.csv").open() as fh:
            fh.readline()
            rows = list(csv.DictReader(fh))
        order = ["0.5%", "2%", "8%", "32%"]
        for setting in ("certified", "location-aware"):
            aps = [
                float(r["ap"]) for v in order for r in rows
                if r["value"] == v and r["setting"] == setting
            ]
            assert len(aps) == 4
            assert all(a >= b - 1e-12 for a, b in zip(aps, aps[1:])), (setting, aps)
            assert aps[0] > 0.1  # non-degenerate at the small end

    def test_single_point_grid_matches_certify(self, manifest, tmp_path):
        cert_out, sweep_out = tmp_path / "cert", tmp_path / "sweep1"
        main(["certify", "--manifest", str(manifest), "--out", str(cert_out), *COMMON])
        code = main(
            ["sweep", "--manifest", str(manifest), "--parameter", "mask-number",
             "--grid", "2", "--out", str(sweep_out), *COMMON]
        )
        assert code == 0
        summary = json.loads((cert_out / "summary.json").read_text())
        with (sweep_out / "sweep.csv").open() as fh:
            fh.readline()
            rows = {
                r["setting"]: float(r["ap"]) for r in csv.DictReader(fh)
            }
        assert rows["certified"] == pytest.approx(summary["settings"]["certified"]["ap"])
        assert rows["location-aware"] == pytest.approx(
            summary["settings"]["location-aware"]["ap"]
        )


class TestConfig:
    def test_bad_masks_exit_code(self, manifest, tmp_path):
        assert main(
            ["certify", "--manifest", str(manifest), "--masks", "0x2", "--out", str(tmp_path)]
        ) == 2

    def test_env_overrides_defaults(self, manifest, tmp_path, monkeypatch):
        monkeypatch.setenv("PATCHCERT_MASKS", "3x1")
        from patchcert.cli import build_parser, _config_from_args

        args = build_parser().parse_args(
            ["certify", "--manifest", str(manifest), "--out", str(tmp_path)]
        )
        assert _config_from_args(args).masks == (3, 1)

    def test_flag_beats_env(self, manifest, tmp_path, monkeypatch):
        monkeypatch.setenv("PATCHCERT_MASKS", "3x1")
        from patchcert.cli import build_parser, _config_from_args

        args = build_parser().parse_args(
            ["certify", "--manifest", str(manifest), "--masks", "2x2", "--out", str(tmp_path)]
        )
        assert _config_from_args(args).masks == (2, 2)

    def test_threshold_file(self, manifest, tmp_path):
        tfile = tmp_path / "ts.txt"
        tfile.write_text("0.25 0.5\n0.75\n")
        out = tmp_path / "run"
        code = main(
            ["certify", "--manifest", str(manifest), "--thresholds", str(tfile),
             "--masks", "2x2", "--out", str(out)]
        )
        assert code == 0
        rows = read_curve(out / "curve.csv")
        assert sorted({float(r["threshold"]) for r in rows}) == [0.25, 0.5, 0.75]

    def test_unknown_threshold_family(self, manifest, tmp_path):
        assert main(
            ["certify", "--manifest", str(manifest), "--thresholds", "bogus",
             "--out", str(tmp_path)]
        ) == 2


class TestSingleClassManifest:
    def test_c1_reduces_to_single_label(self, tmp_path):
        from patchcert import (
            BinaryView, PatchSpec, QueryService, generate_mask_set, sl_infer,
        )
        from patchcert.synthetic import generate_suite

        insts = generate_suite(31, 6, classes=1)
        path = tmp_path / "manifest.jsonl"
        write_manifest(path, insts, classes=1)
        out = tmp_path / "run"
        assert main(
            ["infer", "--manifest", str(path), "--masks", "2x2", "--patch", "2",
             "--thresholds", "standard", "--out", str(out)]
        ) == 0
        header, *records = [
            json.loads(ln) for ln in (out / "predictions.jsonl").read_text().splitlines()
        ]
        by_key = {(r["image_id"], r["threshold"]): r["defended"] for r in records}
        for inst in insts:
            ms = generate_mask_set(inst.image.n1, inst.image.n2, PatchSpec.pixels(2), 2, 2)
            q = QueryService(inst.model, inst.image, ms)
            expect = sl_infer(BinaryView(inst.model, 0, 0.5), ms, q)
            assert by_key[(inst.image_id, 0.5)] == str(expect)
