import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from aline import cli, svgplot
from aline.bundle import PredictionBundle, load_bundle, write_bundle
from bundle_factories import random_bundle

SVG_NS = "{http://www.w3.org/2000/svg}"


def _circles(svg_text, cls):
    root = ET.fromstring(svg_text)
    return [c for c in root.iter(f"{SVG_NS}circle") if c.get("class") == cls]


class TestSvg:
    def test_well_formed_with_expected_elements(self):
        b = random_bundle(n_models=5, n_id=200, n_ood=200)
        svg = svgplot.render_bundle_plot(b)
        assert svg.startswith('<?xml version="1.0"')
        assert len(_circles(svg, "agreement")) == 10  # 5 choose 2
        assert len(_circles(svg, "accuracy")) == 5
        assert "test-id (probit scale)" in svg
        assert "test-ood (probit scale)" in svg
        assert "R&#178;" in svg

    def test_no_ood_labels_drops_accuracy_layer(self):
        b = random_bundle(n_models=4, with_ood_labels=False)
        svg = svgplot.render_bundle_plot(b)
        assert len(_circles(svg, "agreement")) == 6
        assert len(_circles(svg, "accuracy")) == 0
        assert "accuracy: slope" not in svg

    def test_deterministic(self):
        b = random_bundle(n_models=4)
        assert svgplot.render_bundle_plot(b) == svgplot.render_bundle_plot(b)

    def test_dataset_names_are_escaped(self):
        b = random_bundle(n_models=3)
        odd = PredictionBundle(
            num_classes=b.num_classes,
            id_labels=b.id_labels,
            ood_labels=b.ood_labels,
            models=b.models,
            dataset_names=("cifar<10>", "shift & co"),
        )
        svg = svgplot.render_bundle_plot(odd)
        ET.fromstring(svg)  # still parses
        assert "cifar&lt;10&gt;" in svg
        assert "shift &amp; co" in svg

    def test_ticks_labeled_with_probabilities(self):
        b = random_bundle(n_models=5, n_id=300, n_ood=300)
        root = ET.fromstring(svgplot.render_bundle_plot(b))
        texts = [t.text for t in root.iter(f"{SVG_NS}text")]
        # agreement values sit high, so at least one of these shows up
        assert any(t in texts for t in ("0.2", "0.3", "0.4", "0.5", "0.6", "0.7", "0.8"))


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "bundle"
    rc = cli.main(
        [
            "synth",
            "--models", "6",
            "--id-samples", "1500",
            "--ood-samples", "1500",
            "--error-sharing", "0.0",
            "--noise", "0.02",
            "--seed", "5",
            "--out", str(out),
        ]
    )
    assert rc == 0
    return out


class TestCli:
    def test_synth_writes_bundle_and_truth(self, synth_dir):
        assert (synth_dir / "manifest.json").exists()
        truth = json.loads((synth_dir / "truth.json").read_text())
        assert len(truth["planted"]) == 6
        assert truth["config"]["slope"] == 0.8
        bundle = load_bundle(synth_dir)
        assert bundle.num_models == 6

    def test_validate_ok(self, synth_dir, capsys):
        assert cli.main(["validate", "--bundle", str(synth_dir)]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["validation"]["ok"] is True
        run = payload["run"]
        assert run["subcommand"] == "validate"
        assert run["bundle_digest"]
        assert run["tool_version"]
        assert run["timestamp"]

    def test_validate_missing_dir_is_domain_error(self, tmp_path, capsys):
        rc = cli.main(["validate", "--bundle", str(tmp_path / "nope")])
        assert rc == 1
        assert "error:" in capsys.readouterr().err

    def test_estimate_all_methods_with_mae(self, synth_dir, capsys):
        assert cli.main(["estimate", "--bundle", str(synth_dir)]) == 0
        payload = json.loads(capsys.readouterr().out)
        methods = [e["method"] for e in payload["estimates"]]
        assert methods == ["ALINE_S", "ALINE_D", "ATC", "DOC", "AC", "GDE"]
        assert set(payload["mae"]["mae"]) == set(methods)
        for e in payload["estimates"]:
            assert len(e["per_model"]) == 6

    def test_estimate_method_subset_and_out_file(self, synth_dir, tmp_path):
        out = tmp_path / "est.json"
        rc = cli.main(
            ["estimate", "--bundle", str(synth_dir), "--methods", "atc,gde", "--out", str(out)]
        )
        assert rc == 0
        payload = json.loads(out.read_text())
        assert [e["method"] for e in payload["estimates"]] == ["ATC", "GDE"]

    def test_estimate_unknown_method(self, synth_dir, capsys):
        rc = cli.main(["estimate", "--bundle", str(synth_dir), "--methods", "magic"])
        assert rc == 1
        assert "unknown method" in capsys.readouterr().err

    def test_calibrate(self, synth_dir, capsys):
        rc = cli.main(["calibrate", "--bundle", str(synth_dir), "--estimate-method", "aline-s"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert len(payload["results"]) == 6
        for r in payload["results"]:
            assert r["tau"] > 0
            assert r["ece_before"] is not None  # synth bundles carry OOD labels

    def test_calibrate_invalid_thread_env(self, synth_dir, monkeypatch, capsys):
        monkeypatch.setenv("ALINE_THREADS", "zero")
        with pytest.raises(SystemExit) as exc:
            cli.main(["calibrate", "--bundle", str(synth_dir)])
        assert exc.value.code == 2
        assert "ALINE_THREADS" in capsys.readouterr().err

    def test_select_single_bundle(self, synth_dir, capsys):
        assert cli.main(["select", "--bundle", str(synth_dir)]) == 0
        payload = json.loads(capsys.readouterr().out)
        sel = payload["selection"]
        assert sel["chosen_model_id"] == "synth_005"  # highest planted accuracy
        assert len(sel["ranking"]) == 6

    def test_select_gap_table(self, synth_dir, capsys):
        rc = cli.main(
            ["select", "--bundles", f"a={synth_dir}", f"b={synth_dir}"]
        )
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload["gap_table"]["per_bundle"]) == {"a", "b"}

    def test_select_without_target_errors(self, capsys):
        assert cli.main(["select"]) == 1
        assert "error:" in capsys.readouterr().err

    def test_ablate(self, synth_dir, capsys):
        rc = cli.main(
            ["ablate", "--bundle", str(synth_dir), "--sizes", "3,4", "--subsets", "10"]
        )
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload["ablation"]["summaries"]) == {"3", "4"}
        for size in ("3", "4"):
            summ = payload["ablation"]["summaries"][size]["ALINE_S"]
            assert summ["minimum"] <= summ["median"] <= summ["maximum"]

    def test_plot_cli(self, synth_dir, tmp_path):
        out = tmp_path / "plot.svg"
        assert cli.main(["plot", "--bundle", str(synth_dir), "--out", str(out)]) == 0
        ET.fromstring(out.read_text())

    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["frobnicate"])
        assert exc.value.code == 2
        with pytest.raises(SystemExit) as exc:
            cli.main(["estimate"])  # missing required --bundle
        assert exc.value.code == 2

    def test_pinned_epoch_makes_output_reproducible(self, synth_dir, tmp_path, monkeypatch):
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
        out = tmp_path / "est.json"
        cli.main(["estimate", "--bundle", str(synth_dir), "--out", str(out)])
        first = out.read_bytes()
        cli.main(["estimate", "--bundle", str(synth_dir), "--out", str(out)])
        assert out.read_bytes() == first
        assert "2023-11-14" in json.loads(first)["run"]["timestamp"]
