"""End-to-end command-line pipeline tests."""

import filecmp
import json

import numpy as np
import pandas as pd
import pytest

from conftest import build_cohort, random_cohort
from raregraph.cli import run
from raregraph.cohort import load_cohort, save_cohort
from raregraph.evaluation import curve_and_auc
from raregraph.graph_engine import build, run_inference
from raregraph.learning import fit, load_params


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cohort")
    save_cohort(random_cohort(seed=7, n_patients=50, n_physicians=15), d)
    return d


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


class TestUsageErrors:
    def test_no_subcommand_is_usage_error(self, capsys):
        assert run([]) == 2
        capsys.readouterr()

    def test_unknown_subcommand(self, capsys):
        assert run(["transmogrify", "--out", "x"]) == 2
        capsys.readouterr()

    def test_missing_out_flag(self, capsys):
        assert run(["fit", "--in", "somewhere"]) == 2
        capsys.readouterr()

    def test_bad_flag_value(self, capsys):
        assert run(["score", "--in", "a", "--out", "b", "--damping", "high"]) == 2
        capsys.readouterr()


class TestDataErrors:
    def test_missing_input_dir(self, tmp_path, capsys):
        code = run(["fit", "--in", str(tmp_path / "nope"), "--out",
                    str(tmp_path / "out")])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_fit_without_in_dir(self, tmp_path, capsys):
        assert run(["fit", "--out", str(tmp_path)]) == 1
        assert "--in" in capsys.readouterr().err

    def test_generate_without_sizes(self, tmp_path, capsys):
        assert run(["generate", "--out", str(tmp_path)]) == 1
        capsys.readouterr()

    def test_broken_config_json(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{not json")
        assert run(["generate", "--config", str(cfg),
                    "--out", str(tmp_path / "o")]) == 1
        assert "invalid JSON" in capsys.readouterr().err

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"num_physicians": 5, "num_patients": 9,
                                      "color": "red"})
        assert run(["generate", "--config", str(cfg),
                    "--out", str(tmp_path / "o")]) == 1
        assert "unknown config keys" in capsys.readouterr().err

    def test_eval_requires_labels(self, tmp_path, capsys, data_dir):
        unlabeled = tmp_path / "unlabeled"
        cohort = random_cohort(seed=7, n_patients=50, n_physicians=15)
        import dataclasses
        blank = dataclasses.replace(
            cohort,
            physicians=dataclasses.replace(
                cohort.physicians,
                labels=np.full(cohort.num_physicians, -1, dtype=np.int8),
            ),
        )
        save_cohort(blank, unlabeled)
        run_dir = tmp_path / "run"
        assert run(["fit", "--in", str(data_dir), "--out", str(data_dir)]) == 0
        assert run(["score", "--in", str(data_dir), "--out", str(run_dir)]) == 0
        code = run(["eval", "--in", str(unlabeled),
                    "--scores", str(run_dir / "scores.csv"),
                    "--out", str(tmp_path / "m")])
        assert code == 1
        assert "label" in capsys.readouterr().err


class TestGenerate:
    def test_deterministic_artifacts(self, tmp_path):
        cfg = write_config(tmp_path, {"num_physicians": 12, "num_patients": 40,
                                      "prior_eta": 0.2, "seed": 3})
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(["generate", "--config", str(cfg), "--out", str(a)]) == 0
        assert run(["generate", "--config", str(cfg), "--out", str(b)]) == 0
        for name in ("patients.csv", "physicians.csv", "edges.csv", "schema.json",
                     "gentruth.json", "generate_manifest.json"):
            assert filecmp.cmp(a / name, b / name, shallow=False), name

    def test_seed_flag_overrides_config(self, tmp_path):
        cfg = write_config(tmp_path, {"num_physicians": 12, "num_patients": 40,
                                      "prior_eta": 0.2, "seed": 3})
        a, b = tmp_path / "a", tmp_path / "b"
        run(["generate", "--config", str(cfg), "--out", str(a)])
        run(["generate", "--config", str(cfg), "--seed", "4", "--out", str(b)])
        assert not filecmp.cmp(a / "patients.csv", b / "patients.csv",
                               shallow=False)
        manifest = json.loads((b / "generate_manifest.json").read_text())
        assert manifest["config"]["seed"] == 4

    def test_output_loads_and_validates(self, tmp_path):
        cfg = write_config(tmp_path, {"num_physicians": 12, "num_patients": 40,
                                      "prior_eta": 0.2, "seed": 3})
        out = tmp_path / "o"
        assert run(["generate", "--config", str(cfg), "--out", str(out)]) == 0
        cohort = load_cohort(out)
        assert cohort.num_physicians == 12
        cohort.validate(require_labels=True)


class TestPipeline:
    def test_fit_score_eval_round_trip(self, tmp_path, data_dir):
        run_dir = tmp_path / "run"
        assert run(["fit", "--in", str(data_dir), "--out", str(run_dir)]) == 0
        params = load_params(run_dir / "params.json")
        cohort = load_cohort(data_dir)
        direct = fit(cohort)
        assert params.schema_fingerprint == direct.schema_fingerprint
        assert params.patient.gender.pos.p == direct.patient.gender.pos.p

        assert run(["score", "--in", str(data_dir),
                    "--params", str(run_dir / "params.json"),
                    "--out", str(run_dir)]) == 0
        frame = pd.read_csv(run_dir / "scores.csv")
        phys = frame[frame["entity_type"] == "physician"]
        want = run_inference(build(cohort, direct)).physician_posterior
        np.testing.assert_allclose(
            phys["posterior_positive"].to_numpy(), want, atol=1e-15
        )
        assert phys["converged"].all()

        assert run(["eval", "--in", str(data_dir),
                    "--scores", str(run_dir / "scores.csv"),
                    "--out", str(run_dir)]) == 0
        doc = json.loads((run_dir / "metrics.json").read_text())
        score_map = dict(zip(phys["entity_id"], phys["posterior_positive"]))
        label_map = dict(zip(cohort.physicians.ids.tolist(),
                             cohort.physicians.labels.tolist()))
        want_report = curve_and_auc(score_map, label_map)
        assert doc["auc"] == pytest.approx(want_report.auc, abs=1e-12)
        assert doc["num_positive"] == int(cohort.physicians.labels.sum())

    def test_score_defaults_to_params_in_input_dir(self, tmp_path, data_dir):
        assert run(["fit", "--in", str(data_dir), "--out", str(data_dir)]) == 0
        out = tmp_path / "s"
        assert run(["score", "--in", str(data_dir), "--out", str(out)]) == 0
        assert (out / "scores.csv").exists()

    def test_inputs_never_mutated(self, tmp_path, data_dir):
        import hashlib
        before = {
            p.name: hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(data_dir.iterdir()) if p.suffix == ".csv"
        }
        run(["fit", "--in", str(data_dir), "--out", str(tmp_path / "x")])
        run(["crossval", "--in", str(data_dir), "--folds", "3",
             "--out", str(tmp_path / "y")])
        after = {
            p.name: hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(data_dir.iterdir()) if p.suffix == ".csv"
        }
        assert before == after

    def test_manifest_records_hashes(self, tmp_path, data_dir):
        out = tmp_path / "m"
        run(["fit", "--in", str(data_dir), "--out", str(out)])
        doc = json.loads((out / "fit_manifest.json").read_text())
        assert doc["command"] == "fit"
        assert "patients.csv" in doc["inputs"]
        assert set(doc["outputs"]) == {"params.json"}
        assert all(len(v) == 64 for v in doc["outputs"].values())
        assert "numpy" in doc["versions"]


class TestEvalFixture:
    def test_hand_curve_through_cli(self, tmp_path):
        cohort = build_cohort(
            patient_rows=[
                ("pa", 1, 0, 1, 1, [0, 0], [0, 0]),
                ("pb", 1, 1, 2, 2, [0, 0], [0, 0]),
                ("pc", 0, 0, 3, 1, [0, 0], [0, 0]),
                ("pd", 0, 1, 4, 2, [0, 0], [0, 0]),
            ],
            physician_rows=[("da", 1, 1, 0, 1), ("db", 1, 0, 1, 1),
                            ("dc", 0, 1, 2, 1), ("dd", 0, 0, 0, 1)],
            edge_rows=[("da", "pa", 1), ("db", "pb", 2),
                       ("dc", "pc", 1), ("dd", "pd", 3)],
            num_codes=2,
        )
        data = tmp_path / "data"
        save_cohort(cohort, data)
        scores = pd.DataFrame({
            "entity_type": ["physician"] * 4,
            "entity_id": ["da", "db", "dc", "dd"],
            "posterior_positive": [0.9, 0.4, 0.6, 0.1],
            "component_id": [0, 1, 2, 3],
            "converged": [True] * 4,
        })
        scores.to_csv(data / "scores.csv", index=False)
        out = tmp_path / "out"
        assert run(["eval", "--in", str(data), "--out", str(out)]) == 0
        doc = json.loads((out / "metrics.json").read_text())
        assert doc["auc"] == pytest.approx(19.0 / 24.0, abs=1e-12)
        curve = pd.read_csv(out / "curve.csv")
        np.testing.assert_allclose(curve["threshold"], [0.9, 0.6, 0.4, 0.1])
        np.testing.assert_allclose(curve["sensitivity"], [0.5, 0.5, 1.0, 1.0])
        np.testing.assert_allclose(curve["ppv"], [1.0, 0.5, 2 / 3, 0.5],
                                   atol=1e-12)

    def test_custom_sensitivity_grid_flag(self, tmp_path):
        self.test_hand_curve_through_cli(tmp_path)  # reuse written files
        data, out = tmp_path / "data", tmp_path / "g"
        assert run(["eval", "--in", str(data), "--out", str(out),
                    "--sensitivity-grid", "0.5,0.75,1.0"]) == 0
        doc = json.loads((out / "metrics.json").read_text())
        targets = [row["target_sensitivity"] for row in doc["sensitivity_grid"]]
        assert targets == [0.5, 0.75, 1.0]

    def test_bad_grid_rejected(self, tmp_path):
        self.test_hand_curve_through_cli(tmp_path)
        data = tmp_path / "data"
        assert run(["eval", "--in", str(data), "--out", str(tmp_path / "z"),
                    "--sensitivity-grid", "0.5,chonk"]) == 1


class TestCrossval:
    def test_folds_flag_beats_config(self, tmp_path, data_dir):
        cfg = write_config(tmp_path, {"folds": 4, "seed": 5})
        out = tmp_path / "cv"
        assert run(["crossval", "--in", str(data_dir), "--config", str(cfg),
                    "--folds", "3", "--out", str(out)]) == 0
        frame = pd.read_csv(out / "folds.csv")
        assert (frame["fold"].astype(str) != "mean").sum() == 2 * 3
        doc = json.loads((out / "crossval.json").read_text())
        assert len(doc["folds"]) == 3

    def test_deterministic(self, tmp_path, data_dir):
        a, b = tmp_path / "a", tmp_path / "b"
        args = ["crossval", "--in", str(data_dir), "--folds", "3",
                "--seed", "2"]
        assert run(args + ["--out", str(a)]) == 0
        assert run(args + ["--out", str(b)]) == 0
        assert filecmp.cmp(a / "folds.csv", b / "folds.csv", shallow=False)
        assert filecmp.cmp(a / "crossval.json", b / "crossval.json",
                           shallow=False)
