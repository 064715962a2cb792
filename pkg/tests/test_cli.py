import json

import pytest

from vbfi.cli import main
from vbfi.dataset import TRAITS
from vbfi.questionnaire import load_questionnaire, score_response

SYNTH = ["synth", "--seed", "5", "--users", "16", "--views", "4", "--d", "4",
         "--informative", "2", "--levels", "2", "--noise-std", "0.3"]
TRAIN = ["train", "--all-traits", "--m", "2", "--j", "3",
         "--shrinkage", "0.5", "--min-common-users", "16"]


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    base = tmp_path_factory.mktemp("pipeline")
    data = base / "data"
    models = base / "models"
    assert main(SYNTH + ["--out", str(data)]) == 0
    assert main(TRAIN + ["--data", str(data), "--out", str(models)]) == 0
    q = base / "questionnaire.json"
    assert main(["design", "--models", str(models), "--data", str(data),
                 "--out", str(q), "--seed", "9"]) == 0
    return base


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self):
        assert main(["synth", "--bogus"]) == 1

    def test_unknown_command(self):
        assert main(["frobnicate"]) == 1

    def test_missing_data_is_data_error(self, tmp_path):
        assert main(["train", "--data", str(tmp_path), "--out",
                     str(tmp_path / "m"), "--all-traits"]) == 2

    def test_help_everywhere(self, capsys):
        defaults_expected = {"synth", "train", "evaluate", "sweep", "design",
                             "serve"}
        for sub in ("synth", "train", "evaluate", "sweep", "design", "score",
                    "serve", "expand-concepts"):
            assert main([sub, "--help"]) == 0
            out = capsys.readouterr().out
            assert "--help" in out
            if sub in defaults_expected:
                assert "default" in out  # defaults documented per flag


class TestSynth:
    def test_writes_three_files(self, pipeline_dir):
        data = pipeline_dir / "data"
        for name in ("images.jsonl", "favorites.csv", "traits.csv"):
            assert (data / name).exists()

    def test_deterministic_output(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(SYNTH + ["--out", str(a)]) == 0
        assert main(SYNTH + ["--out", str(b)]) == 0
        for name in ("images.jsonl", "favorites.csv", "traits.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()


class TestTrain:
    def test_five_model_files(self, pipeline_dir):
        models = pipeline_dir / "models"
        for trait in TRAITS:
            payload = json.loads((models / f"model_{trait}.json").read_text())
            assert payload["version"] == 1
            assert payload["trait"] == trait
            assert len(payload["rounds"]) == 2

    def test_idempotent(self, pipeline_dir, tmp_path):
        data = pipeline_dir / "data"
        out = tmp_path / "models2"
        assert main(TRAIN + ["--data", str(data), "--out", str(out)]) == 0
        for trait in TRAITS:
            assert (out / f"model_{trait}.json").read_bytes() == \
                (pipeline_dir / "models" / f"model_{trait}.json").read_bytes()


class TestEvaluateAndSweep:
    def test_evaluate_row_count(self, pipeline_dir, tmp_path):
        out = tmp_path / "cv.csv"
        code = main(["evaluate", "--data", str(pipeline_dir / "data"),
                     "--trait", "O", "--m", "2", "--j", "3",
                     "--folds", "4", "--repeats", "2",
                     "--min-common-users", "16", "--out", str(out)])
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "trait,repeat,fold,rmse"
        assert len(lines) == 1 + 4 * 2

    def test_evaluate_idempotent(self, pipeline_dir, tmp_path):
        args = ["evaluate", "--data", str(pipeline_dir / "data"),
                "--trait", "N", "--m", "2", "--j", "3", "--folds", "4",
                "--repeats", "1", "--min-common-users", "16"]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_sweep_csv(self, pipeline_dir, tmp_path):
        out = tmp_path / "sweep.csv"
        code = main(["sweep", "--data", str(pipeline_dir / "data"),
                     "--param", "M", "--values", "1,2", "--trait", "C",
                     "--j", "3", "--folds", "4", "--repeats", "1",
                     "--min-common-users", "16", "--out", str(out)])
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "param,value,trait,mean_rmse,std_rmse,p_value"
        assert len(lines) == 3


class TestDesignAndScore:
    def test_manifest_and_images(self, pipeline_dir, tmp_path):
        q = load_questionnaire(pipeline_dir / "questionnaire.json")
        assert q.num_questions() == 10  # 5 traits x M=2
        img_dir = tmp_path / "imgs"
        code = main(["design", "--models", str(pipeline_dir / "models"),
                     "--data", str(pipeline_dir / "data"),
                     "--out", str(tmp_path / "q2.json"),
                     "--cluster-choice", "2", "--seed", "9",
                     "--emit-images", str(img_dir)])
        assert code == 0
        q2 = load_questionnaire(tmp_path / "q2.json")
        assert q2.cluster_choice == 2
        pngs = list(img_dir.glob("*.png"))
        referenced = {o.image_id for t in TRAITS
                      for qq in q2.traits[t].questions for o in qq.options}
        assert {p.stem for p in pngs} == referenced

    def test_design_deterministic(self, pipeline_dir, tmp_path):
        out = tmp_path / "q_again.json"
        code = main(["design", "--models", str(pipeline_dir / "models"),
                     "--data", str(pipeline_dir / "data"),
                     "--out", str(out), "--seed", "9"])
        assert code == 0
        assert out.read_bytes() == \
            (pipeline_dir / "questionnaire.json").read_bytes()

    def test_score_matches_library(self, pipeline_dir, tmp_path, capsys):
        q = load_questionnaire(pipeline_dir / "questionnaire.json")
        responses = tmp_path / "responses.jsonl"
        sheets = []
        with open(responses, "w") as fh:
            for i, pick in enumerate((1, 2)):
                choices = [
                    {"trait": t, "round": qq.round,
                     "leaf_index": qq.options[min(pick, len(qq.options)) - 1]
                     .leaf_index}
                    for t in TRAITS for qq in q.traits[t].questions]
                row = {"subject_id": f"s{i}", "version_id": q.version_id,
                       "choices": choices, "self_rating": None}
                sheets.append(row)
                fh.write(json.dumps(row) + "\n")
        code = main(["score", "--questionnaire",
                     str(pipeline_dir / "questionnaire.json"),
                     "--responses", str(responses)])
        assert code == 0
        out_lines = capsys.readouterr().out.strip().splitlines()
        assert out_lines[0] == "subject_id," + ",".join(TRAITS)
        assert len(out_lines) == 3
        from vbfi.questionnaire import response_from_dict
        for line, row in zip(out_lines[1:], sheets):
            fields = line.split(",")
            expect = score_response(q, response_from_dict(row))
            assert fields[0] == row["subject_id"]
            for value, trait in zip(fields[1:], TRAITS):
                assert float(value) == expect[trait]


class TestExpandConcepts:
    def test_expands_with_hierarchy(self, pipeline_dir, tmp_path):
        hierarchy = tmp_path / "hierarchy.json"
        hierarchy.write_text(json.dumps({
            "edges": [{"child": "c00", "parent": "scenery"},
                      {"child": "c01", "parent": "scenery"}]}))
        out = tmp_path / "expanded"
        code = main(["expand-concepts", "--data", str(pipeline_dir / "data"),
                     "--hierarchy", str(hierarchy), "--levels", "3",
                     "--out", str(out)])
        assert code == 0
        found = False
        with open(out / "images.jsonl") as fh:
            for line in fh:
                obj = json.loads(line)
                if "c00" in obj["concepts"]:
                    assert "scenery" in obj["concepts"]
                    found = True
        assert found
