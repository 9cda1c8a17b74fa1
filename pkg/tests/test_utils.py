import json

import numpy as np
import pytest

from errors import NumericalError, UsageError
from models import ExperimentConfig, OutputFormat, RunStatus
from utils.file_utils import Artifact, iter_files, load_json, read_csv_rows, write_artifact, write_csv_atomic
from utils.parallel import map_trials
from utils.rng import derive_stream, trial_generator
from utils.run_manager import RunManager, run_experiment


class TestStreams:
    def test_same_path_same_draws(self):
        a = trial_generator(7, 1, 2).standard_normal(5)
        b = derive_stream(7, [1, 2]).generator().standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_sibling_paths_differ(self):
        a = trial_generator(7, 1).standard_normal(5)
        b = trial_generator(7, 2).standard_normal(5)
        assert not np.allclose(a, b)

    def test_child(self):
        stream = derive_stream(3).child(4, 5)
        assert stream.path == (4, 5)
        np.testing.assert_array_equal(stream.generator().random(3), trial_generator(3, 4, 5).random(3))

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            derive_stream(-1)
        with pytest.raises(ValueError):
            derive_stream(1, [0, -2])


class TestMapTrials:
    def test_results_do_not_depend_on_threads(self):
        def body(i, rng):
            return i, float(rng.random())

        serial = map_trials(body, 20, 11, path=(3,), threads=1)
        threaded = map_trials(body, 20, 11, path=(3,), threads=4)
        assert serial == threaded
        assert [r[0] for r in serial] == list(range(20))

    def test_zero_trials(self):
        assert map_trials(lambda i, rng: i, 0, 1) == []


class TestArtifacts:
    def test_csv_meta_and_rows(self, tmp_path):
        path = tmp_path / "table.csv"
        write_csv_atomic(path, [{"a": 1, "b": 0.1}, {"a": 2, "c": np.float64(3.5)}], meta={"seed": 4})
        text = path.read_text(encoding="utf-8")
        assert text.startswith("# seed: 4\n")
        rows = read_csv_rows(path)
        assert rows == [{"a": "1", "b": "0.1", "c": ""}, {"a": "2", "b": "", "c": "3.5"}]

    def test_json_meta_wrapper(self, tmp_path):
        path = tmp_path / "doc.json"
        write_artifact(Artifact("doc", OutputFormat.JSON, {"x": np.arange(3)}), path, meta={"seed": 1})
        document = load_json(path)
        assert document == {"meta": {"seed": 1}, "result": {"x": [0, 1, 2]}}

    def test_svg_meta_comment(self, tmp_path):
        path = tmp_path / "fig.svg"
        svg = '<?xml version="1.0"?>\n<svg></svg>'
        write_artifact(Artifact("fig", OutputFormat.SVG, svg), path, meta={"seed": 2})
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == '<?xml version="1.0"?>'
        assert lines[1].startswith("<!-- ") and '"seed": 2' in lines[1]
        assert [p.name for p in iter_files(tmp_path)] == ["fig.svg"]


def _config(**overrides):
    values = {"experiment": "demo", "params": {"n": 3}, "seed": 5, "format": OutputFormat.JSON}
    values.update(overrides)
    return ExperimentConfig(**values)


class TestRunManager:
    def test_config_hash_is_stable(self):
        assert _config().config_hash() == _config().config_hash()
        assert _config().config_hash() != _config(seed=6).config_hash()

    def test_completed_run(self, run_root, tmp_path):
        out = tmp_path / "copy.json"
        record, artifacts = run_experiment(
            _config(output=str(out)),
            lambda: [Artifact("result", OutputFormat.JSON, {"value": 1})],
        )
        run_dir = run_root / record.run_id
        assert record.status == RunStatus.COMPLETED
        assert record.run_id.startswith(f"demo-{_config(output=str(out)).config_hash()}-")
        assert record.files == {"result": "result.json"}
        saved = json.loads((run_dir / "run.json").read_text(encoding="utf-8"))
        assert saved["status"] == "completed"
        assert load_json(run_dir / "result.json")["result"] == {"value": 1}
        assert load_json(out)["meta"]["seed"] == 5

    def test_failed_run_writes_error(self, run_root):
        def body():
            raise UsageError("bad input", {"field": "n"})

        manager = RunManager()
        with pytest.raises(UsageError):
            run_experiment(_config(), body, manager)
        record = next(iter(manager.runs.values()))
        assert record.status == RunStatus.ERROR
        error = load_json(run_root / record.run_id / "error.json")
        assert error["error"] == "UsageError"
        assert error["exit_code"] == 2
        assert manager.get_run(record.run_id).error == "bad input"

    def test_unexpected_errors_are_wrapped(self, run_root):
        def body():
            raise ZeroDivisionError("boom")

        with pytest.raises(NumericalError):
            run_experiment(_config(), body, RunManager())
