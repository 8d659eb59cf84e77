import json

import pytest

from superburst import cli
from superburst.export import read_csv


def run(tmp_path, config, *extra, name="out"):
    cfg = tmp_path / f"{name}.json"
    cfg.write_text(json.dumps(config))
    out = tmp_path / name
    code = cli.main(["run", "--config", str(cfg), "--out", str(out), *extra])
    return code, out


def test_schema_command(capsys):
    assert cli.main(["schema"]) == 0
    schema = json.loads(capsys.readouterr().out)
    assert schema["additionalProperties"] is False


def test_unknown_key_rejected(tmp_path):
    code, _ = run(tmp_path, {"experiment": "rates", "colour": "blue"})
    assert code == 2


def test_unknown_experiment_rejected(tmp_path):
    code, _ = run(tmp_path, {"experiment": "movie"})
    assert code == 2


def test_emitter_cap(tmp_path):
    code, _ = run(tmp_path, {"experiment": "rates", "system": {"n": 21}})
    assert code == 2


def test_cap_override_env_rejected(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.CAP_ENV, "40")
    code, _ = run(tmp_path, {"experiment": "criteria-sweep"})
    assert code == 2


def test_missing_config(tmp_path):
    assert cli.main(["run", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2


def test_bad_seed(tmp_path):
    code, _ = run(tmp_path, {"experiment": "criteria-sweep"}, "--seed", "-1")
    assert code == 2


def test_rates_outputs(tmp_path):
    config = {
        "experiment": "rates",
        "system": {"n": 3, "kd": "generic"},
        "controls": {"n_traj": 20, "time_grid": {"stop": 1.0, "num": 5}, "write_events": True},
    }
    code, out = run(tmp_path, config, "--seed", "7")
    assert code == 0
    meta, header, rows = read_csv(out / "rates.csv")
    assert header == ["time", "rate", "stderr"]
    assert len(rows) == 5 and float(rows[0][1]) == pytest.approx(1.0)
    assert meta["seed"] == "7" and meta["n_traj"] == "20"
    info = json.loads((out / "metadata.json").read_text())
    assert info["config_hash"] == meta["config_hash"]
    assert "timestamp" in info
    assert len((out / "trajectories.jsonl").read_text().splitlines()) == 20
    assert json.loads((out / "channels.json").read_text())["channels"][0]["label"] == "plus"


def test_seed_changes_hash(tmp_path):
    config = {"experiment": "rates", "system": {"n": 2}, "controls": {"n_traj": 5}}
    _, a = run(tmp_path, config, "--seed", "1", name="a")
    _, b = run(tmp_path, config, "--seed", "2", name="b")
    assert read_csv(a / "rates.csv")[0]["config_hash"] != read_csv(b / "rates.csv")[0]["config_hash"]


def test_imbalance_outputs(tmp_path):
    config = {"experiment": "imbalance", "system": {"n": 3}, "controls": {"n_traj": 50, "t_cut": [1, 100]}}
    code, out = run(tmp_path, config)
    assert code == 0
    meta, header, rows = read_csv(out / "imbalance_t100.csv")
    assert header == ["imbalance", "probability", "count"]
    assert sum(float(r[1]) for r in rows) == pytest.approx(1.0)
    assert (out / "imbalance_t1.csv").exists()


def test_imbalance_needs_directional(tmp_path):
    config = {"experiment": "imbalance", "system": {"n": 3, "unraveling": "plus_minus"}}
    code, _ = run(tmp_path, config)
    assert code == 2


@pytest.mark.parametrize(
    "config, filename",
    [
        ({"experiment": "burst-map", "sweep": {"n": [2, 3], "kd": [0.5, "mirror"], "gamma_prime": [0, 1]}}, "burst_map.csv"),
        ({"experiment": "criteria-sweep", "sweep": {"n": [3], "kd": [1.0], "gamma_prime": [0]}}, "criteria.csv"),
        ({"experiment": "burst-probability", "sweep": {"n": [3], "ratio": [None, 2.0], "n_configs": 4}}, "burst_probability.csv"),
        ({"experiment": "ratio-n", "system": {"n": 4}, "controls": {"n_traj": 30, "n_max": 3}}, "ratio_n.csv"),
        (
            {
                "experiment": "giant",
                "giant": {"n": 3, "kd": 1.0, "ka": 0.5},
                "sweep": {"kd": [1.0], "ka": [0.5, 3.0]},
                "controls": {"n_traj": 5, "time_grid": {"stop": 0.5, "num": 3}},
            },
            "giant_crossover.csv",
        ),
    ],
)
def test_experiments_write_files(tmp_path, config, filename):
    code, out = run(tmp_path, config)
    assert code == 0
    _, header, rows = read_csv(out / filename)
    assert rows and all(len(r) == len(header) for r in rows)


def test_burst_map_verdicts(tmp_path):
    config = {"experiment": "burst-map", "sweep": {"n": [3, 6], "kd": ["mirror"], "gamma_prime": [0]}}
    _, out = run(tmp_path, config)
    _, _, rows = read_csv(out / "burst_map.csv")
    assert [r[4] for r in rows] == ["1", "1"] and [r[5] for r in rows] == ["1", "1"]


def test_rerun_identical(tmp_path):
    config = {"experiment": "imbalance", "system": {"n": 4, "kd": "generic"}, "controls": {"n_traj": 40}}
    _, a = run(tmp_path, config, name="a")
    _, b = run(tmp_path, config, name="b")
    for f in ("imbalance_t1.csv", "imbalance_t100.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
