import copy
import json
import math

import numpy as np
import pytest

from navgap.expert import generate_demos
from navgap.harness import io
from navgap.harness.cli import default_config_path, main, recompute_results
from navgap.harness.config import ConfigError, ExperimentConfig
from navgap.harness.experiment import ExperimentReport, StageError, build_source_worlds, make_demos, run_experiment
from navgap.simulator import SensorSpec
from navgap.worldgen import WorldGenSpec, generate_world, get_theme

TINY = {
    "seed": 3,
    "sensor": {"n_rays": 16, "fov_deg": 180, "max_range": 0.75},
    "source": {"name": "s", "n_maps": 1, "theme": "sim", "world": {"width": 8.0, "height": 8.0}},
    "episodes_per_map": 2,
    "environments": [{"name": "T", "n_maps": 1, "episodes": 2, "theme": "outdoor",
                      "world": {"width": 8.0, "height": 8.0, "category_palette": {"table": "outdoor"}}}],
    "presets": ["SEER"],
    "train": {"epochs": 1},
    "analysis": {"m_prime": 20, "classifier": {"epochs": 50}},
}


def tiny(**over):
    d = copy.deepcopy(TINY)
    d.update(over)
    return d


@pytest.fixture
def small_ds():
    w = generate_world(WorldGenSpec(6.0, 6.0, obstacle_density=0.2), 0)
    return generate_demos([w], [get_theme("sim")], 3, SensorSpec(8, math.pi / 2, 2.0), seed=0)


# config

def test_default_config_loads():
    cfg = ExperimentConfig.load(default_config_path())
    assert [e.name for e in cfg.environments] == ["E0", "E1", "E2", "E3", "E4"]
    assert cfg.presets == ["RGB", "SEER", "SEER_no_sem2nav", "DepthOnly", "NavOnly"]
    assert sum(g.n_maps for g in cfg.sources) * cfg.episodes_per_map == 600


@pytest.mark.parametrize("bad", [
    {"bogus": 1},
    {"presets": ["Thermal"]},
    {"sensor": {"n_rays": 0}},
    {"sim": {"turn_angle_deg": 15.5}},
    {"environments": [{"name": "A", "world": {"width": 8.0, "height": 8.0}, "theme": "sim"}] * 2},
    {"environments": [{"name": "A", "world": {"width": 8.0, "height": 8.0}, "theme": "nope"}]},
    {"environments": [{"name": "A", "world": {"width": 8.0, "height": 8.0}, "theme": "sim",
                       "noise": {"depth_blind": ["lava"]}}]},
    {"analysis": {"m_prime": 1}},
    {"train": {"seed": 4}},
])
def test_config_errors(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(tiny(**bad))


def test_outdoor_world_needs_theme_colors():
    env = {"name": "A", "theme": "sim", "world": {"width": 8.0, "height": 8.0,
                                                  "category_palette": {"table": "outdoor"}}}
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(tiny(environments=[env]))


def test_source_groups_must_share_noise():
    g = TINY["source"]
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(tiny(source=[g, dict(g, noise={"depth_noise_sd": 0.1})]))


def test_config_hash_ignores_seed():
    a = ExperimentConfig.from_dict(tiny())
    assert a.config_hash() == a.with_seed(9).config_hash()
    assert a.run_name() == f"{a.config_hash()}-seed3"
    assert ExperimentConfig.from_dict(tiny(episodes_per_map=3)).config_hash() != a.config_hash()


# datasets

def test_dataset_round_trip(tmp_path, small_ds):
    io.save_dataset(small_ds, tmp_path / "d.jsonl")
    assert io.manifest_path(tmp_path / "d.jsonl").exists()
    back = io.load_dataset(tmp_path / "d.jsonl")
    assert back.equals(small_ds)
    assert back.provenance == json.loads(json.dumps(small_ds.provenance))


def test_truncated_dataset_names_last_valid_line(tmp_path, small_ds):
    p = tmp_path / "d.jsonl"
    io.save_dataset(small_ds, p)
    lines = p.read_text().splitlines()
    p.write_text("\n".join(lines[:5]) + "\n" + lines[5][: len(lines[5]) // 2])
    with pytest.raises(io.DatasetError) as e:
        io.load_dataset(p)
    assert e.value.line == 6 and "last valid line 5" in str(e.value)
    p.write_text("\n".join(lines[:5]) + "\n")
    with pytest.raises(io.DatasetError) as e:
        io.load_dataset(p)
    assert "last valid line 5" in str(e.value)


def test_corrupt_records_rejected(tmp_path, small_ds):
    p = tmp_path / "d.jsonl"
    io.save_dataset(small_ds, p)
    lines = p.read_text().splitlines()
    rec = json.loads(lines[2])
    rec["action"] = 5
    lines[2] = json.dumps(rec)
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(io.DatasetError) as e:
        io.load_dataset(p)
    assert e.value.line == 3
    io.manifest_path(p).write_text("{}")
    with pytest.raises(io.DatasetError):
        io.load_dataset(p)


def test_tables_hash_mismatch(tmp_path, small_ds):
    p = tmp_path / "d.jsonl"
    io.save_dataset(small_ds, p)
    m = json.loads(io.manifest_path(p).read_text())
    m["tables_hash"] = "0" * 64
    io.manifest_path(p).write_text(json.dumps(m))
    with pytest.raises(io.DatasetError):
        io.load_dataset(p)


def test_worlds_round_trip(tmp_path):
    ws = [generate_world(WorldGenSpec(6.0, 6.0, obstacle_density=0.1), s) for s in range(3)]
    io.save_worlds(tmp_path, "E9", ws)
    back = io.load_worlds(tmp_path, "E9")
    assert [w.to_json() for w in back] == [w.to_json() for w in ws]


# reports

def fake_report():
    return ExperimentReport(
        "abc", 0,
        results=[{"environment": "E1", "preset": "RGB", "N": 4, "SR": 0.25, "SPL": 0.2},
                 {"environment": "E1", "preset": "SEER", "N": 4, "SR": 0.75, "SPL": 0.6123456789}],
        adistance=[{"environment": "E1", "representation": "rgb", "d_a": 1.5}],
    )


def test_header_only_csv():
    r = ExperimentReport("abc", 0)
    assert io.report_csv(r) == "environment,preset,N,SR,SPL\n"


def test_report_bytes_stable():
    a, b = fake_report(), fake_report()
    for fn in (io.report_csv, io.report_json, io.report_markdown):
        assert fn(a) == fn(b)
    assert "0.6123456789" in io.report_csv(a)


def test_markdown_parse_back():
    md = io.report_markdown(fake_report())
    parsed = io.parse_markdown(md)
    assert parsed["SR"] == {("E1", "RGB"): 0.25, ("E1", "SEER"): 0.75}
    assert parsed["SPL"][("E1", "SEER")] == 0.6123
    assert parsed["d_a"] == {("E1", "rgb"): 1.5}


def test_report_dict_round_trip():
    r = fake_report()
    assert ExperimentReport.from_dict(json.loads(io.report_json(r))).to_dict() == r.to_dict()


# pipeline

def test_minimal_run_emits_all_files(tmp_path):
    cfg = ExperimentConfig.from_dict(tiny())
    rep = run_experiment(cfg, tmp_path)
    for name in ("config.json", "demos.jsonl", "demos.jsonl.manifest.json", "trajectories.jsonl",
                 "report.json", "report.csv", "report.md", "checkpoints/SEER.json", "worlds/T-000.json"):
        assert (tmp_path / name).exists(), name
    assert rep.results[0]["N"] == 2
    assert {b["environment"] for b in rep.bounds} <= {"T"}
    parsed = io.parse_markdown((tmp_path / "report.md").read_text())
    assert parsed["SR"][("T", "SEER")] == round(rep.sr("T", "SEER"), 4)
    for row in rep.adistance:
        assert parsed["d_a"][("T", row["representation"])] == round(row["d_a"], 4)


def test_minimal_run_deterministic(tmp_path):
    cfg = ExperimentConfig.from_dict(tiny())
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b")
    ja = io.strip_wall_clock(json.loads((tmp_path / "a" / "report.json").read_text()))
    jb = io.strip_wall_clock(json.loads((tmp_path / "b" / "report.json").read_text()))
    assert json.dumps(ja, sort_keys=True) == json.dumps(jb, sort_keys=True)
    for name in ("report.csv", "report.md", "trajectories.jsonl", "demos.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_stage_error_names_stage(monkeypatch, tmp_path):
    import navgap.harness.experiment as ex

    def boom(*a, **k):
        raise RuntimeError("nope")

    monkeypatch.setattr(ex, "train", boom)
    with pytest.raises(StageError) as e:
        run_experiment(ExperimentConfig.from_dict(tiny()), tmp_path)
    assert e.value.stage == "train"
    assert (tmp_path / "demos.jsonl").exists()


def test_reference_config_demo_count():
    cfg = ExperimentConfig.load(default_config_path())
    ds = make_demos(cfg, *build_source_worlds(cfg))
    assert 15_000 <= len(ds) <= 40_000
    assert len(ds) == 25_528
    assert set(np.unique(ds.action)) == {0, 1, 2}


# CLI

def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def test_cli_bound(tmp_path, capsys):
    inp = write(tmp_path, "b.json", {"eps_s_hat": 0.1, "d_a": 0.4, "lambda": 0.05, "d": 3, "m": 1000,
                                    "m_prime": 1000, "delta": 0.05})
    assert main(["bound", "--input", inp]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["bound"] == 1.2302535489346105 and "lambda_note" not in out
    inp = write(tmp_path, "c.json", {"eps_s_hat": 0.1, "d_a": 0.4, "d": 3, "m": 1000, "m_prime": 1000})
    assert main(["bound", "--input", inp]) == 0
    assert "lambda_note" in json.loads(capsys.readouterr().out)


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["bound", "--input", write(tmp_path, "x.json", {"eps_s_hat": 3})]) == 2
    assert main(["run", "--config", write(tmp_path, "cfg.json", {"bogus": 1})]) == 2
    assert main(["train", "--config", write(tmp_path, "t.json", TINY), "--demos", str(tmp_path / "none.jsonl"),
                 "--preset", "SEER", "--out", str(tmp_path / "c.json")]) == 2


def test_cli_entropy_and_adistance(tmp_path, capsys):
    inp = write(tmp_path, "j.json", {"joint": np.full((2, 2, 2), 0.125).tolist()})
    assert main(["entropy", "--input", inp]) == 0
    assert json.loads(capsys.readouterr().out)["H_Z_given_X"] == pytest.approx(math.log(2))
    rng = np.random.default_rng(0)
    for name, shift in (("s.jsonl", -3.0), ("t.jsonl", 3.0)):
        (tmp_path / name).write_text("\n".join(json.dumps(r) for r in rng.normal(shift, 1, (50, 2)).tolist()))
    assert main(["adistance", "--source", str(tmp_path / "s.jsonl"), "--target", str(tmp_path / "t.jsonl")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["d_a"] > 1.9 and set(out) >= {"err_raw", "err_min", "d_a", "m_prime", "dims", "config"}


def test_cli_pipeline_and_verify(tmp_path, capsys):
    cfg = write(tmp_path, "tiny.json", TINY)
    demos = str(tmp_path / "d.jsonl")
    ck = str(tmp_path / "c.json")
    assert main(["gen-worlds", "--config", cfg, "--out", str(tmp_path / "w")]) == 0
    assert main(["gen-demos", "--config", cfg, "--out", demos]) == 0
    assert main(["train", "--config", cfg, "--demos", demos, "--preset", "SEER", "--out", ck]) == 0
    assert main(["eval", "--config", cfg, "--checkpoint", ck, "--env", "T",
                 "--out", str(tmp_path / "e.json")]) == 0
    assert json.loads((tmp_path / "e.json").read_text())["N"] == 2
    assert main(["eval", "--config", cfg, "--checkpoint", ck, "--env", "nope"]) == 2
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "runs"), "--seed", "4"]) == 0
    (run_dir,) = (tmp_path / "runs").iterdir()
    assert run_dir.name.endswith("-seed4")
    capsys.readouterr()
    assert main(["report", "--run", str(run_dir), "--verify", "--format", "csv"]) == 0
    assert "report matches stored trajectories" in capsys.readouterr().out
    got = {(r["environment"], r["preset"]): r["SR"] for r in recompute_results(run_dir)}
    rep = json.loads((run_dir / "report.json").read_text())
    assert got == {(r["environment"], r["preset"]): r["SR"] for r in rep["results"]}
