import copy
import csv
import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from microgrid_moia import cli
from microgrid_moia.moia import MoiaParams
from microgrid_moia.scenario import (
    REFERENCE_SCENARIO,
    ScenarioError,
    SyntheticProfile,
    config_from_dict,
    fingerprint,
    load_document,
    load_scenario,
    moia_params_from_dict,
    reference_scenario,
)

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"
GOLDEN = Path(__file__).parent / "golden"
QUICK = ["--n-nom", "12", "--n-max", "48", "--t-max", "8"]


class TestScenarioFiles:
    def test_bundled_reference_file_matches_builtin(self):
        doc = load_document(SCENARIOS / "reference.yaml")
        assert doc == REFERENCE_SCENARIO
        a = load_scenario(SCENARIOS / "reference.yaml")
        b = reference_scenario()
        assert np.array_equal(a.base_load, b.base_load) and np.array_equal(a.res_output, b.res_output)
        assert fingerprint(a, MoiaParams()) == fingerprint(b, MoiaParams())

    def test_small_file(self):
        config = load_scenario(SCENARIOS / "small.yaml")
        assert config.horizon == 6 and config.n_storage == 1
        assert config.initial_stored.tolist() == [187.5]
        assert config.base_load[0].tolist() == [100.0] and config.res_output[0].tolist() == [20.0]

    def test_horizon_override(self):
        assert load_scenario(SCENARIOS / "small.yaml", horizon=2).horizon == 2
        with pytest.raises(ScenarioError):
            load_scenario(SCENARIOS / "small.yaml", horizon=0)
        with pytest.raises(ScenarioError):
            load_scenario(SCENARIOS / "small.yaml", horizon=7)

    def test_profile_csv(self, tmp_path):
        doc = load_document(SCENARIOS / "small.yaml")
        (tmp_path / "profile.csv").write_text("b1,v1\n100,20\n90,30\n")
        doc["profiles"] = {"file": "profile.csv"}
        doc["horizon"] = 2
        config = config_from_dict(doc, tmp_path)
        assert config.base_load.tolist() == [[100.0], [90.0]]
        (tmp_path / "bad.csv").write_text("b1,x1\n100,20\n")
        doc["profiles"] = {"file": "bad.csv"}
        with pytest.raises(ScenarioError):
            config_from_dict(doc, tmp_path)

    def test_synthetic_profile(self):
        syn = SyntheticProfile((90.0,), (0.35,), (60.0,), (8.0,), seed=7)
        base, res = syn.generate(48)
        assert base.shape == res.shape == (48, 1)
        assert (base > 0).all() and (res > 0).all()
        assert np.array_equal(base, syn.generate(48)[0])
        # evening peak above the early-morning trough
        assert base[19, 0] > base[7, 0]
        assert res[12, 0] > res[0, 0]

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda d: d.pop("alpha"),
            lambda d: d.__setitem__("alpha", -1.0),
            lambda d: d["microgrids"][0].pop("omega"),
            lambda d: d["microgrids"][0].__setitem__("demand_curve", [0.1, 0.2]),
            lambda d: d["microgrids"][0]["storage"].__setitem__("cap_secure", 300.0),
            lambda d: d.__setitem__("price_bounds", [5.5, 1.5]),
            lambda d: d.__setitem__("grid_cost", {"a": 1.0}),
            lambda d: d["profiles"].__setitem__("base_load", [[100.0]]),
            lambda d: d.__setitem__("utility_cap", "linear"),
            lambda d: d.__setitem__("initial_stored", [260.0]),
        ],
    )
    def test_schema_errors(self, mutate):
        doc = copy.deepcopy(load_document(SCENARIOS / "small.yaml"))
        mutate(doc)
        with pytest.raises(ScenarioError):
            config_from_dict(doc)

    def test_moia_params(self):
        assert moia_params_from_dict({}) == MoiaParams()
        assert moia_params_from_dict({"moia": {"t_max": 5}}, seed=9) == MoiaParams(t_max=5, seed=9)
        with pytest.raises(ScenarioError):
            moia_params_from_dict({"moia": {"n_nom": 0}})
        with pytest.raises(ScenarioError):
            moia_params_from_dict({"moia": {"generations": 5}})


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


class TestCli:
    def test_trace_columns_are_pinned(self):
        assert ",".join(cli.trace_columns(1, 1)) + "\n" == (GOLDEN / "trace_header_small.csv").read_text()
        assert ",".join(cli.trace_columns(3, 2)) + "\n" == (GOLDEN / "trace_header_reference.csv").read_text()

    def test_simulate_writes_trace_and_fronts(self, tmp_path, capsys):
        out = tmp_path / "run"
        assert run_cli("simulate", SCENARIOS / "small.yaml", "--out", out, "--dump-front", *QUICK) == 0
        text = (out / "trace.csv").read_text()
        assert text.splitlines()[0] + "\n" == (GOLDEN / "trace_header_small.csv").read_text()
        rows = list(csv.DictReader(text.splitlines()))
        assert [int(r["k"]) for r in rows] == list(range(6))
        assert all(1.5 <= float(r["lambda"]) <= 5.5 for r in rows)
        assert all(125.0 <= float(r["s1"]) <= 250.0 for r in rows)
        assert all(float(r["U_c"]) == 0.0 for r in rows)
        fronts = sorted((out / "fronts").iterdir())
        assert [f.name for f in fronts] == [f"step_{k:03d}.jsonl" for k in range(6)]
        for k, f in enumerate(fronts):
            recs = [json.loads(line) for line in f.read_text().splitlines()]
            assert len(recs) == int(rows[k]["archive_size"])
            assert all(set(r) == {"k", "price", "dispatch", "objectives"} for r in recs)
            assert all(r["k"] == k and len(r["dispatch"]) == 1 and len(r["objectives"]) == 4 for r in recs)
        assert "simulated 6 steps" in capsys.readouterr().out

    def test_same_manifest_twice_is_byte_identical(self, tmp_path):
        for name in ("a", "b"):
            assert run_cli("simulate", SCENARIOS / "small.yaml", "--out", tmp_path / name, "--dump-front",
                           "--seed", "5", *QUICK) == 0
        files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
        assert len(files) == 7
        for rel in files:
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()

    def test_seed_changes_output(self, tmp_path):
        run_cli("simulate", SCENARIOS / "small.yaml", "--out", tmp_path / "a", "--seed", "1", *QUICK)
        run_cli("simulate", SCENARIOS / "small.yaml", "--out", tmp_path / "b", "--seed", "2", *QUICK)
        assert (tmp_path / "a" / "trace.csv").read_bytes() != (tmp_path / "b" / "trace.csv").read_bytes()

    def test_horizon_zero_is_rejected(self, tmp_path, capsys):
        assert run_cli("simulate", SCENARIOS / "small.yaml", "--horizon", "0", "--out", tmp_path) == 2
        assert "error" in capsys.readouterr().err
        assert not (tmp_path / "trace.csv").exists()

    def test_missing_and_malformed_files(self, tmp_path):
        assert run_cli("simulate", tmp_path / "nope.yaml", "--out", tmp_path) == 2
        bad = tmp_path / "bad.yaml"
        bad.write_text("- just\n- a list\n")
        assert run_cli("verify", bad) == 2
        bad.write_text(yaml.safe_dump({"horizon": 3}))
        assert run_cli("verify", bad) == 2

    def test_verify_small_scenario_equivalence(self, capsys):
        run_cli("verify", SCENARIOS / "small.yaml", *QUICK)
        out = capsys.readouterr().out.splitlines()
        assert out[0].startswith("PASS equivalence")
        assert out[1].split()[0] in ("PASS", "FAIL") and "coverage seed=1" in out[1]
        assert "eps-consistent" in out[1]

    def test_verify_exit_status_follows_checks(self, monkeypatch, capsys):
        monkeypatch.setattr(cli, "COVERAGE_MIN", 0.0)
        assert run_cli("verify", SCENARIOS / "small.yaml", *QUICK) == 0
        monkeypatch.setattr(cli, "COVERAGE_MIN", 1.01)
        assert run_cli("verify", SCENARIOS / "small.yaml", *QUICK) == 1

    def test_verify_oversized_grid_is_skipped(self):
        config = load_scenario(SCENARIOS / "small.yaml")
        ok, lines = cli.verify(config, MoiaParams(12, 48, 8), budget=100)
        assert ok
        assert all(line.startswith("SKIP") and "budget" in line for line in lines)
