import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from parallel_lives.cli import main
from parallel_lives.engine import execute
from parallel_lives.report import load_schema, run
from parallel_lives.scenarios import (
    REGISTRY,
    ScenarioDescriptor,
    ScenarioError,
    build_graph,
    check_expected,
    make_scenario,
    wigner_renderings,
)

VARIANTS = [
    ("bell_pms", {}), ("bell_pms", {"inflation": True}), ("bell_pms", {"gamma_block": True}),
    ("bell_pms", {"inflation": True, "gamma_block": True}),
    ("entangled_pair", {}), ("entangled_pair", {"basis": "x"}), ("entangled_pair", {"a": 1, "b": 0}),
    ("mach_zehnder", {}), ("mach_zehnder", {"second_bs": False}), ("mach_zehnder", {"bomb": True}),
    ("mach_zehnder", {"second_bs": False, "bomb": True}),
    ("quantum_eraser", {}), ("wigner_friend", {}), ("wigner_friend", {"a": 1, "b": 0}),
]


@pytest.mark.parametrize("name,params", VARIANTS)
def test_expected_blocks_pass(name, params):
    desc = make_scenario(name, **params)
    results = check_expected(desc, execute(build_graph(desc)))
    assert results and all(r.passed for r in results), [r for r in results if not r.passed]


@pytest.mark.parametrize("name,params", VARIANTS)
def test_descriptor_round_trip(name, params):
    desc = make_scenario(name, **params)
    text = json.dumps(desc.to_json())
    jsonschema.validate(json.loads(text), load_schema("scenario_descriptor"))
    again = ScenarioDescriptor.from_json(json.loads(text))
    assert build_graph(again).canonical_json() == build_graph(desc).canonical_json()
    assert dict(again.expected) == dict(desc.expected)


def test_scenario_errors():
    with pytest.raises(ScenarioError):
        make_scenario("nosuch")
    with pytest.raises(ScenarioError):
        make_scenario("entangled_pair", a=0.8, b=0.8)
    with pytest.raises(ScenarioError):
        make_scenario("mach_zehnder", mirrors=3)
    with pytest.raises(ScenarioError):
        make_scenario("bell_pms", inflation="maybe")


def test_pair_x_basis_fluids():
    ex = execute(build_graph(make_scenario("entangled_pair", basis="x")))
    assert ex.payloads["q1"].fluid_shares() == pytest.approx({("+",): 0.5, ("-",): 0.5})
    assert ex.payloads["d1"].fluid_shares() == pytest.approx({(0,): 16 / 25, (1,): 9 / 25})


def test_gamma_block_absorbs_everything():
    ex = execute(build_graph(make_scenario("bell_pms", gamma_block=True)))
    assert "E" not in ex.results
    assert ex.results["gamma"].absorbed
    assert sum(l.fluid for l in ex.results["gamma"].lives) == pytest.approx(1)


def test_wigner_lives_and_degenerate_chain():
    ex = execute(build_graph(make_scenario("wigner_friend")))
    assert [len(ex.payloads[e].lives) for e in ("cat", "schrodinger")] == [2, 2]
    assert len(ex.results["Wigner"].lives) == 2
    ex = execute(build_graph(make_scenario("wigner_friend", a=1, b=0)))
    assert len(ex.results["Wigner"].lives) == 1
    r = wigner_renderings()
    assert np.allclose(r["before"], r["unitary"], atol=1e-12)


def test_run_reports_validate_against_schemas():
    schema = load_schema("run_report")
    for model in ("parallel_lives", "pl_inflation", "inflation", "local_realist"):
        rep = run(make_scenario("bell_pms"), model, seed=2, samples=500 if model == "inflation" else 0)
        data = json.loads(rep.dumps())
        jsonschema.validate(data, schema)
        if "life_table" in data["tables"]:
            jsonschema.validate(data["tables"]["life_table"], load_schema("life_table"))
        if "hidden_variable_table" in data["tables"]:
            jsonschema.validate(data["tables"]["hidden_variable_table"], load_schema("hidden_variable_table"))
        assert data["passed"], model


def test_report_is_deterministic():
    a = run(make_scenario("entangled_pair"), "inflation", seed=7, samples=2000).dumps()
    b = run(make_scenario("entangled_pair"), "inflation", seed=7, samples=2000).dumps()
    assert a == b


def test_cli_bell_parallel_lives(capsys):
    assert main(["run", "--scenario", "bell_pms", "--model", "parallel_lives", "--format", "json"]) == 0
    data = json.loads(capsys.readouterr().out)
    rows = {r["carrier"]: r for r in data["tables"]["life_table"]["rows"]}
    assert rows["E"]["lives"] == 72 and data["seed"] == 0


def test_cli_inflation_sampling(capsys):
    argv = ["run", "--scenario", "entangled_pair", "--model", "inflation", "--seed", "7", "--samples", "100000"]
    assert main(argv) == 0
    stats = json.loads(capsys.readouterr().out)["statistics"]
    assert stats["p_value"] > 0.001 and "chi2" in stats


def test_cli_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--scenario", "nosuch"])
    assert exc.value.code != 0
    assert main(["run", "--scenario", "entangled_pair", "--param", "a=0.9"]) == 2
    assert "not normalized" in capsys.readouterr().err
    assert main(["run", "--scenario", "mach_zehnder", "--model", "local_realist"]) == 2
    with pytest.raises(SystemExit):
        main(["run", "--scenario", "bell_pms", "--param", "novalue"])


def test_cli_failing_expectation_exits_1(tmp_path):
    desc = make_scenario("mach_zehnder").to_json()
    desc["expected"] = {"detector:D0": 0.5}
    f = tmp_path / "mz.json"
    f.write_text(json.dumps(desc))
    assert main(["run", "--scenario-file", str(f), "--no-audit", "--out", str(tmp_path / "r.json")]) == 1
    assert json.loads((tmp_path / "r.json").read_text())["passed"] is False


def test_cli_output_dir_and_csv(tmp_path, monkeypatch):
    monkeypatch.setenv("PARALLEL_LIVES_OUTPUT_DIR", str(tmp_path))
    argv = ["run", "--scenario", "mach_zehnder", "--param", "bomb=true", "--format", "csv", "--out", "mz.csv"]
    assert main(argv) == 0
    lines = (tmp_path / "mz.csv").read_text().splitlines()
    assert lines[0].startswith("schema_version,scenario,model")
    assert "1.0,mach_zehnder,parallel_lives,0,engine,absorbed,0.5" in lines


def test_cli_list(capsys):
    assert main(["list"]) == 0
    assert set(line.split("\t")[0] for line in capsys.readouterr().out.splitlines()) == set(REGISTRY)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "parallel_lives", "run", "--scenario", "wigner_friend",
                           "--no-audit"], capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["scenario"]["name"] == "wigner_friend"
