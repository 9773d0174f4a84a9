import copy
import hashlib
import json
import shutil
import subprocess

import numpy as np
import pytest

from iciblotto import pipeline, reports
from iciblotto.cli import main
from iciblotto.errors import ScenarioError
from iciblotto.scenario import bundled_scenario_path, load_scenario, parse_scenario


@pytest.fixture(scope="module")
def bench_doc():
    return json.loads(bundled_scenario_path().read_bytes())


def write_doc(tmp_path, doc, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


# ---------------------------------------------------------------------------
# scenario parsing
# ---------------------------------------------------------------------------

def test_bundled_scenario_loads(bench_cfg):
    assert bench_cfg.sha256 == hashlib.sha256(bundled_scenario_path().read_bytes()).hexdigest()
    assert len(bench_cfg.generators) == 10
    assert len(bench_cfg.sensors) == 32
    assert bench_cfg.game.R_a / bench_cfg.game.R_d == pytest.approx(0.2)


def test_with_game_replaces_only_the_game(bench_cfg):
    cfg = bench_cfg.with_game(R_a=2.0, replicas=7)
    assert cfg.game.R_a == 2.0 and cfg.game.replicas == 7
    assert cfg.game.R_d == bench_cfg.game.R_d
    assert cfg.generators is bench_cfg.generators


@pytest.mark.parametrize("edit, match", [
    (lambda d: d.pop("game"), "missing section"),
    (lambda d: d["generators"][0].pop("inertia"), "inertia"),
    (lambda d: d["generators"][0].update(inertia="heavy"), "bad value"),
    (lambda d: d["game"].update(replicas=0), "replicas"),
    (lambda d: d["game"].update(attacker="single-ci:gas"), "defender-only"),
    (lambda d: d["game"].update(defender="single-ci:air"), "unknown CI"),
    (lambda d: d["game"].update(defender="random"), "unknown defender strategy"),
    (lambda d: d["coupling"].update(steam=[]), "unknown link"),
    (lambda d: d["sensors"].append(dict(d["sensors"][0])), "duplicate"),
    (lambda d: d["sensors"][0].update(ci="oil"), "ci must be"),
    (lambda d: d["noise"].update(psi=[1, 2]), "noise.psi"),
    (lambda d: d["generators"][0].update(inertia=-1.0), "ici-model"),
    (lambda d: d["junctions"][0].update(demand=[[3, 0.1]]), "start at step 0"),
])
def test_parse_errors(bench_doc, edit, match):
    doc = copy.deepcopy(bench_doc)
    edit(doc)
    with pytest.raises(ScenarioError, match=match):
        parse_scenario(doc)


def test_load_errors(tmp_path):
    with pytest.raises(ScenarioError, match="cannot read"):
        load_scenario(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ScenarioError, match="invalid JSON"):
        load_scenario(bad)
    with pytest.raises(ScenarioError, match="JSON object"):
        parse_scenario([1, 2])


def test_force_kappa(bench_valuation):
    v = pipeline.force_kappa(bench_valuation, ["gas"], 0.38)
    assert v.kappa(["gas"]) == pytest.approx(0.38, abs=1e-14)
    mask = v.mask(["gas"])
    # proportions inside and outside the subset are untouched
    np.testing.assert_allclose(v.phi_raw[~mask], bench_valuation.phi_raw[~mask], rtol=0)
    ratio = v.phi_raw[mask] / bench_valuation.phi_raw[mask]
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-13)
    with pytest.raises(ScenarioError):
        pipeline.force_kappa(bench_valuation, ["gas"], 1.0)
    with pytest.raises(ScenarioError):
        pipeline.force_kappa(bench_valuation, ["power", "gas", "water"], 0.5)


def test_matchup_errors(bench_valuation):
    with pytest.raises(ScenarioError, match="best-response"):
        pipeline.make_matchup(bench_valuation, 1.0, 5.0, "best-response", "best-response")


# ---------------------------------------------------------------------------
# pipeline and reports
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_run(bench_cfg, bench_system, bench_valuation):
    return pipeline.run_pipeline(bench_cfg, replicas=40, seed=11, valuation=bench_valuation,
                                 system=bench_system)


def test_realized_ced_is_scaled_utility(small_run, tmp_path):
    files = reports.emit_reports(small_run, tmp_path)
    header, rows = reports.read_csv(files["matches"])
    ced = np.array([float(r[header.index("ced")]) for r in rows])
    u_a = np.array([float(r[header.index("u_a")]) for r in rows])
    assert len(rows) == 40
    assert ced.mean() == pytest.approx(u_a.mean() * small_run.valuation.total, abs=1e-9)


def test_estimation_consistency(small_run):
    rep = small_run.report
    ok = np.isfinite(rep.max_q)
    assert ok.any()
    assert np.all(rep.max_q[ok] <= rep.q_joint[ok] + 1e-6)


def test_summary_reports_raw_and_enforced(small_run, tmp_path):
    files = reports.emit_reports(small_run, tmp_path)
    _, rows = reports.read_csv(files["summary"])
    s = dict(rows)
    assert int(s["consistency_violations"]) == 0
    assert s["verdict"] == "Blotto-valid"
    raw, cut = float(s["u_a_mean"]), float(s["u_a_mean_budget_enforced"])
    assert np.isfinite(cut) and abs(cut - raw) < 0.05
    assert float(s["U_a_closed_form"]) == 0.1


def test_valuation_csv_roundtrip(bench_valuation, tmp_path):
    path = reports.write_valuation(tmp_path / "v.csv", bench_valuation, reports.metadata("abc", 1))
    back = reports.read_valuation(path)
    np.testing.assert_array_equal(back.phi_raw, bench_valuation.phi_raw)
    assert back.ids == bench_valuation.ids
    assert back.infrastructure == bench_valuation.infrastructure
    assert path.read_text().startswith("# iciblotto=")


def test_empty_replica_list_gives_header_only(bench_valuation, bench_system, tmp_path):
    m = pipeline.make_matchup(bench_valuation, 1.0, 5.0)
    rep = pipeline.run_matches(bench_system, bench_valuation, m, 0, seed=1, track=("omega:G6",))
    assert rep.replicas == 0
    assert np.isnan(rep.summary()["compromised_mean"])
    p = reports.write_matches(tmp_path / "m.csv", rep, bench_valuation.ids)
    header, rows = reports.read_csv(p)
    assert header == reports.MATCH_COLUMNS and rows == []
    p = reports.write_trajectories(tmp_path / "t.csv", rep, 10)
    assert reports.read_csv(p) == (["step"], [])
    with pytest.raises(ScenarioError):
        pipeline.run_matches(None, bench_valuation, m, -1, seed=1)


def test_msne_compromise_fifty_replicas(bench_cfg, bench_system, bench_valuation):
    res = pipeline.run_pipeline(bench_cfg, replicas=50, valuation=bench_valuation, system=bench_system)
    assert 0.07 <= res.report.summary()["compromised_mean"] <= 0.14


def test_budget_ratio_closed_form(bench_valuation):
    rows, pairs = pipeline.compare_budget_ratios(bench_valuation, [(10, 20), (1, 20)], 50, 3)
    assert pairs[(0, 1)][0] == 10.0
    assert rows[0].Pi == 0.25 * bench_valuation.total


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def _outputs(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_simulate_is_byte_deterministic(tmp_path, capsys):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    for out, seed in ((a, 5), (b, 5), (c, 6)):
        assert main(["simulate", "--replicas", "4", "--seed", str(seed), "--out", str(out)]) == 0
    fa, fb, fc = _outputs(a), _outputs(b), _outputs(c)
    assert set(fa) == {"valuation.csv", "equilibrium.csv", "matches.csv", "trajectories.csv", "summary.csv"}
    assert fa == fb
    assert fa["matches.csv"] != fc["matches.csv"]
    assert "compromised" in capsys.readouterr().out


def test_every_subcommand_succeeds(tmp_path, capsys):
    out = str(tmp_path)
    assert main(["build", "--out", out]) == 0
    assert (tmp_path / "Ad.csv").exists() and (tmp_path / "sensors.csv").exists()
    assert main(["analyze", "--out", out]) == 0
    assert main(["equilibrium", "--out", out, "--values", str(tmp_path / "valuation.csv"), "--check-blotto"]) == 0
    assert "Blotto-valid" in capsys.readouterr().out
    assert main(["equilibrium", "--out", out, "--defend-subset", "gas"]) == 0
    assert main(["simulate", "--out", out, "--replicas", "2", "--no-kalman"]) == 0
    assert main(["report", "--out", out, "--replicas", "20", "--force-kappa", "gas=0.38", "--ra", "1",
                 "--rd", "4", "--subsets", "gas"]) == 0
    text = capsys.readouterr().out
    assert "Pi_bar/Pi=2.8600" in text
    header, rows = reports.read_csv(tmp_path / "interdependence.csv")
    assert float(rows[1][header.index("ratio_closed_form")]) == pytest.approx(2.86, abs=1e-12)


@pytest.mark.parametrize("argv, tag", [
    (["simulate", "--scenario", "/nonexistent/s.json"], "[sim-cli]"),
    (["equilibrium", "--ra", "10", "--rd", "1"], "[blotto]"),
    (["simulate", "--replicas", "0"], "[sim-cli]"),
    (["report", "--force-kappa", "gas"], "[sim-cli]"),
    (["equilibrium", "--values", "/nonexistent/v.csv"], "[sim-cli]"),
])
def test_cli_failures_are_tagged(argv, tag, tmp_path, capsys):
    assert main(argv + ["--out", str(tmp_path)]) != 0
    assert tag in capsys.readouterr().err


def test_cli_game_error_tag(tmp_path, capsys):
    path = tmp_path / "v.csv"
    reports.write_csv(path, ["sc_id", "phi_raw", "ci"], [["a", 1.0, "power"], ["b", 0.0, "gas"]])
    assert main(["equilibrium", "--values", str(path), "--out", str(tmp_path)]) == 0
    doc = json.loads(bundled_scenario_path().read_bytes())
    doc["game"]["R_a"] = 6.0
    assert main(["equilibrium", "--values", str(path), "--scenario", str(write_doc(tmp_path, doc)),
                 "--out", str(tmp_path)]) == 2
    assert "[blotto]" in capsys.readouterr().err


def test_cli_model_error_tag(tmp_path, capsys):
    doc = json.loads(bundled_scenario_path().read_bytes())
    doc["lines"].append({"from": "G1", "to": "G99", "reactance": 0.5})
    assert main(["build", "--scenario", str(write_doc(tmp_path, doc)), "--out", str(tmp_path)]) == 2
    assert "[ici-model]" in capsys.readouterr().err


@pytest.mark.skipif(shutil.which("iciblotto") is None, reason="console script not installed")
def test_console_script(tmp_path):
    done = subprocess.run(["iciblotto", "analyze", "--out", str(tmp_path)], capture_output=True, text=True)
    assert done.returncode == 0, done.stderr
    assert "32 clusters" in done.stdout
    done = subprocess.run(["iciblotto", "build", "--scenario", str(tmp_path / "none.json")],
                          capture_output=True, text=True)
    assert done.returncode == 2 and "error: [sim-cli]" in done.stderr
