import json
import math

import pytest

import pydcm

SPEC = {"n_customers": 150, "n_periods": 4, "n_outcomes": 1, "n_channels": 2, "seed": 3}
REMOVE_ES = {"label": "es:off", "entries": [{"target": "es_all", "mode": "set", "value": 0}]}
UNIT = {"label": "unit", "entries": [{"target": "es_all", "mode": "scale", "value": 1}]}


@pytest.fixture(scope="module")
def economy():
    return pydcm.synth(json.dumps(SPEC))


@pytest.fixture(scope="module")
def model(economy):
    return pydcm.train(economy["config"], economy["panel"])


def test_version():
    assert pydcm.__version__ == "0.1.0"


def test_synth_is_seeded(economy):
    again = pydcm.synth(json.dumps(SPEC))
    assert again["panel"] == economy["panel"]
    assert economy["panel"].startswith("customer_id,period,")


def test_truth_matches_oracle(economy):
    shock = json.dumps(REMOVE_ES)
    scored = pydcm.score(economy["truth"], economy["panel"], shock)
    oracle = pydcm.oracle_score(economy["truth"], economy["panel"], shock)
    assert math.isclose(scored["total_delta"], oracle, rel_tol=1e-9)
    assert math.isclose(sum(scored["group_delta"]["product0"]), scored["total_delta"], rel_tol=1e-12)


def test_zero_shock(model, economy):
    r = pydcm.score(model, economy["panel"], json.dumps(UNIT), mode="residual-replay")
    assert all(d == 0.0 for d in r["delta"])


def test_shapley_efficiency(model, economy):
    players = [{"name": "a", "group": "channel0"}, {"name": "b", "group": "channel1"}]
    r = pydcm.shapley(model, economy["panel"], json.dumps(players))
    assert r["method"] == "exact"
    assert math.isclose(sum(r["phi"]), r["grand_value"], rel_tol=1e-9)


def test_bootstrap(economy):
    r = pydcm.bootstrap(economy["config"], economy["panel"], json.dumps(REMOVE_ES), replicates=20, seed=1)
    assert len(r["replicates"]) == 20
    assert r["lower"] <= r["upper"]


def test_errors_raise(economy):
    with pytest.raises(pydcm.DcmError, match="ParseError"):
        pydcm.train("{", economy["panel"])


def test_cli_entry(tmp_path):
    code, _, err = pydcm.run(["score"])
    assert code == 2
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(SPEC))
    code, _, err = pydcm.run(["synth", "--spec", str(spec), "--out-dir", str(tmp_path / "s")])
    assert code == 0, err
    manifest = json.loads((tmp_path / "s" / "manifest.json").read_text())
    assert manifest["command"] == "synth"
