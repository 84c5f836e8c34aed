"""End-to-end smoke test for the causalem python bindings."""

import json

import pytest

causalem = pytest.importorskip("causalem")


def test_generate_sample_learn_query_roundtrip():
    model = causalem.generate_model("m3", 0, 2, 2, 11)
    doc = json.loads(model)
    names = {v["name"] for v in doc["variables"]}
    assert {"X", "Y", "Z"} <= names

    csv = causalem.sample_csv(model, 400, 3)
    header, *rows = csv.strip().split("\n")
    assert header == "X,Y,Z"
    assert len(rows) == 400

    learned = causalem.learn(model, csv, seed=5, restarts=2, k_step=2, k_max=4)
    assert learned["k_lrn"] >= 2
    assert learned["log_likelihood"] < 0.0
    assert learned["bic"] > 0.0

    truth = causalem.query(model, "P(Y | do(X))")
    est = causalem.query(learned["model_json"], "P(Y | do(X))")
    assert truth["scope"] == ["X", "Y"]
    assert est["scope"] == ["X", "Y"]
    assert len(truth["values"]) == 4
    # Loose sanity bound; the statistical bar lives in the C++ tests.
    assert causalem.mad(est, truth) < 0.5


def test_identify_returns_estimand_text():
    model = causalem.generate_model("m1", 0, 2, 2, 1)
    result = causalem.identify(model, "P(Y | do(X))")
    assert result["identifiable"] is True
    assert "prob(" in result["estimand"]

    bad = causalem.identify(model, "P(Y | do(R))")
    assert isinstance(bad["identifiable"], bool)


def test_query_tables_are_distributions():
    model = causalem.generate_model("chain", 5, 2, 2, 2)
    table = causalem.query(model, "P(V4 | do(V0))")
    values = table["values"]
    # Each do-slice of the sweep normalizes to one.
    assert abs(values[0] + values[1] - 1.0) < 1e-9
    assert abs(values[2] + values[3] - 1.0) < 1e-9
