import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hierbandit import engine
from hierbandit.arms import example_arm_set
from hierbandit.cli import main
from hierbandit.engine import example_hierarchy
from hierbandit.io import (
    ConfigError,
    RunRecord,
    config_hash,
    emit_csv,
    emit_plot,
    parse_config,
    serialize_config,
)

SVG = "{http://www.w3.org/2000/svg}"

MINIMAL = {
    "arms": {"kind": "Bernoulli", "arms": [{"p": 0.9}, {"p": 0.4}]},
    "hierarchy": {"top": {"kind": "AlphaUCB", "alpha": 3.0}, "layers": []},
    "horizon": 200,
    "seed": 4,
}


def example_doc():
    return {
        "arms": example_arm_set().to_dict(),
        "hierarchy": example_hierarchy().to_dict(),
        "horizon": 10_000,
        "seed": 0,
    }


def test_minimal_config_parses():
    cfg = parse_config(json.dumps(MINIMAL))
    assert cfg.arms.K == 2
    assert cfg.hierarchy.R == 0
    assert cfg.horizon == 200


def test_example_round_trip():
    cfg = parse_config(json.dumps(example_doc()))
    text = serialize_config(cfg)
    again = parse_config(text)
    assert again.arms == example_arm_set()
    assert again.hierarchy == example_hierarchy()
    assert serialize_config(again) == text


@pytest.mark.parametrize(
    "mutate,where",
    [
        (lambda d: d["hierarchy"]["layers"][0][1].update(alpha="5.33"), "hierarchy.layers[0][1].alpha"),
        (lambda d: d["hierarchy"]["layers"][1].append({"kind": "BadFixed", "target": 7}), "hierarchy.layers[1][5]"),
        (lambda d: d["arms"]["arms"][2].update(p=1.5), "arms.arms[2].p"),
        (lambda d: d.update(horizon=0), "horizon"),
        (lambda d: d.update(colour="red"), "<root>"),
    ],
)
def test_errors_name_the_field(mutate, where):
    doc = example_doc()
    mutate(doc)
    with pytest.raises(ConfigError) as exc:
        parse_config(json.dumps(doc))
    assert str(exc.value).startswith(where)


def test_malformed_json():
    with pytest.raises(ConfigError, match="malformed"):
        parse_config("{not json")


def test_config_hash_is_order_independent():
    a = {"x": 1, "y": [1, 2]}
    b = {"y": [1, 2], "x": 1}
    assert config_hash(a) == config_hash(b)
    assert len(config_hash(a)) == 16


def test_emit_csv_for_trace(tmp_path):
    trace = engine.run(example_hierarchy(), example_arm_set(), 500, 0)
    paths = emit_csv(trace, tmp_path)
    lines = (tmp_path / "regret.csv").read_text().splitlines()
    assert lines[0] == "round,cumulative_regret"
    assert len(lines) - 1 == 501
    assert lines[1] == "0,0.0"
    for d in range(3):
        rows = (tmp_path / f"selection_layer_{d}.csv").read_text().splitlines()[1:]
        assert sum(int(v) for r in rows for v in r.split(",")[1:]) == 500
    first = {p.name: p.read_bytes() for p in paths}
    emit_csv(trace, tmp_path)
    assert {p.name: p.read_bytes() for p in paths} == first


def test_emit_csv_rejects_other_types(tmp_path):
    with pytest.raises(TypeError):
        emit_csv({"a": 1}, tmp_path)


def test_run_record_without_epoch(monkeypatch):
    monkeypatch.delenv("SOURCE_DATE_EPOCH", raising=False)
    trace = engine.run(example_hierarchy(), example_arm_set(), 50, 0)
    rec = RunRecord.from_trace(trace, 0, "abc")
    assert rec.timestamp is None
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    assert RunRecord.from_trace(trace, 0, "abc").timestamp == 1700000000


def _polylines(svg):
    root = ET.fromstring(svg)
    return root, [p for p in root.iter(f"{SVG}polyline") if p.get("class") == "curve"]


def test_plot_flat_zero_curve():
    svg = emit_plot({"zero": np.zeros(50)})
    _, lines = _polylines(svg)
    assert len(lines) == 1
    ys = {pt.split(",")[1] for pt in lines[0].get("points").split()}
    assert len(ys) == 1


def test_plot_two_named_curves(tmp_path):
    path = tmp_path / "pair.svg"
    svg = emit_plot({"R1": np.linspace(0, 5, 100), "R2": np.linspace(0, 7, 100)}, path)
    root, lines = _polylines(svg)
    assert [p.get("data-name") for p in lines] == ["R1", "R2"]
    assert path.read_text() == svg
    texts = [t.text for t in root.iter(f"{SVG}text")]
    assert "R1" in texts and "R2" in texts


def test_plot_shared_axis_and_thinning():
    i = np.arange(1, 31)
    svg = emit_plot({"M_i": i * 2.0, "N_i": i * 1.5}, x=i, xlabel="i")
    _, lines = _polylines(svg)
    assert all(len(p.get("points").split()) == 30 for p in lines)
    _, big = _polylines(emit_plot({"long": np.arange(100_000.0)}))
    assert len(big[0].get("points").split()) <= 2000


def test_plot_errors():
    with pytest.raises(ValueError):
        emit_plot({})
    with pytest.raises(ValueError):
        emit_plot({"a": np.zeros(3), "b": np.zeros(4)})


def _write_config(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def test_cli_simulate(tmp_path, capsys):
    cfg = _write_config(tmp_path, MINIMAL)
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    for name in ("regret.csv", "selection_layer_0.csv", "runs.jsonl", "regret.svg"):
        assert (out / name).exists()
    rec = json.loads((out / "runs.jsonl").read_text())
    assert rec["seed"] == 4 and rec["horizon"] == 200
    assert "final pseudo-regret" in capsys.readouterr().out


def test_cli_out_env(tmp_path, monkeypatch):
    cfg = _write_config(tmp_path, MINIMAL)
    monkeypatch.setenv("HIERBANDIT_OUT", str(tmp_path / "env_out"))
    assert main(["simulate", "--config", str(cfg), "--horizon", "20"]) == 0
    assert (tmp_path / "env_out" / "regret.csv").exists()


def test_cli_bounds(tmp_path, capsys):
    cfg = _write_config(tmp_path, example_doc())
    assert main(["bounds", "--config", str(cfg), "--n", "10000"]) == 0
    text = capsys.readouterr().out
    doc = json.loads(text[: text.index("\n}") + 2])
    names = [b["name"] for b in doc["bounds"]]
    assert "bottom_layer" in names and "good_expert" in names
    assert "lai_robbins_lower" not in names  # deterministic arms
    assert doc["bounds"][names.index("bottom_layer")]["intermediates"]["alpha_star"] == 8.41


def test_cli_experiment(tmp_path):
    doc = {"experiment": {"kind": "ParamInflation", "processes": 2, "repeats": 1, "horizon": 100}}
    cfg = _write_config(tmp_path, doc)
    out = tmp_path / "exp"
    assert main(["experiment", "param-inflation", "--config", str(cfg), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["processes"] == 2
    assert (out / "table_r1_r2.csv").exists()
    assert (out / "regret_process_0000.svg").exists()
    assert len((out / "records.jsonl").read_text().splitlines()) == 2


def test_cli_experiment_kind_mismatch(tmp_path):
    cfg = _write_config(tmp_path, {"experiment": {"kind": "ExpertCount"}})
    assert main(["experiment", "param-inflation", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_cli_exit_codes(tmp_path, capsys):
    bad = _write_config(tmp_path, {"arms": {"kind": "Bernoulli", "arms": [{"p": "x"}, {"p": 0.1}]}})
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "arms.arms[0].p" in capsys.readouterr().err
    assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == 3
    no_h = _write_config(tmp_path, {k: v for k, v in MINIMAL.items() if k != "horizon"}, "noh.json")
    assert main(["simulate", "--config", str(no_h), "--out", str(tmp_path)]) == 2


policies = st.one_of(
    st.builds(lambda a: {"kind": "AlphaUCB", "alpha": a}, st.floats(2.01, 50.0)),
    st.builds(lambda e: {"kind": "EpsilonGreedy", "epsilon": e}, st.floats(0.0, 1.0)),
    st.builds(lambda t: {"kind": "BadFixed", "target": t}, st.integers(0, 1)),
    st.just({"kind": "LeastPulls"}),
)


@st.composite
def configs(draw):
    means = sorted(draw(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=6, unique=True)), reverse=True)
    kind = draw(st.sampled_from(["Deterministic", "Bernoulli"]))
    layers = draw(st.lists(st.lists(policies, min_size=2, max_size=3), max_size=3))
    doc = {
        "arms": {"kind": kind, "arms": [{"p": m} for m in means]},
        "hierarchy": {
            "top": draw(policies),
            "layers": layers,
            "observation_mode": draw(st.sampled_from(["Shared", "Local"])),
            "clock": draw(st.sampled_from(["Global", "Local"])),
        },
    }
    for key, strat in (("horizon", st.integers(1, 10**6)), ("seed", st.integers(0, 2**32)), ("epsilon", st.floats(0, 1))):
        if draw(st.booleans()):
            doc[key] = draw(strat)
    if draw(st.booleans()):
        doc["experiment"] = {"kind": "ParamInflation", "processes": draw(st.integers(1, 50))}
    return doc


@settings(max_examples=150, deadline=None)
@given(configs())
def test_parse_serialize_identity(doc):
    cfg = parse_config(json.dumps(doc))
    text = serialize_config(cfg)
    again = parse_config(text)
    assert again == cfg
    assert serialize_config(again) == text
    assert config_hash(again.to_dict()) == config_hash(cfg.to_dict())
