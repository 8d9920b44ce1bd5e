import json

import numpy as np
import pytest

from replicator import experiments as ex
from replicator.cli import main
from replicator.errors import ConfigError, InvalidArgumentError


def small(name, **sim):
    return ex.with_overrides(ex.preset(name), **({"paths": 400, "grid_n": 128} | sim))


def doc(name="scalar-w"):
    d = json.loads(ex.emit_config(ex.preset(name)))
    return d


@pytest.mark.parametrize("name", ex.preset_names())
def test_presets_parse_and_round_trip(name):
    cfg = ex.preset(name)
    again = ex.parse_config(ex.emit_config(cfg))
    assert again.to_dict() == cfg.to_dict()
    assert ex.emit_config(again) == ex.emit_config(cfg)


def test_defaults_filled_in():
    d = doc()
    del d["sim"]
    cfg = ex.parse_config(d)
    assert cfg.sim == ex.SIM_DEFAULTS


def test_alpha_out_of_range_rejected():
    d = doc()
    d["weight"]["alpha"] = 0.4
    with pytest.raises(ConfigError) as exc:
        ex.parse_config(d)
    assert any("(0.5, 1)" in v for v in exc.value.violations)


def test_degenerate_b_rejected():
    d = doc()
    d["system"]["b"] = [[0.0]]
    with pytest.raises(ConfigError) as exc:
        ex.parse_config(d)
    assert any("non-degenerate" in v for v in exc.value.violations)


def test_all_violations_reported_together():
    d = doc()
    d["system"]["b"] = [[0.0]]
    d["weight"]["alpha"] = 1.5
    d["gmatrix"]["entries"] = [[-1.0]]
    d["sim"]["paths"] = 3
    with pytest.raises(ConfigError) as exc:
        ex.parse_config(d)
    assert len(exc.value.violations) >= 4


@pytest.mark.parametrize("mutate, needle", [
    (lambda d: d.pop("claim"), "missing section"),
    (lambda d: d["claim"].update(variant="exotic"), "claim.variant"),
    (lambda d: d["system"].update(T=-1), "system.T"),
    (lambda d: d["gmatrix"].update(entries=[[1.0, 0.0], [0.0, 1.0]]), "gmatrix"),
    (lambda d: d["sim"].update(gamma=0.5), "gamma"),
])
def test_specific_violations(mutate, needle):
    d = doc()
    mutate(d)
    with pytest.raises(ConfigError) as exc:
        ex.parse_config(d)
    assert any(needle in v for v in exc.value.violations)


def test_malformed_json():
    with pytest.raises(ConfigError):
        ex.parse_config("{not json")


def test_markov_config_checks():
    d = doc("markov-cos")
    d["claim"]["diffusion"]["sigma"] = 0.01
    d["claim"]["payoff"]["kind"] = "digital"
    with pytest.raises(ConfigError) as exc:
        ex.parse_config(d)
    assert len(exc.value.violations) == 2


def test_unknown_preset_and_override():
    with pytest.raises(ConfigError):
        ex.preset("nope")
    with pytest.raises(InvalidArgumentError):
        ex.with_overrides(ex.preset("scalar-w"), colour="red")


def test_tabulated_payoff_from_csv(tmp_path):
    xs = np.linspace(-8, 8, 161)
    (tmp_path / "pay.csv").write_text("\n".join(f"{x},{np.cos(x)}" for x in xs.tolist()))
    d = doc("markov-cos")
    d["claim"]["payoff"] = {"kind": "tabulated", "csv": "pay.csv"}
    (tmp_path / "cfg.json").write_text(json.dumps(d))
    cfg = ex.load_config(tmp_path / "cfg.json")
    claim = ex.build_claim(cfg)
    assert claim.payoff.kind == "tabulated"
    with pytest.raises(InvalidArgumentError, match="no analytic reference"):
        ex.pde_check(cfg, write=False)


def test_thresholds():
    rep = ex.run(small("scalar-w"), write=False).report
    assert ex.evaluate_thresholds({}, rep) == []
    assert ex.evaluate_thresholds({"max_mean_gap_sq": 0.0}, rep)
    assert ex.evaluate_thresholds({"cost_rel_tol": 0.0}, rep)


def test_run_writes_byte_identical_csv(tmp_path):
    cfg = small("scalar-w2")
    a = ex.run(cfg, out=tmp_path / "a")
    ex.run(ex.with_overrides(cfg, workers=3), out=tmp_path / "b")
    assert (tmp_path / "a" / "report.csv").read_bytes() == (tmp_path / "b" / "report.csv").read_bytes()
    header = (tmp_path / "a" / "report.csv").read_text().splitlines()[0]
    assert header.split(",") == [c for c in ex.REPORT_COLUMNS]
    assert "wall time" in a.files[1].read_text()


def test_converge_single_and_multiple(tmp_path):
    rows, ratios, fails = ex.converge(small("scalar-w2"), [256], write=False)
    assert len(rows) == 1 and ratios == [] and fails == []
    rows, ratios, fails = ex.converge(small("scalar-w2", paths=2000), [256, 512, 1024], out=tmp_path)
    assert len(ratios) == 2 and all(r <= 0.7 for r in ratios) and fails == []
    assert (tmp_path / "converge.csv").exists()
    with pytest.raises(InvalidArgumentError):
        ex.converge(small("scalar-w2"), [512, 256], write=False)


def test_pde_check_rows(tmp_path):
    header, rows, fails = ex.pde_check(ex.preset("markov-cos"), resolutions=((101, 50), (201, 100)),
                                       out=tmp_path)
    assert len(rows) == 2 and rows[1][2] < rows[0][2]
    assert rows[0][-1] == 0.0
    assert (tmp_path / "pde_check.csv").read_text().startswith(",".join(header))
    with pytest.raises(InvalidArgumentError):
        ex.pde_check(ex.preset("scalar-w"), write=False)


def test_cost_table_values():
    header, rows = ex.cost_table([ex.preset("scalar-w"), ex.preset("scalar-w2")], write=False)
    assert rows[0][-1] == pytest.approx(1 / 3, rel=1e-10)
    assert rows[1][-1] == pytest.approx(85 / 84, rel=1e-10)


def test_cli_presets(capsys):
    assert main(["presets"]) == 0
    assert "scalar-w2" in capsys.readouterr().out


def test_cli_run_exit_codes(tmp_path, capsys):
    d = doc()
    d["sim"] |= {"paths": 400, "grid_n": 128}
    d["thresholds"] = {"max_mean_gap_sq": 1e-3}
    (tmp_path / "ok.json").write_text(json.dumps(d))
    assert main(["run", "--config", str(tmp_path / "ok.json"), "--out", str(tmp_path)]) == 0
    assert "PASSED" in capsys.readouterr().out
    assert main(["run", "--config", str(tmp_path / "ok.json"), "--preset", "scalar-w"]) == 2
    d["thresholds"] = {"max_mean_gap_sq": 0.0}
    (tmp_path / "strict.json").write_text(json.dumps(d))
    assert main(["run", "--config", str(tmp_path / "strict.json"), "--out", str(tmp_path)]) == 1
    assert "threshold failed" in capsys.readouterr().err
    d["weight"]["alpha"] = 0.4
    (tmp_path / "bad.json").write_text(json.dumps(d))
    assert main(["run", "--config", str(tmp_path / "bad.json")]) == 2
    assert "(0.5, 1)" in capsys.readouterr().err
    assert main(["run"]) == 2
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2


def test_cli_converge_pde_cost(tmp_path, capsys):
    assert main(["converge", "--preset", "scalar-w2", "--paths", "1000", "--n-list", "256,512",
                 "--out", str(tmp_path)]) == 0
    assert "ratio" in capsys.readouterr().out
    assert main(["pde-check", "--preset", "girsanov-linear", "--out", str(tmp_path)]) == 0
    assert main(["cost-table", "--preset", "scalar-w", "--out", str(tmp_path)]) == 0
    assert "0.3333333333" in capsys.readouterr().out
