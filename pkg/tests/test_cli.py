import json

import pytest

from repeatcode.channels import make_deletion
from repeatcode.cli import main, parse_channel
from repeatcode.harness import ConfigError


def _write_config(path, d=0.0, **kw):
    doc = {
        "channel": make_deletion(d).to_json(),
        "inner": {"block_len": 12, "candidates": 1, "trials": 0, "seed": 3},
        "outer": {"q": 2, "n_rs": 3, "k_rs": 1},
        "eta": 0.5,
        "trial_count": 10,
        "master_seed": 1,
    }
    doc.update(kw)
    path.write_text(json.dumps(doc))
    return path


def test_parse_channel(tmp_path):
    assert parse_channel("deletion:0.25").repeat_dist.pmf[0] == pytest.approx(0.25)
    assert parse_channel("poisson:1.5").is_repeat
    assert not parse_channel("deletion_flip:0.1,0.05").is_repeat
    f = tmp_path / "ch.json"
    f.write_text(json.dumps(make_deletion(0.3).to_json()))
    assert parse_channel(str(f)).repeat_dist.pmf[0] == pytest.approx(0.3)
    assert parse_channel(json.dumps(make_deletion(0.3).to_json())).is_repeat
    with pytest.raises(ConfigError):
        parse_channel("gaussian:1")
    with pytest.raises(ConfigError):
        parse_channel("deletion:abc")


def test_simulate_encode_decode(tmp_path, capsys):
    cfg = _write_config(tmp_path / "cfg.json")
    out = tmp_path / "run"
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--trials", "5"]) == 0
    assert "failure_rate=0 " in capsys.readouterr().out
    assert {p.name for p in out.iterdir()} == {"trials.csv", "summary.json", "code.json"}
    code = str(out / "code.json")
    assert main(["encode", "--code", code, "--input", "10"]) == 0
    x = capsys.readouterr().out.strip()
    assert len(x) == 3 * 12 + 2 * 6
    assert main(["decode", "--code", code, "--input", x]) == 0
    assert capsys.readouterr().out.strip() == "10"
    # a lone burst of ones decodes to nothing coherent
    assert main(["decode", "--code", code, "--input", "1" * 5]) == 1
    assert "decode failed" in capsys.readouterr().err


def test_config_errors_exit_2(tmp_path, capsys):
    bad = _write_config(tmp_path / "bad.json", inner={"m": 3, "block_len": 12})
    assert main(["simulate", "--config", str(bad)]) == 2
    eta = _write_config(tmp_path / "eta.json", eta=1.5)
    assert main(["simulate", "--config", str(eta)]) == 2
    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"channel": {}, "inner": {}, "outer": {}, "colour": 1}))
    assert main(["simulate", "--config", str(unknown)]) == 2
    assert main(["search-inner", "--channel", "deletion:0.1", "--m", "2", "--block-len", "16",
                 "--gamma", "0.6"]) == 2
    assert main(["info-rate", "--channel", "bogus"]) == 2
    assert "error:" in capsys.readouterr().err


def test_other_failures_exit_1(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == 1
    cfg = _write_config(tmp_path / "cfg.json")
    out = tmp_path / "run"
    main(["simulate", "--config", str(cfg), "--out", str(out), "--trials", "1"])
    assert main(["encode", "--code", str(out / "code.json"), "--input", "101"]) == 1
    capsys.readouterr()


def test_search_inner(tmp_path, capsys):
    dest = tmp_path / "code.json"
    assert main(["search-inner", "--channel", "deletion:0.1", "--m", "2", "--block-len", "12",
                 "--candidates", "2", "--trials", "50", "--out", str(dest)]) == 0
    assert "est_failure_prob=" in capsys.readouterr().out
    doc = json.loads(dest.read_text())
    assert len(doc["codebook"]) == 4 and all(len(w) == 12 for w in doc["codebook"])


def test_info_rate(capsys):
    assert main(["info-rate", "--channel", "deletion:0.5", "--n-max", "2"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("n,channel,i_rc")
    assert len(lines) == 3
    first = lines[1].split(",")
    assert float(first[2]) == pytest.approx(0.5)


def test_transmit(capsys):
    assert main(["transmit", "--channel", "deletion:0", "--input", "0110"]) == 0
    assert capsys.readouterr().out.strip() == "0110"
    assert main(["transmit", "--channel", "deletion:0.5", "--seed", "3", "--input", "1" * 40]) == 0
    y = capsys.readouterr().out.strip()
    assert set(y) <= {"1"} and len(y) < 40


def test_lemma_checks(tmp_path, capsys):
    cfg = _write_config(tmp_path / "cfg.json", lemma_checks={
        "rc_ns": [1, 2, 3], "tdc_ns": [1, 2], "density_ms": [16, 32], "density_trials": 50})
    dest = tmp_path / "lemma.json"
    assert main(["lemma-checks", "--config", str(cfg), "--out", str(dest)]) == 0
    doc = json.loads(dest.read_text())
    assert doc["trimming_gap_ok"] and len(doc["trimming_gap"]) == 3
    assert json.loads(capsys.readouterr().out) == doc


def test_scaling_cli(tmp_path, capsys):
    cfg = _write_config(tmp_path / "cfg.json", scaling={"sizes": [[2, 3, 1, 12], [3, 7, 3, 14], [4, 15, 11, 16]]})
    assert main(["scaling", "--config", str(cfg), "--trials", "3", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 4 and out[0].startswith("q,n_rs,k_rs")
    single = _write_config(tmp_path / "one.json", scaling={"sizes": [[2, 3, 1, 12]]})
    assert main(["scaling", "--config", str(single)]) == 2
