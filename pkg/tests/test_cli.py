"""End-to-end tests of the command-line front end."""

import json

import numpy as np
import pytest

import timtin.cli as cli
from timtin.channel import save_channel
from timtin.cli import main
from timtin.decomposition import Decomposition, save_decomposition
from timtin.errors import VerificationError
from timtin.gdof import load_txconfig, save_txconfig
from timtin.instances import (
    alignment_demo,
    two_tier_demo,
    two_tier_links,
    two_tier_scheme,
)


@pytest.fixture
def demo_channel(tmp_path):
    path = tmp_path / "chan.json"
    save_channel(two_tier_demo(), path)
    return str(path)


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


# -------------------------------------------------------------------- gdof


def test_gdof_command(tmp_path, capsys, demo_channel):
    txf = tmp_path / "tx.json"
    save_txconfig(txf, two_tier_scheme())
    code, out, err = run_cli(capsys, "gdof", demo_channel, str(txf))
    assert code == 0 and err == ""
    lines = out.strip().split("\n")
    assert lines[0] == "user,gdof"
    for k in range(5):
        user, val = lines[1 + k].split(",")
        assert user == str(k + 1)
        assert float(val) == pytest.approx(0.3, abs=1e-9)
    assert lines[6] == "sum,1.5"


def test_gdof_missing_file_exits_1(tmp_path, capsys, demo_channel):
    code, out, err = run_cli(capsys, "gdof", demo_channel, str(tmp_path / "no.json"))
    assert code == 1
    assert "error:" in err and "cannot read" in err


# -------------------------------------------------------------------- zest


def test_zest_command_with_outputs(tmp_path, capsys):
    chan = tmp_path / "chan.json"
    save_channel(alignment_demo(), chan)
    trace = tmp_path / "trace.csv"
    dump = tmp_path / "final.json"
    code, out, err = run_cli(
        capsys,
        "zest",
        str(chan),
        "--n",
        "2",
        "--seed",
        "3",
        "--trace",
        str(trace),
        "--dump-config",
        str(dump),
    )
    assert code == 0 and err == ""
    lines = out.strip().split("\n")
    assert lines[0] == "user,gdof"
    assert lines[-2].startswith("iterations,")
    assert lines[-1] == "converged,true"
    sum_line = [l for l in lines if l.startswith("sum,")][0]
    assert float(sum_line.split(",")[1]) == pytest.approx(2.5, abs=1e-6)

    trace_lines = trace.read_text().strip().split("\n")
    assert trace_lines[0].startswith("iter,sum_fwd,sum_switch_rev,sum_rev,sum_switch_fwd")
    assert len(trace_lines) >= 2

    tx = load_txconfig(dump)
    assert tx.n == 2 and tx.K == 5


def test_zest_rejects_bad_controls(tmp_path, capsys):
    chan = tmp_path / "chan.json"
    save_channel(alignment_demo(), chan)
    code, _, err = run_cli(capsys, "zest", str(chan), "--max-iter", "0")
    assert code == 1 and "max-iterations" in err


# --------------------------------------------------------------- decompose


def test_decompose_threshold(capsys, demo_channel):
    code, out, err = run_cli(capsys, "decompose", demo_channel, "--threshold", "0.5")
    assert code == 0 and err == ""
    got = dict(line.split(",") for line in out.strip().split("\n")[1:])
    assert float(got["tin_sym"]) == pytest.approx(0.6, abs=1e-6)
    assert float(got["tim_sym"]) == pytest.approx(0.5)
    assert float(got["product"]) == pytest.approx(0.3, abs=1e-6)
    assert float(got["factor"]) == pytest.approx(5.0 / 3.0, abs=1e-5)


def test_decompose_file_cross_check(tmp_path, capsys, demo_channel):
    spec = two_tier_demo()
    strong, mild = two_tier_links()
    dfile = tmp_path / "decomp.json"
    save_decomposition(dfile, spec, Decomposition(frozenset(strong), frozenset(mild)))
    code, out, _ = run_cli(capsys, "decompose", demo_channel, "--decomposition", str(dfile))
    assert code == 0
    assert "product,0.2999999" in out

    other = tmp_path / "other_chan.json"
    save_channel(alignment_demo(), other)
    code, _, err = run_cli(capsys, "decompose", str(other), "--decomposition", str(dfile))
    assert code == 1 and "decomposition-channel-mismatch" in err


def test_decompose_requires_one_source(capsys, demo_channel):
    code, _, err = run_cli(capsys, "decompose", demo_channel)
    assert code == 1 and "error:" in err


def test_decompose_verification_failure_exits_2(capsys, demo_channel, monkeypatch):
    def boom(spec, scheme):
        raise VerificationError("gdof-shortfall: forced for the exit-code test")

    monkeypatch.setattr("timtin.experiments.verify_scheme", boom)
    code, _, err = run_cli(capsys, "decompose", demo_channel, "--threshold", "0.5")
    assert code == 2
    assert "verification failed" in err


# ------------------------------------------------------------ experiments


def test_sweep_command_to_file(tmp_path, capsys):
    out_csv = tmp_path / "sweep.csv"
    cfg = {
        "kind": "sweep",
        "snr_db": [40.0],
        "realizations": 2,
        "algorithms": ["tdma", "full_power"],
        "generator": {"type": "cyclic", "K": 3, "x": 0.5},
        "output": str(out_csv),
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    code, out, err = run_cli(capsys, "sweep", "--config", str(cfg_path))
    assert code == 0 and out == "" and err == ""
    lines = out_csv.read_text().strip().split("\n")
    assert lines[0] == "snr_db,algorithm,mean_sum_rate,std_sum_rate,n_realizations"
    assert len(lines) == 3


def test_sweep_command_stdout(tmp_path, capsys):
    cfg = {
        "kind": "sweep",
        "snr_db": [40.0],
        "realizations": 1,
        "algorithms": ["tdma"],
        "generator": {"type": "cyclic", "K": 3, "x": 0.5},
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    code, out, _ = run_cli(capsys, "sweep", "--config", str(cfg_path))
    assert code == 0
    assert out.startswith("snr_db,algorithm,")


def test_converge_command_with_dump(tmp_path, capsys):
    chan = tmp_path / "chan.json"
    save_channel(alignment_demo(), chan)
    dump = tmp_path / "final.json"
    cfg = {
        "kind": "converge",
        "channel_file": str(chan),
        "snr_db": [40.0],
        "algorithms": ["zest", "tdma"],
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    code, out, _ = run_cli(
        capsys, "converge", "--config", str(cfg_path), "--dump-config", str(dump)
    )
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0] == "algorithm,iter,sum_rate,sum_gdof"
    zest_rows = [l for l in lines if l.startswith("zest,")]
    assert float(zest_rows[-1].split(",")[3]) == pytest.approx(2.5, abs=1e-6)
    tx = load_txconfig(dump)
    assert tx.K == 5

    # reproducibility: the dumped configuration re-evaluates to the traced value
    code, out2, _ = run_cli(capsys, "gdof", str(chan), str(dump))
    assert code == 0
    assert "sum,2.5" in out2


def test_converge_dump_needs_zest(tmp_path, capsys):
    cfg = {
        "kind": "converge",
        "generator": {"type": "cyclic", "K": 3, "x": 0.5},
        "snr_db": [40.0],
        "algorithms": ["tdma"],
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    code, _, err = run_cli(
        capsys, "converge", "--config", str(cfg_path), "--dump-config", str(cfg_path)
    )
    assert code == 1 and "nothing to dump" in err


# ------------------------------------------------------------- neighboring


def test_neighboring_command(capsys):
    code, out, err = run_cli(capsys, "neighboring", "--S", "1", "--M", "2", "--K", "10")
    assert code == 0 and err == ""
    got = dict(line.split(",") for line in out.strip().split("\n")[1:])
    assert got["S"] == "1" and got["M"] == "2" and got["K"] == "10"
    assert float(got["d_sym"]) == pytest.approx(0.25)
    assert float(got["achieved_min"]) == pytest.approx(0.25)


def test_neighboring_infeasible_ring_exits_1(capsys):
    code, _, err = run_cli(capsys, "neighboring", "--S", "1", "--M", "1", "--K", "7")
    assert code == 1 and "ring-divisibility" in err


# ------------------------------------------------------------------ parser


def test_unknown_command_exits_1(capsys):
    code, _, err = run_cli(capsys, "polish")
    assert code == 1 and "error:" in err


def test_missing_required_option_exits_1(capsys):
    code, _, err = run_cli(capsys, "sweep")
    assert code == 1 and "error:" in err
