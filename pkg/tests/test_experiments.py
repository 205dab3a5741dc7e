"""Tests for the config-driven experiment runners."""

import json

import numpy as np
import pytest

from timtin.channel import save_channel
from timtin.decomposition import Decomposition, save_decomposition
from timtin.errors import ValidationError
from timtin.experiments import (
    ExperimentConfig,
    config_from_dict,
    format_rows,
    parse_config,
    run_converge,
    run_decompose,
    run_neighboring,
    run_sweep,
    snr_to_power,
    worker_count,
    write_rows,
)
from timtin.instances import alignment_demo, two_tier_demo, two_tier_links


# ------------------------------------------------------------------ config


def test_config_defaults():
    cfg = config_from_dict({"kind": "sweep"})
    assert cfg.snr_db == (10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0)
    assert cfg.realizations == 200
    assert cfg.algorithms == ("zest", "tdma", "full_power", "max_sinr", "sapc")
    assert cfg.n == 2 and cfg.b == 1
    assert cfg.inits_low == 30 and cfg.inits_high == 10
    assert cfg.init_threshold_db == 30.0


def test_config_rejects_unknown_key():
    with pytest.raises(ValidationError, match="myconf.*unknown key 'snr'"):
        config_from_dict({"kind": "sweep", "snr": [10]}, where="myconf")


def test_config_requires_valid_kind():
    with pytest.raises(ValidationError, match="missing required key 'kind'"):
        config_from_dict({})
    with pytest.raises(ValidationError, match="'kind' must be one of"):
        config_from_dict({"kind": "plot"})


def test_config_snr_checks():
    with pytest.raises(ValidationError, match="strictly ascending"):
        config_from_dict({"kind": "sweep", "snr_db": [30, 20]})
    with pytest.raises(ValidationError, match="must not be empty"):
        config_from_dict({"kind": "sweep", "snr_db": []})
    with pytest.raises(ValidationError, match="list of numbers"):
        config_from_dict({"kind": "sweep", "snr_db": ["low"]})


def test_config_algorithm_checks():
    with pytest.raises(ValidationError, match="unknown algorithm 'fancy'"):
        config_from_dict({"kind": "sweep", "algorithms": ["zest", "fancy"]})
    with pytest.raises(ValidationError, match="must not be empty"):
        config_from_dict({"kind": "sweep", "algorithms": []})


def test_config_numeric_checks():
    with pytest.raises(ValidationError, match="'realizations' must be >= 1"):
        config_from_dict({"kind": "sweep", "realizations": 0})
    with pytest.raises(ValidationError, match="must be an integer"):
        config_from_dict({"kind": "sweep", "realizations": 2.5})
    with pytest.raises(ValidationError, match="must be an integer"):
        config_from_dict({"kind": "sweep", "n": True})
    with pytest.raises(ValidationError, match="'zest_tol' must be > 0"):
        config_from_dict({"kind": "sweep", "zest_tol": 0})
    with pytest.raises(ValidationError, match="'inits_low' must be >= 1"):
        config_from_dict({"kind": "sweep", "inits_low": 0})


def test_config_generator_checks():
    with pytest.raises(ValidationError, match="needs a 'type' entry"):
        config_from_dict({"kind": "sweep", "generator": {"K": 5}})
    with pytest.raises(ValidationError, match="generator type must be one of"):
        config_from_dict({"kind": "sweep", "generator": {"type": "mesh"}})
    with pytest.raises(ValidationError, match="'S' not valid for type 'cyclic'"):
        config_from_dict({"kind": "sweep", "generator": {"type": "cyclic", "S": 1}})
    with pytest.raises(ValidationError, match="'neighboring' needs key"):
        config_from_dict({"kind": "sweep", "generator": {"type": "neighboring", "K": 9}})


def test_config_channel_source_exclusive():
    with pytest.raises(ValidationError, match="not both"):
        config_from_dict(
            {
                "kind": "sweep",
                "channel_file": "chan.json",
                "generator": {"type": "cyclic", "K": 5},
            }
        )


def test_parse_config_files(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"kind": "sweep", "realizations": 3}))
    cfg = parse_config(path)
    assert cfg.kind == "sweep" and cfg.realizations == 3
    with pytest.raises(ValidationError, match="cannot read"):
        parse_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ValidationError, match="not valid JSON"):
        parse_config(bad)


def test_snr_to_power():
    assert snr_to_power(0.0) == pytest.approx(1.0)
    assert snr_to_power(10.0) == pytest.approx(10.0)
    assert snr_to_power(30.0) == pytest.approx(1000.0)


# ----------------------------------------------------------------- workers


def test_worker_count_env_cap(monkeypatch):
    monkeypatch.setenv("TIMTIN_THREADS", "2")
    assert worker_count(8) == 2
    assert worker_count(1) == 1
    monkeypatch.setenv("TIMTIN_THREADS", "abc")
    with pytest.raises(ValidationError, match="TIMTIN_THREADS"):
        worker_count(4)
    monkeypatch.setenv("TIMTIN_THREADS", "0")
    with pytest.raises(ValidationError, match=">= 1"):
        worker_count(4)
    monkeypatch.delenv("TIMTIN_THREADS")
    assert 1 <= worker_count(4) <= 4


# ------------------------------------------------------------------- sweep


def small_sweep_config(**overrides):
    fields = {
        "kind": "sweep",
        "snr_db": (40.0, 50.0),
        "realizations": 3,
        "algorithms": ("full_power", "tdma"),
        "generator": {"type": "cyclic", "K": 3, "x": 0.5},
    }
    fields.update(overrides)
    return config_from_dict(fields)


def test_run_sweep_row_structure():
    rows = run_sweep(small_sweep_config())
    assert len(rows) == 4  # 2 snr x 2 algorithms
    assert [(r[0], r[1]) for r in rows] == [
        (40.0, "full_power"),
        (40.0, "tdma"),
        (50.0, "full_power"),
        (50.0, "tdma"),
    ]
    for snr, alg, mean, std, count in rows:
        assert mean > 0 and np.isfinite(mean)
        assert std >= 0
        assert count == 3


def test_run_sweep_deterministic_across_workers(monkeypatch):
    header = ("snr_db", "algorithm", "mean", "std", "n")
    monkeypatch.setenv("TIMTIN_THREADS", "1")
    serial = format_rows(header, run_sweep(small_sweep_config()))
    monkeypatch.setenv("TIMTIN_THREADS", "3")
    threaded = format_rows(header, run_sweep(small_sweep_config()))
    assert serial == threaded


def test_run_sweep_with_zest_and_sapc():
    cfg = small_sweep_config(
        snr_db=(40.0,),
        realizations=2,
        algorithms=("zest", "sapc"),
        inits_low=2,
        inits_high=2,
    )
    rows = run_sweep(cfg)
    assert len(rows) == 2
    by_alg = {r[1]: r[2] for r in rows}
    assert by_alg["zest"] > 0 and by_alg["sapc"] > 0


def test_run_sweep_kind_check():
    cfg = config_from_dict({"kind": "converge"})
    with pytest.raises(ValidationError, match="not 'sweep'"):
        run_sweep(cfg)


def test_run_sweep_channel_file(tmp_path):
    path = tmp_path / "chan.json"
    save_channel(two_tier_demo(), path)
    cfg = config_from_dict(
        {
            "kind": "sweep",
            "channel_file": str(path),
            "snr_db": (40.0,),
            "realizations": 2,
            "algorithms": ("tdma",),
        }
    )
    rows = run_sweep(cfg)
    # the channel is fixed, so both realizations give the same TDMA number
    assert rows[0][3] == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------- converge


def test_run_converge_reaches_demo_optimum(tmp_path):
    path = tmp_path / "chan.json"
    save_channel(alignment_demo(), path)
    cfg = config_from_dict(
        {
            "kind": "converge",
            "channel_file": str(path),
            "snr_db": (40.0,),
            "algorithms": ("zest",),
        }
    )
    rows, finals = run_converge(cfg)
    assert all(r[0] == "zest" for r in rows)
    assert [r[1] for r in rows] == list(range(1, len(rows) + 1))
    for _, _, rate, gdof in rows:
        assert rate is not None and rate > 0  # phases were drawn for the file
        assert gdof is not None
    assert rows[-1][3] == pytest.approx(2.5, abs=1e-6)
    assert finals["zest"].converged


def test_run_converge_traces_per_algorithm():
    cfg = config_from_dict(
        {
            "kind": "converge",
            "generator": {"type": "cyclic", "K": 3, "x": 0.5},
            "snr_db": (40.0,),
            "algorithms": ("igpc", "sapc", "tdma", "max_sinr", "full_power"),
        }
    )
    rows, finals = run_converge(cfg)
    by_alg = {}
    for row in rows:
        by_alg.setdefault(row[0], []).append(row)
    assert len(by_alg["tdma"]) == 1 and by_alg["tdma"][0][3] is None
    assert len(by_alg["full_power"]) == 1
    gdofs = [r[3] for r in by_alg["igpc"]]
    assert all(g is not None for g in gdofs)
    assert all(b >= a - 1e-12 for a, b in zip(gdofs, gdofs[1:]))
    assert all(r[2] is not None for r in by_alg["sapc"])
    assert all(r[2] is not None for r in by_alg["max_sinr"])
    assert "sapc" in finals and "max_sinr" in finals


def test_run_converge_kind_check():
    with pytest.raises(ValidationError, match="not 'converge'"):
        run_converge(config_from_dict({"kind": "sweep"}))


# --------------------------------------------------------- reports


def test_run_decompose_report(tmp_path):
    spec = two_tier_demo()
    strong, mild = two_tier_links()
    decomp = Decomposition(tim_links=frozenset(strong), tin_links=frozenset(mild))
    path = tmp_path / "decomp.json"
    save_decomposition(path, spec, decomp)
    cfg = config_from_dict({"kind": "decompose", "decomposition_file": str(path)})
    report = run_decompose(cfg)
    assert report["tin_sym"] == pytest.approx(0.6, abs=1e-6)
    assert report["tim_sym"] == pytest.approx(0.5)
    assert report["product"] == pytest.approx(0.3, abs=1e-6)
    assert report["outer"] == pytest.approx(0.5)
    assert report["factor"] == pytest.approx(5.0 / 3.0, abs=1e-5)
    assert report["verified_min"] >= report["product"] - 1e-9

    direct = run_decompose(spec, decomp)
    assert direct == report


def test_run_decompose_threshold_path(tmp_path):
    path = tmp_path / "chan.json"
    save_channel(two_tier_demo(), path)
    cfg = config_from_dict(
        {"kind": "decompose", "channel_file": str(path), "threshold": 0.5}
    )
    report = run_decompose(cfg)
    assert report["product"] == pytest.approx(0.3, abs=1e-6)


def test_run_decompose_requires_inputs():
    with pytest.raises(ValidationError, match="decompose needs"):
        run_decompose(config_from_dict({"kind": "decompose"}))
    with pytest.raises(ValidationError, match="decompose needs"):
        run_decompose(two_tier_demo())


def test_run_neighboring_report():
    report = run_neighboring(1, 2, 10)
    assert report == {
        "S": 1,
        "M": 2,
        "K": 10,
        "d_sym": pytest.approx(0.25),
        "achieved_min": pytest.approx(0.25),
    }


# --------------------------------------------------------------- CSV text


def test_format_rows_rendering():
    text = format_rows(
        ("a", "b", "c"),
        [(1.0 / 3.0, None, "zest"), (40.0, 2, "x")],
    )
    lines = text.split("\n")
    assert lines[0] == "a,b,c"
    assert lines[1] == "0.3333333333,,zest"
    assert lines[2] == "40,2,x"
    assert text.endswith("\n")
    assert "\r" not in text


def test_write_rows_round_trip(tmp_path):
    path = tmp_path / "rows.csv"
    write_rows(path, ("x", "y"), [(0.5, "a")])
    assert path.read_bytes() == b"x,y\n0.5,a\n"
