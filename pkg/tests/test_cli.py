import json

import pytest

from netsignal.cli import cli_main, grid_spec


def test_run_happy_path(tmp_path, capsys):
    out = tmp_path / "m.csv"
    code = cli_main(
        [
            "run",
            "--grid",
            "2x2",
            "--rate",
            "0.5",
            "--duration",
            "300",
            "--controller",
            "emc",
            "--budget-ms",
            "3000",
            "--seed",
            "7",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    assert out.exists()
    assert "travel_time" in capsys.readouterr().out


def test_zero_grid_is_usage_error(capsys):
    code = cli_main(["run", "--grid", "0x4", "--rate", "1", "--duration", "100"])
    capsys.readouterr()
    assert code == 2


def test_conflicting_network_flags(capsys):
    code = cli_main(
        ["run", "--grid", "2x2", "--roadnet", "x.json", "--rate", "1", "--duration", "100"]
    )
    capsys.readouterr()
    assert code == 2


def test_unknown_flag(capsys):
    code = cli_main(["run", "--grid", "2x2", "--rate", "1", "--duration", "100", "--warp", "9"])
    capsys.readouterr()
    assert code == 2


def test_rate_without_duration(capsys):
    code = cli_main(["run", "--grid", "2x2", "--rate", "1"])
    capsys.readouterr()
    assert code == 1


def test_missing_flow_source(capsys):
    code = cli_main(["run", "--grid", "2x2"])
    capsys.readouterr()
    assert code == 2


def test_grid_spec_parsing():
    assert grid_spec("4x4") == (4, 4)
    assert grid_spec("1X8") == (1, 8)
    with pytest.raises(Exception):
        grid_spec("4by4")


def test_gen_grid_and_flow_roundtrip(tmp_path, capsys):
    net_path = tmp_path / "net.json"
    flow_path = tmp_path / "flow.json"
    assert cli_main(["gen-grid", "--grid", "3x3", "--out", str(net_path)]) == 0
    assert cli_main(
        [
            "gen-flow",
            "--roadnet",
            str(net_path),
            "--rate",
            "0.5",
            "--duration",
            "200",
            "--seed",
            "3",
            "--out",
            str(flow_path),
        ]
    ) == 0
    assert len(json.loads(flow_path.read_text())) == 100
    capsys.readouterr()
    code = cli_main(
        [
            "run",
            "--roadnet",
            str(net_path),
            "--flow",
            str(flow_path),
            "--controller",
            "maxpressure",
            "--seed",
            "3",
        ]
    )
    assert code == 0


def test_missing_roadnet_file(capsys):
    code = cli_main(["run", "--roadnet", "missing.json", "--rate", "1", "--duration", "50"])
    capsys.readouterr()
    assert code == 1


def test_compare_emits_table(tmp_path, capsys):
    out = tmp_path / "cmp.csv"
    code = cli_main(
        [
            "compare",
            "--grid",
            "2x2",
            "--rate",
            "0.4",
            "--duration",
            "200",
            "--seed",
            "5",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 5  # header + one row per controller
    printed = capsys.readouterr().out
    for name in ("fixedtime", "maxpressure", "nlcoor", "emc"):
        assert name in printed


def test_comm_delay_command(capsys):
    code = cli_main(["comm-delay", "--grid", "3x3", "--mu", "20", "--passes", "2", "--seed", "2"])
    assert code == 0
    assert "modeled delay" in capsys.readouterr().out
