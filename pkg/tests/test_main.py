import sys
from pathlib import Path

import pytest

import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _run(monkeypatch, *argv):
    monkeypatch.setattr(sys, "argv", ["main.py", *argv])
    main.main()


def test_parse_args_defaults(monkeypatch):
    monkeypatch.delenv("VARLIN_SEED", raising=False)
    monkeypatch.setattr(sys, "argv", ["main.py"])
    args = main.parse_args()
    assert args.command == "report"
    assert args.seed is None
    assert args.plot_id is None


def test_parse_args_reads_the_environment(monkeypatch):
    monkeypatch.setenv("VARLIN_SEED", "11")
    monkeypatch.setenv("VARLIN_THREADS", "2")
    monkeypatch.setattr(sys, "argv", ["main.py", "blocks", "--config", "x.ini"])
    args = main.parse_args()
    assert (args.command, args.config, args.seed, args.threads) == ("blocks", "x.ini", 11, 2)


def test_command_line_overrides_the_file(monkeypatch, tmp_path):
    monkeypatch.setattr(
        sys, "argv", ["main.py", "--config", str(CONFIGS / "iid.ini"), "--seed", "3", "--out", str(tmp_path), "-q"]
    )
    config = main.load_config(main.parse_args())
    assert config.seed == 3
    assert config.out == str(tmp_path)
    assert not config.verbose


def test_list_models(monkeypatch, capsys):
    _run(monkeypatch, "--list-models")
    out = capsys.readouterr().out
    assert "iid" in out and "doubling" in out


def test_plot_needs_an_id(monkeypatch):
    with pytest.raises(SystemExit) as info:
        _run(monkeypatch, "plot", "-q")
    assert info.value.code == 2


def test_missing_experiment_file(monkeypatch, tmp_path):
    with pytest.raises(SystemExit) as info:
        _run(monkeypatch, "--config", str(tmp_path / "absent.ini"), "-q")
    assert info.value.code == 2


def test_infeasible_experiment_exit_code(monkeypatch, tmp_path):
    with pytest.raises(SystemExit) as info:
        _run(monkeypatch, "--config", str(CONFIGS / "infeasible.ini"), "--out", str(tmp_path / "x"), "-q")
    assert info.value.code == 3
    assert not (tmp_path / "x").exists()


def _small_experiment(tmp_path):
    path = tmp_path / "small.ini"
    path.write_text(
        "[experiment]\nmodel = iid\nn_grid = 64 128 256 512\nreplicates = 100\ndiagnostics = dk\n"
        f"out = {tmp_path / 'out'}\n"
    )
    return path


def test_blocks_command_writes_partitions(monkeypatch, tmp_path):
    _run(monkeypatch, "blocks", "--config", str(_small_experiment(tmp_path)), "-q")
    out = tmp_path / "out"
    assert (out / "partition_n64.csv").is_file()
    assert (out / "manifest.json").is_file()
    assert not (out / "dk.csv").exists()


def test_plot_command(monkeypatch, tmp_path):
    _run(monkeypatch, "plot", "--config", str(_small_experiment(tmp_path)), "--plot-id", "dk_vs_sigma", "-q")
    lines = (tmp_path / "out" / "plot_dk_vs_sigma.csv").read_text().splitlines()
    assert lines[0] == "series,x,y,y_err"
    assert len(lines) == 5


def test_check_environment(tmp_path, capsys):
    assert main.check_environment(str(CONFIGS / "iid.ini"), str(tmp_path / "out"))
    assert "4. Checking output directory... ✅" in capsys.readouterr().out


def test_check_environment_reports_a_bad_file(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[parameters]\nspread = 1/20\n")
    assert not main.check_environment(str(bad), str(tmp_path / "out"))
    assert "❌ FAILED" in capsys.readouterr().out
