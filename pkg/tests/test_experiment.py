import json
from pathlib import Path

import pytest

from varlin.errors import ConfigError, InfeasibleMixingError, UsageError, ValidationError
from varlin.experiment import (
    STAGES,
    ExperimentConfig,
    ExperimentRunner,
    emit_plot_data,
    run_experiment,
    stages_for,
    write_plot_csv,
)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _config(tmp_path, **kwargs):
    base = dict(model="iid", n_grid=[64, 128, 256, 512], replicates=100, diagnostics=[], out=str(tmp_path / "out"), verbose=False)
    base.update(kwargs)
    return ExperimentConfig(**base)


@pytest.mark.parametrize(
    "kwargs, error",
    [
        ({"model": None}, ConfigError),
        ({"model": "nonsense"}, ConfigError),
        ({"n_grid": [128, 64]}, ValidationError),
        ({"n_grid": []}, ValidationError),
        ({"replicates": 0}, ValidationError),
        ({"p0": 2.0}, ValidationError),
        ({"l_rule": "quadratic"}, ConfigError),
        ({"tolerance_profile": "loose"}, UsageError),
        ({"diagnostics": ["dk", "spectra"]}, ConfigError),
    ],
)
def test_config_validation(tmp_path, kwargs, error):
    with pytest.raises(error):
        _config(tmp_path, **kwargs)


def test_config_from_ini():
    config = ExperimentConfig.from_ini(CONFIGS / "iid.ini", seed=5, out=None)
    assert config.model == "iid"
    assert config.n_grid == [256, 512, 1024, 2048, 4096]
    assert config.seed == 5
    assert config.out == "results/iid"
    assert config.moment_orders == [4, 6]
    assert config.x_grid == [0.5, 1.0, 1.5]
    assert "maximal" in config.diagnostics


def test_config_fractions_and_parameters():
    config = ExperimentConfig.from_ini(CONFIGS / "elliptic.ini")
    assert config.parameters == {"spread": pytest.approx(0.05)}
    assert (config.l_rule, config.l_value) == ("sigma", 0.25)
    assert config.mdp_speed_exponent == pytest.approx(0.2)


def test_model_file_resolves_next_to_the_experiment():
    config = ExperimentConfig.from_ini(CONFIGS / "infeasible.ini")
    assert config.model is None
    assert Path(config.model_file) == CONFIGS / "frozen_chain.ini"
    assert config.diagnostics == []


def test_experiment_section_is_required(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[rates]\nl_rule = constant\n")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_ini(path)


def test_stages_for():
    assert stages_for("blocks") == ["validate", "constants", "blocks"]
    assert stages_for("report") == list(STAGES)
    with pytest.raises(UsageError):
        stages_for("plot")


def test_constants_only_run(tmp_path):
    config = _config(tmp_path)
    bundle = run_experiment(config, stages_for("constants"))
    assert bundle.passed
    assert all(r.partition is None for r in bundle.records)
    out = tmp_path / "out"
    assert (out / "constants.csv").is_file()
    assert not (out / "partition_n64.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 0
    assert manifest["settings"]["calibration"]["window_constant"] == 128.0


def test_empty_diagnostics_writes_constants_and_manifest(tmp_path):
    bundle = run_experiment(_config(tmp_path))
    assert all(r.partition is not None for r in bundle.records)
    assert sorted(p.name for p in (tmp_path / "out").iterdir()) == ["constants.csv", "manifest.json"]


def test_iid_pipeline_passes(tmp_path):
    config = _config(tmp_path, diagnostics=["dk", "mdp", "moments"])
    bundle = run_experiment(config)
    assert bundle.passed
    assert [r.partition.k for r in bundle.records] == [13, 25, 51, 102]
    out = tmp_path / "out"
    for name in ("constants.csv", "decomposition.csv", "dk.csv", "fits.csv", "mdp.csv", "moments.csv", "partition_n512.csv"):
        assert (out / name).is_file(), name
    manifest = json.loads((out / "manifest.json").read_text())
    assert "fits.csv" in manifest["outputs"]
    assert -1.25 <= bundle.fits[0].slope <= -0.75


def test_diagnostics_rows_are_keyed(tmp_path):
    run_experiment(_config(tmp_path, n_grid=[64, 128], diagnostics=["mdp", "cumulants", "moments"]))
    out = tmp_path / "out"
    for name in ("decomposition.csv", "mdp.csv", "cumulants.csv", "moments.csv"):
        header, first, *_ = (out / name).read_text().splitlines()
        assert header.startswith("model_id,n,statistic_id,"), name
        assert first.startswith("iid,64,"), name
    cumulant_rows = (out / "cumulants.csv").read_text().splitlines()[1:]
    assert [row.split(",")[1] for row in cumulant_rows] == ["64", "128", "64", "128"]
    assert {row.split(",")[2] for row in cumulant_rows} == {"cumulant_3", "cumulant_4"}


def test_reruns_are_identical(tmp_path):
    first = run_experiment(_config(tmp_path, out=str(tmp_path / "a"), diagnostics=["dk"]), stages_for("decompose"))
    second = run_experiment(_config(tmp_path, out=str(tmp_path / "b"), diagnostics=["dk"]), stages_for("decompose"))
    for name in ("constants.csv", "partition_n256.csv", "decomposition.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert [r.beta.empirical for r in first.records] == [r.beta.empirical for r in second.records]


def test_infeasible_mixing_stops_before_writing(tmp_path):
    out = tmp_path / "infeasible"
    config = ExperimentConfig.from_ini(CONFIGS / "infeasible.ini", out=str(out), verbose=False)
    with pytest.raises(InfeasibleMixingError) as info:
        run_experiment(config)
    assert info.value.exit_code == 3
    assert not out.exists()


def test_progress_callback(tmp_path):
    seen = []
    ExperimentRunner(_config(tmp_path, n_grid=[64]), progress_callback=seen.append).run(stages_for("blocks"))
    assert [r.stage for r in seen] == ["validate", "constants", "blocks"]
    assert all(r.success for r in seen)


@pytest.fixture
def diagnosed(tmp_path):
    config = _config(tmp_path, diagnostics=["dk", "mdp", "cumulants", "moments"])
    return ExperimentRunner(config).run(stages_for("diagnose"))


def test_dk_plot(diagnosed):
    rows = emit_plot_data(diagnosed, "dk_vs_sigma")
    assert len(rows) == 4
    assert [round(x) for _, x, _, _ in rows] == [8, 11, 16, 23]


def test_mdp_plot_has_one_series_per_n(diagnosed):
    series = {s for s, _, _, _ in emit_plot_data(diagnosed, "mdp_curve")}
    assert {"n=64", "n=512", "n=64:limit"} <= series


def test_block_variance_plot_has_bands(diagnosed):
    rows = emit_plot_data(diagnosed, "block_variances")
    low = [y for s, _, y, _ in rows if s == "n=64:band_low"]
    high = [y for s, _, y, _ in rows if s == "n=64:band_high"]
    assert low and high
    assert high[0] == pytest.approx(9.0 * low[0])


def test_cumulant_plot(diagnosed):
    series = {s for s, _, _, _ in emit_plot_data(diagnosed, "cumulants")}
    assert series == {"k=3", "k=4"}


def test_unknown_plot_id(diagnosed):
    with pytest.raises(UsageError):
        emit_plot_data(diagnosed, "histogram")


def test_plot_csv(tmp_path):
    path = tmp_path / "plot.csv"
    write_plot_csv([("n=64", 1.0, 0.5, None)], path)
    assert path.read_text().splitlines() == ["series,x,y,y_err", "n=64,1.0,0.5,"]


def test_verbose_progress_lines(tmp_path, capsys):
    config = _config(tmp_path, n_grid=[64], verbose=True, lang="cn")
    ExperimentRunner(config).run(stages_for("blocks"))
    out = capsys.readouterr().out
    assert "3. 区块划分... ✅ 通过" in out
    assert "耗时" in out
    assert "完成: " in out and "检查项" in out
