import pytest

from varlin.config import (
    REFERENCE_DEFAULTS,
    REFERENCE_MODELS,
    BudgetConfig,
    CalibrationConfig,
    ToleranceConfig,
    apply_tolerance_profile,
    get_config,
    get_message,
    get_model_description,
    list_reference_models,
)
from varlin.errors import UsageError
from varlin.model_factory import build_reference_model, window_half_width


def test_default_profile():
    tol = apply_tolerance_profile("default")
    assert tol.variance == 1e-9
    assert get_config().tolerance is tol


def test_strict_profile_divides_by_one_hundred():
    tol = apply_tolerance_profile("strict")
    assert tol.variance == pytest.approx(1e-11)
    assert tol.mass == pytest.approx(1e-14)
    assert get_config().tolerance.martingale == pytest.approx(1e-12)


def test_unknown_profile():
    with pytest.raises(UsageError):
        apply_tolerance_profile("loose")


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("VARLIN_TOL_VARIANCE", "1e-6")
    monkeypatch.setenv("VARLIN_CAL_WINDOW_CONSTANT", "64")
    monkeypatch.setenv("VARLIN_BUDGET_QV_GRID", "256")
    assert ToleranceConfig().variance == 1e-6
    assert CalibrationConfig().window_constant == 64.0
    budget = BudgetConfig()
    assert budget.qv_grid == 256
    assert isinstance(budget.qv_grid, int)


def test_calibration_defaults():
    cal = CalibrationConfig()
    assert cal.little_o_ratio == 0.1
    assert cal.beta_epsilon == pytest.approx(1 / 6)
    assert cal.time_change_gap_constant == 9.0
    assert cal.cumulant_ratio == 10.0


def test_settings_flatten_for_the_manifest():
    settings = get_config().as_dict()
    assert set(settings) == {"tolerance", "calibration", "budget"}
    assert settings["budget"]["dobrushin_horizon"] == 4


def test_reference_catalog():
    names = list_reference_models()
    assert names[0] == "iid"
    assert set(REFERENCE_DEFAULTS) == set(REFERENCE_MODELS)
    assert get_model_description("nonsense") is None


@pytest.mark.parametrize("name", list(REFERENCE_MODELS))
def test_every_reference_model_builds(name):
    model = build_reference_model(name, 1024)
    assert model.n == 1024
    assert model.model_id == name


def test_reference_parameters_override_defaults():
    model = build_reference_model("geometric_chain", 16, delta=0.25)
    assert model.transitions[0][0, 0] == pytest.approx(0.625)


def test_unknown_reference_model():
    with pytest.raises(UsageError):
        build_reference_model("nonsense", 16)


@pytest.mark.parametrize("n, width", [(2, 1), (16, 1), (256, 2), (4096, 3)])
def test_window_half_width(n, width):
    assert window_half_width(n) == width


def test_messages():
    assert get_message("blocks") == "Block partition"
    assert get_message("blocks", "cn") == "区块划分"
    assert get_message("unknown_key") == "unknown_key"
