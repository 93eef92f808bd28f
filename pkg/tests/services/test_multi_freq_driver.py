import numpy as np
import pytest
from conftest import STANDARD_EPSILON, STANDARD_FREQUENCY_HZ, relative_error
from pydantic import ValidationError

from app.errors import CgBreakdownError, GridError, SurveyError
from app.schemas import EpsilonMode, FwiConfig, InnerSolver
from app.services import multi_freq_driver
from app.services.multi_freq_driver import (
    fwi_run,
    gn_step,
    resolve_epsilon,
    simulate_data,
)
from app.services.process_callback import ProgressCallback
from app.services.reduced_space import largest_data_eigenvalue
from app.services.sparse_la import ConvergenceLog

FREQUENCIES = [0.1, STANDARD_FREQUENCY_HZ]


@pytest.fixture(scope="module")
def observed_pair(true_model, survey, profile):
    return {f: simulate_data(true_model, survey, f, profile) for f in FREQUENCIES}


@pytest.fixture(scope="module")
def self_consistent_pair(background_model, survey, profile):
    return {f: simulate_data(background_model, survey, f, profile) for f in FREQUENCIES}


def inversion_config(**overrides) -> FwiConfig:
    values = {
        "frequencies_hz": FREQUENCIES,
        "epsilon_values": [1e-3, 1e-3],
        "epsilon_mode": EpsilonMode.RELATIVE,
        "inner_solver": InnerSolver.RSGN_CG,
        "inner_maxit": 100,
        "inner_tol": 1e-8,
        "drop_model_term": True,
    }
    values.update(overrides)
    return FwiConfig(**values)


# ===== configuration =====
def test_linear_epsilon_ramp():
    config = FwiConfig(
        frequencies_hz=[5.0 + 2.5 * i for i in range(15)], epsilon_start=10.0, epsilon_end=1e5
    )
    schedule = config.epsilon_schedule()
    assert len(schedule) == 15
    assert schedule[0] == 10.0
    assert schedule[2] == pytest.approx(10.0 + (1e5 - 10.0) * 2 / 14)
    assert schedule[-1] == pytest.approx(1e5)
    assert FwiConfig(frequencies_hz=[3.0]).epsilon_schedule() == [10.0]


@pytest.mark.parametrize(
    "values",
    [
        {"frequencies_hz": [2.0, 1.0]},
        {"frequencies_hz": [1.0, 1.0]},
        {"frequencies_hz": [-1.0]},
        {"frequencies_hz": [1.0, 2.0], "epsilon_values": [1.0]},
        {"frequencies_hz": [1.0], "epsilon_values": [0.0]},
        {"frequencies_hz": [1.0], "slowness_min": 2.0, "slowness_max": 1.0},
    ],
)
def test_invalid_configs(values):
    with pytest.raises(ValidationError):
        FwiConfig(**values)


def test_relative_epsilon_scales_with_data_hessian(gn_state):
    absolute = FwiConfig(frequencies_hz=[1.0])
    relative = FwiConfig(frequencies_hz=[1.0], epsilon_mode="relative")
    assert resolve_epsilon(gn_state, 0.5, absolute) == 0.5
    expected = 0.5 * largest_data_eigenvalue(gn_state)
    assert resolve_epsilon(gn_state, 0.5, relative) == pytest.approx(expected)


def test_relative_epsilon_without_receivers_falls_back(empty_state):
    config = FwiConfig(frequencies_hz=[1.0], epsilon_mode=EpsilonMode.RELATIVE)
    assert resolve_epsilon(empty_state, 0.25, config) == 0.25


# ===== single step =====
@pytest.mark.parametrize("solver", list(InnerSolver))
def test_zero_residual_is_a_fixed_point(solver, background_model, survey, profile):
    d_obs = simulate_data(background_model, survey, STANDARD_FREQUENCY_HZ, profile)
    config = inversion_config(inner_solver=solver, epsilon_mode=EpsilonMode.ABSOLUTE)
    updated, _ = gn_step(
        background_model, survey, STANDARD_FREQUENCY_HZ, d_obs, STANDARD_EPSILON, config,
        profile=profile,
    )
    change = np.linalg.norm(updated.values - background_model.values)
    assert change / np.linalg.norm(background_model.values) < 1e-8


def test_reduced_and_full_space_steps_agree(background_model, survey, observed, profile):
    common = {
        "epsilon_mode": EpsilonMode.ABSOLUTE,
        "inner_tol": 1e-11,
        "inner_maxit": 200,
        "gmres_restart": 200,
        "drop_model_term": True,
    }
    models = [
        gn_step(
            background_model,
            survey,
            STANDARD_FREQUENCY_HZ,
            observed,
            STANDARD_EPSILON,
            inversion_config(inner_solver=solver, **common),
            profile=profile,
        )[0]
        for solver in (InnerSolver.RSGN_CG, InnerSolver.FSGN_GMRES_EXACT)
    ]
    assert relative_error(models[1].values, models[0].values) < 1e-5


def test_update_is_clamped_to_bounds(background_model, survey, observed, profile):
    config = inversion_config(
        epsilon_mode=EpsilonMode.ABSOLUTE, slowness_min=0.5, slowness_max=1.0001
    )
    updated, log = gn_step(
        background_model, survey, STANDARD_FREQUENCY_HZ, observed, 1e-4, config, profile=profile
    )
    assert updated.values.max() == 1.0001
    assert updated.values.min() >= 0.5
    assert updated.upper == 1.0001
    assert log.iterations > 0


def overshooting_solver(state, config):
    return -2.0 * state.model.values, ConvergenceLog(solver="rsgn-cg")


def test_non_positive_update_names_the_step(
    background_model, survey, observed, profile, monkeypatch
):
    monkeypatch.setattr(multi_freq_driver, "_solve_inner", overshooting_solver)
    config = inversion_config(epsilon_mode=EpsilonMode.ABSOLUTE)
    with pytest.raises(GridError) as exc:
        gn_step(
            background_model,
            survey,
            STANDARD_FREQUENCY_HZ,
            observed,
            1e-2,
            config,
            profile=profile,
        )
    message = str(exc.value)
    assert f"{STANDARD_FREQUENCY_HZ:g} Hz" in message
    assert "rsgn-cg" in message
    assert "positive" in message
    assert isinstance(exc.value.__cause__, GridError)


def test_non_positive_update_stops_the_run_at_its_frequency(
    survey, observed_pair, background_model, profile, monkeypatch
):
    monkeypatch.setattr(multi_freq_driver, "_solve_inner", overshooting_solver)
    report, model = fwi_run(
        inversion_config(), survey, observed_pair, background_model, profile=profile
    )
    assert report.failed_frequency_index == 0
    assert report.failure_message.startswith("frequency #0")
    assert f"{FREQUENCIES[0]:g} Hz" in report.failure_message
    assert report.entries == []
    assert model is not None


# ===== multi-frequency runs =====
def test_run_reduces_misfit_at_every_frequency(survey, observed_pair, background_model, profile):
    messages = []
    snapshots = []

    def snapshot_writer(index, frequency_hz, model):
        snapshots.append((index, frequency_hz, model))
        return f"snapshot_{index}"

    report, final_model = fwi_run(
        inversion_config(),
        survey,
        observed_pair,
        background_model,
        profile=profile,
        progress_callback=ProgressCallback([lambda m, s, d: messages.append(s)]),
        snapshot_writer=snapshot_writer,
    )
    assert report.completed
    assert [e.frequency_index for e in report.entries] == [0, 1]
    assert [e.frequency_hz for e in report.entries] == FREQUENCIES
    for entry in report.entries:
        assert entry.resid_norm_fin < entry.resid_norm_ini
        assert entry.inner_solver is InnerSolver.RSGN_CG
        assert entry.inner_iterations > 0
        assert entry.update_norm_ratio > 0.0
    assert [e.snapshot_path for e in report.entries] == ["snapshot_0", "snapshot_1"]
    assert snapshots[-1][2] is final_model
    assert messages == ["gn_step", "gn_step", "done"]
    assert report.total_time > 0.0


def test_later_steps_start_from_the_previous_model(survey, observed_pair, background_model, profile):
    report, _ = fwi_run(
        inversion_config(), survey, observed_pair, background_model, profile=profile
    )
    first_only, after_first = fwi_run(
        inversion_config(frequencies_hz=FREQUENCIES[:1], epsilon_values=[1e-3]),
        survey,
        observed_pair,
        background_model,
        profile=profile,
    )
    expected_ini = simulate_data(after_first, survey, FREQUENCIES[1], profile)
    d_obs = observed_pair[FREQUENCIES[1]]
    misfit = np.linalg.norm(expected_ini.values - d_obs.values) / d_obs.norm()
    assert report.entries[1].resid_norm_ini == pytest.approx(misfit, rel=1e-10)
    assert first_only.entries[0].resid_norm_fin == pytest.approx(
        report.entries[0].resid_norm_fin, rel=1e-12
    )


def test_self_consistent_data_stay_fixed(survey, self_consistent_pair, background_model, profile):
    report, final_model = fwi_run(
        inversion_config(epsilon_mode=EpsilonMode.ABSOLUTE),
        survey,
        self_consistent_pair,
        background_model,
        profile=profile,
    )
    assert report.completed
    for entry in report.entries:
        assert entry.update_norm_ratio < 1e-8
        assert entry.resid_norm_ini < 1e-12
        assert entry.resid_norm_fin < 1e-10
    np.testing.assert_allclose(final_model.values, background_model.values, atol=1e-8)


def test_failing_step_reports_partial_results(
    survey, observed_pair, background_model, profile, monkeypatch
):
    original = multi_freq_driver._solve_inner
    calls = []

    def failing_second_step(state, config):
        calls.append(state.omega)
        if len(calls) == 2:
            raise CgBreakdownError("non-positive curvature", iteration=3)
        return original(state, config)

    monkeypatch.setattr(multi_freq_driver, "_solve_inner", failing_second_step)
    report, model = fwi_run(
        inversion_config(), survey, observed_pair, background_model, profile=profile
    )
    assert not report.completed
    assert report.failed_frequency_index == 1
    assert "frequency #1" in report.failure_message
    assert len(report.entries) == 1
    assert not np.array_equal(model.values, background_model.values)


def test_failing_callback_does_not_stop_the_run(
    survey, observed_pair, background_model, profile
):
    def broken(message, step, data):
        raise RuntimeError("display went away")

    report, _ = fwi_run(
        inversion_config(),
        survey,
        observed_pair,
        background_model,
        profile=profile,
        progress_callback=ProgressCallback([broken]),
    )
    assert report.completed and len(report.entries) == 2


def test_missing_observed_frequency(survey, observed_pair, background_model, profile):
    config = inversion_config(frequencies_hz=[0.1, 0.2])
    with pytest.raises(SurveyError):
        fwi_run(config, survey, observed_pair, background_model, profile=profile)


def test_runs_are_deterministic(survey, observed_pair, background_model, profile):
    runs = [
        fwi_run(inversion_config(), survey, observed_pair, background_model, profile=profile)
        for _ in range(2)
    ]
    first, second = (
        [e.model_dump(exclude={"inner_time"}) for e in report.entries] for report, _ in runs
    )
    assert first == second
    np.testing.assert_array_equal(runs[0][1].values, runs[1][1].values)
