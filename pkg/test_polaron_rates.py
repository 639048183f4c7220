import numpy as np
import pytest

from tools.errors import ContractError, DomainError, TableRangeError
from tools.phonon_bath.phonon_bath import PhononBath, PhononBathParams
from tools.polaron_rates.polaron_rates import (
    KERNEL_NAMES,
    assemble_rates,
    compute_kernels,
    generalized_rabi,
    rate_map,
    zero_rates,
)
from tools.polaron_rates.rate_table import (
    build_rate_table,
    delta_axis,
    load_rate_table,
    lookup_kernels,
    lookup_rates,
    save_rate_table,
)

OMEGA_0 = 2.0 / 6.373


@pytest.fixture(scope="module")
def corr():
    return PhononBath(PhononBathParams()).correlation_table()


@pytest.fixture(scope="module")
def free_corr():
    return PhononBath(PhononBathParams(alpha_p=0.0)).correlation_table()


@pytest.fixture(scope="module")
def fig2_table(corr):
    return build_rate_table(0.8, 15.0, corr, resolution=(101, 201), threads=2)


def test_generalized_rabi_examples():
    assert generalized_rabi(0.0, 0.0) == 0.0
    assert generalized_rabi(3.0, 4.0) == pytest.approx(5.0)
    assert generalized_rabi(0.2887, 0.0) == pytest.approx(0.2887)
    with pytest.raises(DomainError):
        generalized_rabi(-1.0, 0.0)


def test_kernels_vanish_without_coupling(free_corr):
    kernels = compute_kernels(0.0, 0.0, free_corr)
    np.testing.assert_array_equal(kernels.as_array(), 0.0)
    kernels = compute_kernels(0.4, 2.0, free_corr)
    np.testing.assert_array_equal(kernels.as_array(), 0.0)


@pytest.mark.parametrize("omega_R", [0.0, 0.1, 0.3039, 0.8])
def test_odd_kernels_vanish_on_resonance(corr, omega_R):
    kernels = compute_kernels(omega_R, 0.0, corr)
    for name in ("k_exp_sin", "k_expm_sin", "k_exp_sin_re", "k_cosh_h"):
        assert getattr(kernels, name) == 0.0
    assert np.all(np.isfinite(kernels.as_array()))


def test_sinh_cos_kernel_positive_on_resonance(corr):
    assert compute_kernels(0.3039, 0.0, corr).k_sinh_cos > 0.0


def test_zero_field_gives_zero_rates(corr):
    kernels = compute_kernels(0.0, 2.0, corr)
    rates = assemble_rates(0j, 2.0, kernels, corr.mean_B)
    assert all(value == 0.0 for value in rates.as_dict().values())


def test_resonant_real_field_rates(corr):
    omega = OMEGA_0
    kernels = compute_kernels(corr.mean_B * omega, 0.0, corr)
    rates = assemble_rates(omega, 0.0, kernels, corr.mean_B)
    assert rates.gamma_plus == rates.gamma_minus
    assert rates.gamma_plus > 0.0


def test_real_field_dephasing_pair(corr):
    omega, delta = OMEGA_0, 1.7
    omega_R = corr.mean_B * omega
    kernels = compute_kernels(omega_R, delta, corr)
    rates = assemble_rates(omega, delta, kernels, corr.mean_B)
    omega_s = omega_R ** 2
    assert rates.gamma_sd == pytest.approx(-0.5 * omega_s * kernels.k_expm_sin, rel=1e-12)
    assert rates.gamma_cd == pytest.approx(0.5 * omega_s * (kernels.k_sinh_cos - kernels.k_cosh_f), rel=1e-12)


def test_complex_field_phase_only_changes_dressing_terms(corr):
    omega, delta = OMEGA_0, 1.7
    kernels = compute_kernels(corr.mean_B * omega, delta, corr)
    real = assemble_rates(omega, delta, kernels, corr.mean_B)
    rotated = assemble_rates(omega * np.exp(0.4j), delta, kernels, corr.mean_B)
    assert rotated.gamma_plus == pytest.approx(real.gamma_plus, rel=1e-12)
    assert rotated.gamma_minus == pytest.approx(real.gamma_minus, rel=1e-12)
    assert rotated.delta_pm == pytest.approx(real.delta_pm, rel=1e-12)
    # (Γcd, Γsd) rotate by twice the field phase
    before = complex(real.gamma_cd, real.gamma_sd)
    after = complex(rotated.gamma_cd, rotated.gamma_sd)
    assert abs(after) == pytest.approx(abs(before), rel=1e-12)


def test_assemble_rejects_foreign_kernels(corr):
    kernels = compute_kernels(0.2, 1.0, corr)
    with pytest.raises(ContractError):
        assemble_rates(OMEGA_0, 1.0, kernels, corr.mean_B)
    with pytest.raises(ContractError):
        assemble_rates(0.2 / corr.mean_B, 1.5, kernels, corr.mean_B)


def test_rates_scale_quadratically_at_weak_field(corr):
    delta = 3.0
    low = assemble_rates(1.0e-3, delta, compute_kernels(corr.mean_B * 1.0e-3, delta, corr), corr.mean_B)
    high = assemble_rates(2.0e-3, delta, compute_kernels(corr.mean_B * 2.0e-3, delta, corr), corr.mean_B)
    assert high.gamma_plus / low.gamma_plus == pytest.approx(4.0, rel=1e-3)
    assert high.gamma_minus / low.gamma_minus == pytest.approx(4.0, rel=1e-3)
    assert high.delta_pm / low.delta_pm == pytest.approx(4.0, rel=1e-3)


def test_detuning_asymmetry_at_low_temperature(corr):
    deltas = np.linspace(-15.0, 15.0, 61)
    maps = rate_map(np.array([OMEGA_0]), deltas, corr)
    assert deltas[np.argmax(maps["gamma_plus"][0])] > 0.0
    assert deltas[np.argmax(maps["gamma_minus"][0])] < 0.0
    centre = np.argmin(np.abs(deltas))
    assert maps["gamma_plus"][0, centre] == pytest.approx(maps["gamma_minus"][0, centre], rel=1e-10)


@pytest.mark.parametrize("delta", [-10.0, -5.0, -2.0, -0.5, 0.5, 2.0, 5.0, 10.0])
def test_polaron_shift_follows_detuning_sign(corr, delta):
    maps = rate_map(np.array([OMEGA_0]), np.array([delta]), corr)
    assert np.sign(maps["delta_pm"][0, 0]) == np.sign(delta)


def test_emission_rate_grows_with_temperature():
    deltas = np.linspace(0.5, 15.0, 30)
    peaks = []
    for temperature in (4.2, 10.0, 20.0):
        corr = PhononBath(PhononBathParams(temperature=temperature)).correlation_table()
        peaks.append(rate_map(np.array([OMEGA_0]), deltas, corr)["gamma_plus"].max())
    assert peaks[0] < peaks[1] < peaks[2]


def test_zero_rates_shapes():
    assert zero_rates().gamma_plus == 0.0
    assert zero_rates(5).gamma_cd.shape == (5,)


def test_delta_axis_is_ascending_and_centred():
    axis = delta_axis(10.0, 41, delta_center=2.0)
    assert np.all(np.diff(axis) > 0)
    assert axis[0] == pytest.approx(-8.0)
    assert axis[-1] == pytest.approx(12.0)
    assert axis[20] == pytest.approx(2.0)


def test_table_without_coupling_is_zero(free_corr):
    table = build_rate_table(1.0, 1.0, free_corr, resolution=(2, 2))
    np.testing.assert_array_equal(table.kernels, 0.0)
    assert table.shape == (2, 2)


def test_table_nodes_reproduce_direct_kernels(corr):
    table = build_rate_table(1.0, 5.0, corr, resolution=(5, 7))
    for i in (0, 2, 4):
        for j in (0, 3, 6):
            omega_R, delta = table.omega_axis[i], table.delta_axis[j]
            looked_up = lookup_kernels(table, omega_R, delta).as_array()
            direct = compute_kernels(omega_R, delta, corr).as_array()
            np.testing.assert_allclose(looked_up, direct, rtol=1e-12, atol=1e-15)


def test_table_interpolation_accuracy(corr, fig2_table):
    rng = np.random.default_rng(7)
    omegas = rng.uniform(0.0, 0.8, 100)
    deltas = rng.uniform(-15.0, 15.0, 100)
    scale = np.abs(fig2_table.kernels).reshape(len(KERNEL_NAMES), -1).max(axis=1)
    for omega_R, delta in zip(omegas, deltas):
        looked_up = lookup_kernels(fig2_table, omega_R, delta).as_array()
        direct = compute_kernels(omega_R, delta, corr).as_array()
        assert np.all(np.abs(looked_up - direct) <= 1e-3 * scale)


def test_lookup_rates_at_zero_field(fig2_table):
    rates = lookup_rates(fig2_table, 0j, 3.0, fig2_table.mean_B)
    assert all(value == 0.0 for value in rates.as_dict().values())


def test_lookup_outside_table_names_axis(fig2_table):
    with pytest.raises(TableRangeError) as excinfo:
        lookup_rates(fig2_table, 2.0, 0.0, fig2_table.mean_B)
    assert excinfo.value.axis == "omega_R"
    with pytest.raises(TableRangeError) as excinfo:
        lookup_rates(fig2_table, 0.1, 20.0, fig2_table.mean_B)
    assert excinfo.value.axis == "delta"


def test_bound_rates_match_pointwise_lookup(fig2_table):
    deltas = np.array([-7.5, -1.0, 0.0, 0.3, 12.0])
    bound = fig2_table.bind(deltas)
    omega = 0.25 * np.exp(0.3j)
    batch = bound.rates(np.full(deltas.size, fig2_table.mean_B * omega))
    for k, delta in enumerate(deltas):
        single = lookup_rates(fig2_table, omega, delta, fig2_table.mean_B)
        for name, value in single.as_dict().items():
            assert getattr(batch, name)[k] == pytest.approx(value, rel=1e-9, abs=1e-15)


def test_rate_table_cache(tmp_path, corr):
    table = build_rate_table(0.5, 3.0, corr, resolution=(4, 5))
    path = str(tmp_path / "rates.bin")
    save_rate_table(table, path)

    loaded = load_rate_table(path, expected_key=table.key)
    assert loaded is not None
    np.testing.assert_array_equal(loaded.kernels, table.kernels)
    np.testing.assert_array_equal(loaded.delta_axis, table.delta_axis)
    assert loaded.mean_B == table.mean_B

    assert load_rate_table(path, expected_key="other") is None
    assert load_rate_table(str(tmp_path / "missing.bin")) is None
    (tmp_path / "broken.bin").write_bytes(b"not a table")
    assert load_rate_table(str(tmp_path / "broken.bin")) is None
