import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.constants import hbar

from freqhom import dispersion as disp
from freqhom import jca
from freqhom import phasematch as pm
from freqhom import propagation as pr
from freqhom.errors import NotBracketed, WindowTooSmall, ZeroInput

TBP_GAUSSIAN = 2 * np.log(2) / np.pi  # 0.4413


def _fwhm(x, y):
    half = y.max() / 2
    above = np.nonzero(y >= half)[0]
    i0, i1 = above[0], above[-1]
    left = np.interp(half, [y[i0 - 1], y[i0]], [x[i0 - 1], x[i0]])
    right = np.interp(half, [y[i1 + 1], y[i1]], [x[i1 + 1], x[i1]])
    return right - left


@pytest.fixture(scope="module")
def strong(device):
    """Reference device driven by a 10-ps chirped pump near full conversion."""
    gdd = pr.gdd_for_duration(device.pump, 10e-12)
    e = pr.energy_at_peak_power(device.pump, 195.0, gdd)
    pump = device.pump.with_(energy=e, gdd=gdd)
    inp = jca.FieldSpec("input", device.config.lambda_i, 1.0, single_photon=True)
    return device, pump, inp


def test_spectrum_round_trip_and_parseval():
    grid = pr.TimeGrid(256, 1e-15)
    rng = np.random.default_rng(1)
    A = rng.normal(size=256) + 1j * rng.normal(size=256)
    S = pr.to_spectrum(A, grid)
    np.testing.assert_allclose(pr.from_spectrum(S, grid), A, atol=1e-12)
    e_t = np.sum(np.abs(A) ** 2) * grid.dt
    e_w = np.sum(np.abs(S) ** 2) * grid.domega / (2 * np.pi)
    assert e_w == pytest.approx(e_t, rel=1e-12)


def test_initial_energies(device, strong):
    _, pump, inp = strong
    s0 = pr.init_fields(device.config, inp, pump)
    assert s0.energy("i") == pytest.approx(hbar * inp.omega0, rel=1e-12)
    assert s0.energy("p") == pytest.approx(pump.energy, rel=1e-12)
    assert s0.photon_numbers()[0] == pytest.approx(1.0, rel=1e-12)


def test_transform_limited_time_bandwidth_product(device):
    pump = device.pump.with_(energy=1e-12)
    inp = jca.FieldSpec("input", device.config.lambda_i, 50.0, single_photon=True)
    s0 = pr.init_fields(device.config, inp, pump, pr.TimeGrid(2**14, 0.1e-15))
    t = s0.grid.t
    dt_fwhm = _fwhm(t, np.abs(s0.A_p) ** 2)
    assert dt_fwhm == pytest.approx(pr.tl_duration(pump), rel=1e-5)
    dnu = pump.fwhm_omega / (2 * np.pi)
    assert dt_fwhm * dnu == pytest.approx(TBP_GAUSSIAN, rel=1e-5)


def test_chirped_duration_matches_field(device):
    gdd = pr.gdd_for_duration(device.pump, 2e-12)
    pump = device.pump.with_(energy=1e-12, gdd=gdd)
    inp = jca.FieldSpec("input", device.config.lambda_i, 1.0, single_photon=True)
    s0 = pr.init_fields(device.config, inp, pump)
    assert _fwhm(s0.grid.t, np.abs(s0.A_p) ** 2) == pytest.approx(2e-12, rel=1e-3)


@settings(max_examples=40, deadline=None)
@given(tau=st.floats(0.05, 100.0))
def test_gdd_duration_inverse(device, tau):
    tau = max(tau * 1e-12, pr.tl_duration(device.pump))
    g = pr.gdd_for_duration(device.pump, tau)
    assert pr.chirped_duration(device.pump, g) == pytest.approx(tau, rel=1e-9)
    e = pr.energy_at_peak_power(device.pump, 123.0, g)
    assert pr.peak_power(device.pump, e, g) == pytest.approx(123.0, rel=1e-12)


def _cw_state(config, grid, a_in, a_pump):
    n = grid.n_points
    return pr.PulseState(grid, np.full(n, a_in, complex), np.zeros(n, complex),
                         np.full(n, a_pump, complex), config.omega_i, config.omega_o,
                         config.omega_p)


@pytest.mark.parametrize("gl", [0.3, 1.0, 1.4])
def test_cw_undepleted_conversion_follows_sin_squared(gl):
    cr = disp.constant_model(1.7)
    conf = pm.InteractionConfig.collinear(cr, "ooo", 0.55, 1.55, 1e-3)
    assert pm.delta_k0(conf) == pytest.approx(0.0, abs=1e-6)
    g0 = 1.0
    gamma = tuple(g0 * w / conf.omega_i for w in (conf.omega_i, conf.omega_o, conf.omega_p))
    a_p = gl / (conf.length * np.sqrt(gamma[0] * gamma[1]))
    grid = pr.TimeGrid(64, 1e-12)
    s0 = _cw_state(conf, grid, 1e-3 * a_p, a_p)
    stepper = pr.make_stepper(conf, (1e-6,) * 3, 1e-12, n_steps=200, gamma=gamma)
    s1, diag = pr.propagate(s0, stepper, conf)
    eta = pr.conversion_efficiency(s0, s1)
    assert eta == pytest.approx(np.sin(gl) ** 2, rel=1e-4)
    assert diag.manley_rowe < 1e-6


def test_step_matches_fused_propagation(strong):
    device, pump, inp = strong
    grid = pr.TimeGrid(2**12, 80e-12 / 2**12)
    s0 = pr.init_fields(device.config, inp, pump, grid)
    stepper = pr.make_stepper(device.config, device.sigmas, device.d_eff, n_steps=16)
    s = s0
    for _ in range(16):
        s = pr.step(s, stepper)
    s1, _ = pr.propagate(s0, stepper)
    assert np.max(np.abs(s.A_o - s1.A_o)) <= 1e-9 * np.max(np.abs(s1.A_o))


def test_step_halving_error_ratio_is_second_order(strong):
    device, pump, inp = strong
    grid = pr.TimeGrid(2**13, 80e-12 / 2**13)
    s0 = pr.init_fields(device.config, inp, pump, grid)
    out = {}
    for n in (16, 32, 64):
        stepper = pr.make_stepper(device.config, device.sigmas, device.d_eff, n_steps=n)
        out[n] = pr.propagate(s0, stepper)[0].A_o
    e1 = np.linalg.norm(out[16] - out[32])
    e2 = np.linalg.norm(out[32] - out[64])
    assert e1 / e2 == pytest.approx(4.0, rel=0.15)


def test_manley_rowe_and_efficiency_bookkeeping(strong):
    device, pump, inp = strong
    s0 = pr.init_fields(device.config, inp, pump)
    s1, diag = pr.propagate(s0, pr.make_stepper(device.config, device.sigmas, device.d_eff))
    eta = pr.conversion_efficiency(s0, s1)
    assert 0.3 < eta < 0.6
    assert diag.manley_rowe < 1e-3
    assert diag.efficiency == pytest.approx(eta, rel=1e-3)
    assert max(abs(d) for d in diag.linear_drift) < 1e-9


def test_no_coupling_leaves_input_spectrum_unchanged(strong):
    device, pump, inp = strong
    s0 = pr.init_fields(device.config, inp, pump)
    stepper = pr.make_stepper(device.config, device.sigmas, device.d_eff, n_steps=8,
                              gamma=(0.0, 0.0, 0.0))
    s1, _ = pr.propagate(s0, stepper)
    _, S0 = pr.field_spectrum(s0, "i")
    _, S1 = pr.field_spectrum(s1, "i")
    np.testing.assert_allclose(np.abs(S1), np.abs(S0), atol=1e-12 * np.abs(S0).max())
    assert pr.conversion_efficiency(s0, s1) == 0.0


def test_window_too_small(device):
    inp = jca.FieldSpec("input", device.config.lambda_i, 0.1, single_photon=True)
    with pytest.raises(WindowTooSmall):
        pr.init_fields(device.config, inp, device.pump, pr.TimeGrid(256, 1e-15))


def test_zero_input_efficiency(device):
    grid = pr.TimeGrid(16, 1e-13)
    z = np.zeros(16, complex)
    c = device.config
    s = pr.PulseState(grid, z, z, z, c.omega_i, c.omega_o, c.omega_p)
    with pytest.raises(ZeroInput):
        pr.conversion_efficiency(s, s)


def test_calibration_against_closed_form():
    # efficiency sin^2(sqrt(E)) reaches 0.3 at E = asin(sqrt(0.3))^2
    f = lambda e: np.sin(np.sqrt(e)) ** 2  # noqa: E731
    e = pr.calibrate_pump_energy(f, 0.3, initial=1e-6, rtol=1e-6)
    assert e == pytest.approx(np.arcsin(np.sqrt(0.3)) ** 2, rel=1e-5)
    with pytest.raises(NotBracketed):
        pr.calibrate_pump_energy(lambda e: 0.2 * e / (1 + e), 0.3, max_doublings=20)
