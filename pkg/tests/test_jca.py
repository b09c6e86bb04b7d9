import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.constants import c as C_LIGHT

from freqhom import jca
from freqhom.errors import GridMismatch, GridTooCoarse, UnsupportedShape


def _fwhm(x, y):
    half = y.max() / 2
    above = np.nonzero(y >= half)[0]
    i0, i1 = above[0], above[-1]
    left = np.interp(half, [y[i0 - 1], y[i0]], [x[i0 - 1], x[i0]])
    right = np.interp(half, [y[i1 + 1], y[i1]], [x[i1 + 1], x[i1]])
    return right - left


def test_gaussian_kernel_purity_oracle():
    # for exp(-(a x^2 + b y^2 + 2 c x y) / 2) the purity is sqrt(1 - c^2 / (a b))
    g = jca.SpectralGrid(0.0, 24.0, 512)
    x = g.values
    X, Y = np.meshgrid(x, x, indexing="ij")
    for a, b, c in ((1.0, 2.0, 1.1), (1.0, 1.0, 0.3), (0.5, 3.0, -0.9)):
        f = np.exp(-0.5 * (a * X**2 + b * Y**2 + 2 * c * X * Y))
        s = jca.schmidt_decompose(jca.jca_from_kernel(g, g, f))
        assert s.purity == pytest.approx(np.sqrt(1 - c**2 / (a * b)), abs=1e-10)


def test_separable_kernel_has_one_mode():
    g = jca.SpectralGrid(0.0, 20.0, 256)
    x = g.values
    f = np.outer(np.exp(-x**2 / 2), np.exp(-(x - 1) ** 2 / 3) * np.exp(0.4j * x))
    s = jca.schmidt_decompose(jca.jca_from_kernel(g, g, f))
    assert s.K == pytest.approx(1.0, abs=1e-12)
    assert s.n_modes == 1


def test_reference_jca_invariants(jca_grid, schmidt):
    assert jca_grid.norm == pytest.approx(1.0, abs=1e-12)
    assert float(np.sum(schmidt.kappa_all)) == pytest.approx(1.0, abs=1e-12)
    assert schmidt.reconstruction_error(jca_grid) < 1e-8
    assert 1.0 <= schmidt.K < 1.2
    assert schmidt.purity == pytest.approx(1 / schmidt.K)
    g = schmidt.input_modes
    gram = np.conj(g.T) @ g * schmidt.grid_i.step
    np.testing.assert_allclose(gram, np.eye(g.shape[1]), atol=1e-10)


def test_kappa_sorted_and_retention(schmidt):
    k = schmidt.kappa
    assert np.all(np.diff(k) <= 0)
    dropped = schmidt.kappa_all[schmidt.n_modes:].sum()
    assert dropped < jca.TAIL_WEIGHT


def test_mode_conversion_probability(schmidt):
    alpha = schmidt.input_modes[:, 0]
    for angle in (0.1, 0.5, 1.0):
        eta, total = jca.conversion_probability(schmidt, alpha, angle)
        assert total == pytest.approx(np.sin(angle * schmidt.singular_values[0]) ** 2, rel=1e-9)
        assert eta[1:].sum() < 1e-10


def test_small_angle_conversion_equals_linear_map(jca_grid, schmidt, device):
    inp = jca.FieldSpec("input", device.config.lambda_i + 0.002, 1.0)
    alpha = jca.spectral_amplitude(inp, jca_grid.grid_i.values)
    theta = 1e-4
    full = jca.convert_state(schmidt, alpha, theta)
    lin = theta * jca.apply_jca_map(jca_grid, alpha)
    assert np.linalg.norm(full - lin) / np.linalg.norm(lin) < 1e-6


def test_map_rejects_wrong_grid(jca_grid):
    with pytest.raises(GridMismatch):
        jca.apply_jca_map(jca_grid, np.ones(7))


def test_coarse_grid_rejected(device):
    gi, go = jca.default_grids(device.config, device.pump, 16)
    with pytest.raises(GridTooCoarse):
        jca.build_jca(device.config, device.pump, gi, go)


def test_field_spec_validation():
    with pytest.raises(ValueError):
        jca.FieldSpec("idler", 1.0, 1.0)
    with pytest.raises(ValueError):
        jca.FieldSpec("input", 1.0, 0.0)
    with pytest.raises(UnsupportedShape):
        jca.FieldSpec("input", 1.0, 1.0, shape="sech")


def test_fwhm_conversion_reduces_to_small_bandwidth_limit():
    lam, dl = 0.8, 0.1
    approx = 2 * np.pi * C_LIGHT * dl * 1e-9 / (lam * 1e-6) ** 2
    assert jca.fwhm_omega(lam, dl) == pytest.approx(approx, rel=1e-6)
    # edges map exactly onto the wavelength FWHM
    w0 = 2 * np.pi * C_LIGHT / (lam * 1e-6)
    dw = jca.fwhm_omega(lam, 50.0)
    l_lo = 2 * np.pi * C_LIGHT / (w0 + dw / 2) * 1e9
    l_hi = 2 * np.pi * C_LIGHT / (w0 - dw / 2) * 1e9
    assert l_hi - l_lo == pytest.approx(50.0, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(fwhm=st.floats(0.05, 50.0), lam=st.floats(0.5, 1.6))
def test_gaussian_amplitude_norm_and_width(fwhm, lam):
    spec = jca.FieldSpec("input", lam, fwhm)
    w = spec.omega0 + np.linspace(-6, 6, 4001) * spec.fwhm_omega
    s = jca.spectral_amplitude(spec, w)
    step = w[1] - w[0]
    assert np.sum(np.abs(s) ** 2) * step == pytest.approx(1.0, rel=1e-9)
    assert _fwhm(w, np.abs(s) ** 2) == pytest.approx(spec.fwhm_omega, rel=1e-4)


def test_chirp_changes_phase_only():
    spec = jca.FieldSpec("pump", 0.84, 50.0)
    w = spec.omega0 + np.linspace(-3, 3, 101) * spec.fwhm_omega
    a = jca.spectral_amplitude(spec, w)
    b = jca.spectral_amplitude(spec.with_(gdd=1e-25), w)
    np.testing.assert_allclose(np.abs(a), np.abs(b), rtol=1e-14)


def test_tabulated_shape_reproduces_gaussian():
    spec = jca.FieldSpec("input", 0.8, 2.0)
    lam = np.linspace(0.79, 0.81, 401)
    w = 2 * np.pi * C_LIGHT / (lam * 1e-6)
    inten = np.abs(jca.spectral_amplitude(spec, w)) ** 2
    tab = jca.FieldSpec("input", 0.8, 2.0, shape="tabulated", table=tuple(zip(lam, inten)))
    wq = spec.omega0 + np.linspace(-2, 2, 41) * spec.fwhm_omega
    np.testing.assert_allclose(np.abs(jca.spectral_amplitude(tab, wq)),
                               np.abs(jca.spectral_amplitude(spec, wq)), rtol=2e-3, atol=1e-12)


def test_overlap_factor_equal_beams():
    assert jca.overlap_factor(2e-6, 2e-6, 2e-6) == pytest.approx(1 / (3 * 2e-6))


def test_evolution_parameter_scales_with_root_photon_number(device, jca_grid):
    a = jca.evolution_parameter(device.config, device.sigmas, device.d_eff, 1e8, jca_grid.pmf_norm)
    b = jca.evolution_parameter(device.config, device.sigmas, device.d_eff, 4e8, jca_grid.pmf_norm)
    assert b == pytest.approx(2 * a, rel=1e-12)


def test_reference_device_geometry(device):
    assert device.sigmas == (1e-6, 2e-6, 2e-6)
    assert device.config.length == pytest.approx(2.5e-3)
    assert device.solution.poling_period == pytest.approx(29.9, abs=0.1)
