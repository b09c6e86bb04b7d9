"""Joint coupling amplitude (JCA), its Schmidt decomposition and the
single-photon input-to-output spectral map.

The JCA is sampled on a product grid of input and output angular
frequencies, ``f[i, o] = conj(s(w_i - w_o)) * sinc(dk L / 2) / norm``, where
``s`` is the unit-norm pump spectral amplitude and ``norm`` makes
``sum |f|^2 dw_i dw_o = 1``.  The normalization constant is kept on the grid
object because the evolution parameter depends on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.constants import c as C_LIGHT
from scipy.constants import epsilon_0 as EPS0
from scipy.constants import hbar as HBAR
from scipy.interpolate import CubicSpline

from . import dispersion as disp
from . import phasematch as pm
from .errors import GridMismatch, GridTooCoarse, NumericalFailure, UnsupportedShape

FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))
KAPPA_FLOOR = 1e-12
TAIL_WEIGHT = 1e-18
MIN_LOBE_POINTS = 8


# --- field descriptions -----------------------------------------------------------


@dataclass(frozen=True)
class FieldSpec:
    """Spectral description of one of the three fields.

    ``fwhm_nm`` is the FWHM of the spectral intensity in wavelength.  For a
    tabulated shape ``table`` holds (wavelength_um, intensity) pairs and
    ``fwhm_nm`` is informational only.  ``gdd`` [s^2] adds the spectral phase
    ``gdd * W^2 / 2`` (positive = normal dispersion).
    """

    role: str
    lambda0: float
    fwhm_nm: float
    shape: str = "gaussian"
    gdd: float = 0.0
    energy: float = 0.0
    beam_sigma: float | None = None
    single_photon: bool = False
    table: tuple | None = None

    def __post_init__(self):
        if self.role not in ("input", "output", "pump"):
            raise ValueError(f"role must be input, output or pump, got {self.role!r}")
        if not self.fwhm_nm > 0:
            raise ValueError("fwhm_nm must be positive")
        if self.energy < 0:
            raise ValueError("energy must be non-negative")
        if self.beam_sigma is not None and not self.beam_sigma > 0:
            raise ValueError("beam_sigma must be positive")
        if self.shape not in ("gaussian", "tabulated"):
            raise UnsupportedShape(f"unsupported spectral shape {self.shape!r}")
        if self.shape == "tabulated" and (self.table is None or len(self.table) < 4):
            raise ValueError("tabulated shape needs at least 4 (wavelength, intensity) pairs")

    @property
    def omega0(self):
        return float(disp.omega_from_wavelength(self.lambda0))

    @property
    def fwhm_omega(self):
        """Intensity FWHM in angular frequency whose edges map to the requested
        wavelength FWHM (exact, not the small-bandwidth approximation)."""
        return fwhm_omega(self.lambda0, self.fwhm_nm)

    @property
    def sigma_omega(self):
        """Standard deviation of |s|^2 in angular frequency."""
        return self.fwhm_omega * FWHM_TO_SIGMA

    def with_(self, **changes):
        return FieldSpec(**{**self.__dict__, **changes})


def fwhm_omega(lambda0_um, fwhm_nm):
    # edges at w0 -+ dW/2 map to wavelengths whose difference is fwhm_nm
    dl = fwhm_nm * 1e-9
    w0 = float(disp.omega_from_wavelength(lambda0_um))
    tpc = 2 * np.pi * C_LIGHT
    return (-tpc + np.sqrt(tpc**2 + dl**2 * w0**2)) / (dl / 2)


def gaussian_amplitude(Omega, sigma_omega, gdd=0.0):
    """Unit-L2 Gaussian spectral amplitude with optional quadratic phase."""
    Omega = np.asarray(Omega, dtype=float)
    env = (2 * np.pi * sigma_omega**2) ** -0.25 * np.exp(-(Omega**2) / (4 * sigma_omega**2))
    if gdd:
        return env * np.exp(0.5j * gdd * Omega**2)
    return env.astype(complex)


def _tabulated_amplitude(spec, omega):
    tab = np.asarray(spec.table, dtype=float)
    w = disp.omega_from_wavelength(tab[:, 0])
    order = np.argsort(w)
    amp = np.sqrt(np.clip(tab[order, 1], 0, None))
    spline = CubicSpline(w[order], amp)
    lo, hi = w[order][0], w[order][-1]
    # normalize on a dense auxiliary grid so the result is independent of omega
    dense = np.linspace(lo, hi, 8193)
    norm = np.sqrt(np.trapezoid(np.clip(spline(dense), 0, None) ** 2, dense))
    omega = np.asarray(omega, dtype=float)
    out = np.where((omega >= lo) & (omega <= hi), np.clip(spline(omega), 0, None), 0.0) / norm
    Omega = omega - spec.omega0
    return out * np.exp(0.5j * spec.gdd * Omega**2)


def spectral_amplitude(spec, omega):
    """Unit-norm complex spectral amplitude of ``spec`` at angular frequencies ``omega``."""
    if spec.shape == "gaussian":
        return gaussian_amplitude(np.asarray(omega) - spec.omega0, spec.sigma_omega, spec.gdd)
    if spec.shape == "tabulated":
        return _tabulated_amplitude(spec, omega)
    raise UnsupportedShape(f"unsupported spectral shape {spec.shape!r}")


def pump_spectral_amplitude(pump, omega_p):
    return spectral_amplitude(pump, omega_p)


# --- grids ------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralGrid:
    center: float  # rad/s
    span: float  # rad/s, first to last sample
    n_points: int

    def __post_init__(self):
        if self.n_points < 2 or self.n_points & (self.n_points - 1):
            raise ValueError("n_points must be a power of two")
        if not self.span > 0:
            raise ValueError("span must be positive")

    @property
    def values(self):
        return self.center + np.linspace(-0.5, 0.5, self.n_points) * self.span

    @property
    def step(self):
        return self.span / (self.n_points - 1)

    @property
    def wavelengths_nm(self):
        return disp.wavelength_from_omega(self.values) * 1e3

    def refined(self, factor=2):
        return SpectralGrid(self.center, self.span, self.n_points * factor)


def pmf_halfwidths(config):
    """First-null half-widths of the PMF along the output and input axes [rad/s]."""
    vi, vo, vp = pm.inverse_group_velocities(config)
    L = config.length
    out = np.inf if vp == vo else 2 * np.pi / (L * abs(vp - vo))
    inp = np.inf if vi == vp else 2 * np.pi / (L * abs(vi - vp))
    return out, inp


def default_grids(config, pump, n_points=1024, input_span_fwhm=2.5, output_span_lobes=6.0):
    """Input axis: +-2.5 pump FWHM around w_i; output axis: +-6 PMF half-widths around w_o."""
    half_o, _ = pmf_halfwidths(config)
    if not np.isfinite(half_o):
        half_o = pump.fwhm_omega
    gi = SpectralGrid(config.omega_i, 2 * input_span_fwhm * pump.fwhm_omega, n_points)
    go = SpectralGrid(config.omega_o, 2 * output_span_lobes * half_o, n_points)
    return gi, go


# --- JCA --------------------------------------------------------------------------


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class JCAGrid:
    grid_i: SpectralGrid
    grid_o: SpectralGrid
    f: np.ndarray = field(repr=False)
    normalized: bool = True
    pmf_norm: float = 1.0  # sqrt(sum |s* sinc|^2 dw dw) before normalization
    config: object = field(default=None, repr=False, compare=False)
    pump: FieldSpec | None = None

    @property
    def norm(self):
        return float(np.sum(np.abs(self.f) ** 2) * self.grid_i.step * self.grid_o.step)


def raw_kernel(config, pump, omega_i, omega_o):
    """Unnormalized conj(s(w_i - w_o)) * sinc(dk L/2) on the outer product of the axes."""
    wi = np.asarray(omega_i, dtype=float)[:, None]
    wo = np.asarray(omega_o, dtype=float)[None, :]
    s = pump_spectral_amplitude(pump, wi - wo)
    return np.conj(s) * pm.pmf(config, wi, wo)


def jca_from_kernel(grid_i, grid_o, values, **meta):
    """Normalize an arbitrary sampled kernel into a JCAGrid."""
    values = np.asarray(values, dtype=complex)
    if values.shape != (grid_i.n_points, grid_o.n_points):
        raise GridMismatch(f"kernel shape {values.shape} does not match the grids")
    total = np.sum(np.abs(values) ** 2) * grid_i.step * grid_o.step
    if not total > 0 or not np.isfinite(total):
        raise NumericalFailure("kernel has zero or non-finite norm")
    norm = np.sqrt(total)
    return JCAGrid(grid_i, grid_o, _readonly(values / norm), True, float(norm), **meta)


def check_grid_resolution(config, grid_i, grid_o):
    half_o, half_i = pmf_halfwidths(config)
    for name, half, grid in (("output", half_o, grid_o), ("input", half_i, grid_i)):
        if np.isfinite(half) and 2 * half / grid.step < MIN_LOBE_POINTS:
            raise GridTooCoarse(
                f"PMF main lobe spans only {2 * half / grid.step:.1f} points on the {name} axis"
            )


def build_jca(config, pump, grid_i=None, grid_o=None):
    if grid_i is None or grid_o is None:
        di, do = default_grids(config, pump)
        grid_i = grid_i or di
        grid_o = grid_o or do
    check_grid_resolution(config, grid_i, grid_o)
    values = raw_kernel(config, pump, grid_i.values, grid_o.values)
    return jca_from_kernel(grid_i, grid_o, values, config=config, pump=pump)


def kernel_on(jca, omega_i):
    """Normalized JCA re-evaluated on another input axis, same output axis.

    Uses the global normalization of ``jca`` so values are directly comparable.
    """
    return raw_kernel(jca.config, jca.pump, omega_i, jca.grid_o.values) / jca.pmf_norm


# --- Schmidt decomposition --------------------------------------------------------


@dataclass(frozen=True)
class SchmidtData:
    singular_values: np.ndarray = field(repr=False)  # sqrt(kappa_n), retained modes
    input_modes: np.ndarray = field(repr=False)  # (n_i, m), g_n on grid_i
    output_modes: np.ndarray = field(repr=False)  # (n_o, m), h_n on grid_o
    K: float
    purity: float
    grid_i: SpectralGrid
    grid_o: SpectralGrid
    kappa_all: np.ndarray = field(repr=False)

    @property
    def kappa(self):
        return self.singular_values**2

    @property
    def n_modes(self):
        return self.singular_values.size

    def reconstruction_error(self, jca):
        """Largest deviation of the truncated expansion from ``jca.f``,
        relative to the largest JCA magnitude."""
        f = np.asarray(jca.f)
        return float(np.max(np.abs(self.reconstruct() - f)) / np.max(np.abs(f)))

    def reconstruct(self):
        g, h, sv = self.input_modes, self.output_modes, self.singular_values
        return (g * sv) @ np.conj(h).T


def _retained_count(kappa):
    """Modes above KAPPA_FLOOR plus enough of the tail that what is dropped
    weighs less than TAIL_WEIGHT."""
    m = int(np.count_nonzero(kappa > KAPPA_FLOOR))
    tail = np.cumsum(kappa[::-1])[::-1]  # tail[j] = sum_{n >= j} kappa_n
    while m < kappa.size and tail[m] >= TAIL_WEIGHT:
        m += 1
    return max(m, 1)


def schmidt_decompose(jca):
    di, do = jca.grid_i.step, jca.grid_o.step
    M = np.asarray(jca.f) * np.sqrt(di * do)
    try:
        U, S, Vh = scipy.linalg.svd(M, full_matrices=False, lapack_driver="gesdd")
    except (np.linalg.LinAlgError, ValueError):
        try:
            U, S, Vh = scipy.linalg.svd(M, full_matrices=False, lapack_driver="gesvd")
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericalFailure(f"SVD did not converge: {exc}") from exc
    if not np.all(np.isfinite(S)):
        raise NumericalFailure("SVD returned non-finite singular values")
    kappa_all = S**2
    m = _retained_count(kappa_all)
    g = U[:, :m] / np.sqrt(di)
    h = np.conj(Vh[:m, :]).T / np.sqrt(do)
    # fix the arbitrary phase of each pair: largest |g_n| sample real positive
    idx = np.argmax(np.abs(g), axis=0)
    ph = g[idx, np.arange(m)]
    ph = ph / np.abs(ph)
    g = g / ph
    h = h / ph  # f = sum s g h^*  ->  conj(ph) * ph = 1 keeps the product unchanged
    total = kappa_all.sum()
    K = float(total**2 / np.sum(kappa_all**2))
    return SchmidtData(
        singular_values=_readonly(S[:m]), input_modes=_readonly(g), output_modes=_readonly(h),
        K=K, purity=1.0 / K, grid_i=jca.grid_i, grid_o=jca.grid_o,
        kappa_all=_readonly(kappa_all),
    )


# --- maps -------------------------------------------------------------------------


def _check_alpha(jca_or_modes_grid, alpha):
    alpha = np.asarray(alpha)
    if alpha.shape != (jca_or_modes_grid.n_points,):
        raise GridMismatch(f"amplitude of shape {alpha.shape} does not match the input grid")
    return alpha


def apply_jca_map(jca, alpha):
    """Output amplitude beta from beta*(w_o) = sum_i f(w_i, w_o) alpha*(w_i) dw_i.

    ``alpha`` is the input state amplitude in the convention where the
    one-photon state is built from ``alpha*``.  The result is not normalized;
    its norm is the conversion amplitude in the perturbative regime.
    """
    alpha = _check_alpha(jca.grid_i, alpha)
    return np.conj(np.conj(alpha) @ jca.f) * jca.grid_i.step


def map_field_spectrum(kernel, amplitude, step):
    """Output field spectrum sum_i kernel[i, o] * amplitude[i] * step.

    Field spectra transform with the kernel itself (no conjugation), so this
    is the form to compare with a classical propagation run.
    """
    return (np.asarray(amplitude) @ np.asarray(kernel)) * step


def conversion_probability(schmidt, alpha, angle):
    """Per-mode and total conversion probabilities for evolution angle ``angle``."""
    alpha = _check_alpha(schmidt.grid_i, alpha)
    overlaps = (np.conj(alpha) @ schmidt.input_modes) * schmidt.grid_i.step
    eta = np.sin(angle * schmidt.singular_values) ** 2 * np.abs(overlaps) ** 2
    return eta, float(eta.sum())


def convert_state(schmidt, alpha, angle):
    """Input state amplitude rotated into the output band (all orders in ``angle``).

    Returns the output amplitude ``beta`` on grid_o with the same convention
    as :func:`apply_jca_map`.
    """
    alpha = _check_alpha(schmidt.grid_i, alpha)
    overlaps = (np.conj(alpha) @ schmidt.input_modes) * schmidt.grid_i.step
    coeff = np.sin(angle * schmidt.singular_values) * overlaps
    return np.conj(schmidt.output_modes @ coeff)


# --- evolution parameter ----------------------------------------------------------


def overlap_factor(sigma_i, sigma_o, sigma_p):
    """Transverse Gaussian-beam overlap factor [1/m]."""
    den = sigma_i**2 * sigma_o**2 + sigma_i**2 * sigma_p**2 + sigma_o**2 * sigma_p**2
    return sigma_i * sigma_o * sigma_p / den


def carrier_indices(config):
    """((n_i, n_o, n_p), (ng_i, ng_o, ng_p)) at the carriers."""
    cr = config.crystal
    specs = (config.input, config.output, config.pump)
    lams = (config.lambda_i, config.lambda_o, config.lambda_p)
    n = tuple(float(disp.refractive_index(cr, s, lam)) for s, lam in zip(specs, lams))
    ng = tuple(float(disp.group_index(cr, s, lam)) for s, lam in zip(specs, lams))
    return n, ng


def evolution_parameter(config, sigmas, d_eff, n_pump_photons, pmf_norm):
    """Dimensionless evolution angle multiplying the normalized JCA.

    ``sigmas`` are the (input, output, pump) standard-deviation beam radii [m],
    ``d_eff`` in m/V, ``pmf_norm`` the JCA normalization constant
    (:attr:`JCAGrid.pmf_norm`, units s^-1/2).
    """
    (ni, no, np_), (gi, go, gp) = carrier_indices(config)
    w = config.omega_i * config.omega_o * config.omega_p
    pref = np.sqrt(2 * HBAR * d_eff**2 / (np.pi**2 * EPS0 * C_LIGHT**3))
    disp_fac = np.sqrt(w * gi * go * gp / (ni**2 * no**2 * np_**2))
    return float(pref * disp_fac * overlap_factor(*sigmas) * config.length * pmf_norm
                 * np.sqrt(n_pump_photons))


def pump_photon_number(pump, energy=None):
    e = pump.energy if energy is None else energy
    return e / (HBAR * pump.omega0)


# --- reference device -------------------------------------------------------------


@dataclass(frozen=True)
class Device:
    """A group-velocity-matched device together with its pump and beam sizes."""

    config: pm.InteractionConfig
    pump: FieldSpec
    solution: pm.GVMSolution
    sigmas: tuple  # (input, output, pump) [m]
    d_eff: float  # m/V


REFERENCE_LENGTH = 2.5e-3
REFERENCE_PUMP_FWHM_NM = 50.0
REFERENCE_SIGMA_PUMP = 2.0e-6
REFERENCE_D_EFF = 2 / np.pi * 15.4e-12


def build_device(crystal, polarizations="ooe", plane="XZ", lambda_o=1.55,
                 length=REFERENCE_LENGTH, *, fixed_angle=90.0, near=None,
                 pump_fwhm_nm=REFERENCE_PUMP_FWHM_NM, pump_gdd=0.0, pump_energy=0.0,
                 sigma_pump=REFERENCE_SIGMA_PUMP, sigma_input=None, sigma_output=None,
                 d_eff=REFERENCE_D_EFF):
    """Device at a group-velocity-matched operating point.

    With ``fixed_angle`` set the direction is fixed and a poling grating
    cancels the carrier mismatch; with ``fixed_angle=None`` the angle is
    solved for birefringent phase matching.  The pump is centred on the
    operating point's pump wavelength.  The input beam defaults to half the
    pump radius and the output beam to the pump radius.
    """
    sol = pm.solve_gvm_operating_point(crystal, polarizations, lambda_o, plane,
                                       fixed_angle=fixed_angle, near=near)
    config = sol.config(crystal, length)
    pump = FieldSpec("pump", config.lambda_p, pump_fwhm_nm, gdd=pump_gdd, energy=pump_energy,
                     beam_sigma=sigma_pump)
    sigmas = (sigma_input if sigma_input is not None else sigma_pump / 2,
              sigma_output if sigma_output is not None else sigma_pump,
              sigma_pump)
    return Device(config, pump, sol, sigmas, d_eff)


def reference_device(crystal=None, **kw):
    """Periodically poled KTP propagating along X: input and output polarized
    along Y, pump along Z, poling period chosen to cancel the carrier mismatch
    at the input/pump group-velocity-matched point.  Bulk indices stand in for
    waveguide data.
    """
    crystal = crystal if crystal is not None else disp.get_crystal("ktp_kato2002")
    return build_device(crystal, "ooe", "XZ", **kw)
