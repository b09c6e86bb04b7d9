"""Split-step Fourier propagation of the three coupled DFG envelopes.

Field convention: E_j = A_j(z, t) exp(i (k_j z - w_j t)) with slowly varying
envelopes normalized so that ``sum |A|^2 dt`` is the pulse energy [J].
Spectra use ``A~(W) = int A(t) exp(i W t) dt``; in that convention a
positive group-delay dispersion ``gdd`` is the spectral phase
``+gdd W^2 / 2``.

Each step is symmetrized: half a linear (dispersive) step in the frequency
domain, a full nonlinear step integrated with fixed-step RK4 in the time
domain, then the second linear half step.  The frame moves with a chosen
reference group velocity (the input's by default).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import c as C_LIGHT
from scipy.constants import epsilon_0 as EPS0
from scipy.constants import hbar as HBAR

from . import dispersion as disp
from . import jca
from .phasematch import delta_k0
from .errors import NotBracketed, WindowTooSmall, ZeroInput

DEFAULT_POINTS = 2**14
DEFAULT_STEPS = 256
MIN_WINDOW = 40e-12
WINDOW_FACTOR = 8.0
SAMPLES_PER_PERIOD = 8
FIELDS = ("i", "o", "p")


# --- grids and pulses -------------------------------------------------------------


@dataclass(frozen=True)
class TimeGrid:
    n_points: int
    dt: float

    def __post_init__(self):
        if self.n_points < 2 or self.n_points & (self.n_points - 1):
            raise ValueError("n_points must be a power of two")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def window(self):
        return self.n_points * self.dt

    @property
    def t(self):
        return (np.arange(self.n_points) - self.n_points // 2) * self.dt

    @property
    def omega(self):
        """Relative angular frequencies in FFT order [rad/s]."""
        return 2 * np.pi * np.fft.fftfreq(self.n_points, self.dt)

    @property
    def domega(self):
        return 2 * np.pi / self.window


def to_spectrum(A, grid):
    """A~(W) in FFT order for an envelope sampled on the centered time axis."""
    return grid.n_points * grid.dt * np.fft.ifft(np.fft.ifftshift(A))


def from_spectrum(S, grid):
    return np.fft.fftshift(np.fft.fft(S)) / (grid.n_points * grid.dt)


def tl_duration(spec):
    """Transform-limited intensity FWHM [s] of a Gaussian FieldSpec."""
    return 4 * np.log(2) / spec.fwhm_omega


def chirped_duration(spec, gdd=None):
    tau0 = tl_duration(spec)
    g = spec.gdd if gdd is None else gdd
    return tau0 * np.sqrt(1 + (4 * np.log(2) * g / tau0**2) ** 2)


def gdd_for_duration(spec, duration):
    """GDD [s^2] that stretches the transform-limited pulse of ``spec`` to ``duration`` (FWHM)."""
    tau0 = tl_duration(spec)
    if duration < tau0:
        raise ValueError("target duration is shorter than the transform limit")
    return tau0**2 / (4 * np.log(2)) * np.sqrt((duration / tau0) ** 2 - 1)


GAUSS_AREA = np.sqrt(np.pi / (4 * np.log(2)))  # energy = peak power * FWHM * GAUSS_AREA


def peak_power(spec, energy=None, gdd=None):
    """Peak power [W] of a Gaussian pulse with the given energy and chirp."""
    e = spec.energy if energy is None else energy
    return e / (chirped_duration(spec, gdd) * GAUSS_AREA)


def energy_at_peak_power(spec, power, gdd=None):
    """Pulse energy giving peak power ``power`` once chirped by ``gdd``."""
    return power * chirped_duration(spec, gdd) * GAUSS_AREA


def _max_offset(spec, carrier):
    return abs(spec.omega0 - carrier) + spec.fwhm_omega


def default_time_grid(config, input_spec, pump, n_points=DEFAULT_POINTS, window=None):
    """Window of 8x the longest (chirped) pulse, at least 40 ps; the point count
    is doubled until the sampling resolves the widest relative frequency."""
    if window is None:
        longest = max(chirped_duration(pump), chirped_duration(input_spec))
        window = max(WINDOW_FACTOR * longest, MIN_WINDOW)
    wmax = max(_max_offset(input_spec, config.omega_i), _max_offset(pump, config.omega_p))
    n = n_points
    while window / n > 2 * np.pi / (SAMPLES_PER_PERIOD * wmax):
        n *= 2
    return TimeGrid(n, window / n)


@dataclass(frozen=True)
class PulseState:
    grid: TimeGrid
    A_i: np.ndarray = field(repr=False)
    A_o: np.ndarray = field(repr=False)
    A_p: np.ndarray = field(repr=False)
    omega_i: float
    omega_o: float
    omega_p: float
    z: float = 0.0

    def __post_init__(self):
        if abs(self.omega_p - (self.omega_i - self.omega_o)) > 1e-9 * self.omega_i:
            raise ValueError("carriers violate energy conservation")

    @property
    def fields(self):
        return (self.A_i, self.A_o, self.A_p)

    @property
    def carriers(self):
        return (self.omega_i, self.omega_o, self.omega_p)

    def energy(self, which):
        A = dict(zip(FIELDS, self.fields))[which]
        return float(np.sum(np.abs(A) ** 2) * self.grid.dt)

    def photon_numbers(self):
        """Carrier-based photon numbers (N_i, N_o, N_p)."""
        return tuple(
            float(np.sum(np.abs(A) ** 2) * self.grid.dt / (HBAR * w))
            for A, w in zip(self.fields, self.carriers)
        )


def _pulse(spec, carrier, grid, energy):
    Om = grid.omega
    amp = jca.spectral_amplitude(spec, carrier + Om)
    A = from_spectrum(amp, grid)
    e = np.sum(np.abs(A) ** 2) * grid.dt
    if e == 0:
        if energy == 0:
            return np.zeros(grid.n_points, complex)
        raise WindowTooSmall("pulse spectrum falls outside the simulation bandwidth")
    return A * np.sqrt(energy / e)


def input_energy(spec):
    return HBAR * spec.omega0 if spec.single_photon else spec.energy


def init_fields(config, input_spec, pump, grid=None):
    """Gaussian (optionally chirped) input and pump envelopes with zero output."""
    grid = grid or default_time_grid(config, input_spec, pump)
    longest = max(chirped_duration(pump), chirped_duration(input_spec))
    if grid.window < 4 * longest:
        raise WindowTooSmall(
            f"time window {grid.window:.3g} s is shorter than 4x the longest pulse {longest:.3g} s"
        )
    A_i = _pulse(input_spec, config.omega_i, grid, input_energy(input_spec))
    A_p = _pulse(pump, config.omega_p, grid, pump.energy)
    return PulseState(grid, A_i, np.zeros_like(A_i), A_p, config.omega_i, config.omega_o,
                      config.omega_p, 0.0)


# --- stepper ----------------------------------------------------------------------


@dataclass(frozen=True)
class StepperConfig:
    n_steps: int
    gamma: tuple  # (i, o, p) [1/(m sqrt(W))]
    beta1: tuple  # inverse group velocities [s/m]
    beta2: tuple  # GVD [s^2/m]
    dk0: float  # carrier mismatch including grating [1/m]
    beta1_ref: float
    length: float

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be positive")

    @property
    def dz(self):
        return self.length / self.n_steps


def coupling_coefficients(config, sigmas, d_eff):
    """Per-field coupling rates chosen so photon flux obeys Manley-Rowe and the
    perturbative output matches the JCA map scaled by the evolution parameter."""
    (ni, no, np_), (gi, go, gp) = jca.carrier_indices(config)
    common = (2 / np.sqrt(np.pi)) * d_eff * np.sqrt(
        gi * go * gp / (EPS0 * C_LIGHT**3 * ni**2 * no**2 * np_**2)
    ) * jca.overlap_factor(*sigmas)
    return tuple(w * common for w in (config.omega_i, config.omega_o, config.omega_p))


def make_stepper(config, sigmas, d_eff, n_steps=DEFAULT_STEPS, reference="i", gamma=None):
    cr = config.crystal
    specs = (config.input, config.output, config.pump)
    lams = (config.lambda_i, config.lambda_o, config.lambda_p)
    b1 = tuple(float(disp.group_velocity_inverse(cr, s, lam)) for s, lam in zip(specs, lams))
    b2 = tuple(float(disp.gvd(cr, s, lam)) for s, lam in zip(specs, lams))
    ref = b1[FIELDS.index(reference)] if isinstance(reference, str) else float(reference)
    g = coupling_coefficients(config, sigmas, d_eff) if gamma is None else tuple(gamma)
    return StepperConfig(n_steps, g, b1, b2, delta_k0(config), ref, config.length)


def _linear_factors(stepper, grid, h):
    Om = grid.omega
    return [np.exp(1j * ((b1 - stepper.beta1_ref) * Om + 0.5 * b2 * Om**2) * h)
            for b1, b2 in zip(stepper.beta1, stepper.beta2)]


def _linear(fields, factors, grid):
    """Dispersive substep.  The operator is unitary, so each field's energy is
    restored afterwards; this removes FFT round-off drift, which otherwise
    builds up linearly and is amplified by the large pump photon number."""
    out = []
    for A, f in zip(fields, factors):
        e0 = np.vdot(A, A).real
        B = from_spectrum(to_spectrum(A, grid) * f, grid)
        e1 = np.vdot(B, B).real
        out.append(B * np.sqrt(e0 / e1) if e1 > 0 else B)
    return out


def _rhs(A_i, A_o, A_p, z, gam, dk):
    ph = np.exp(1j * dk * z)
    gi, go, gp = gam
    return (1j * gi * A_o * A_p * np.conj(ph),
            1j * go * A_i * np.conj(A_p) * ph,
            1j * gp * A_i * np.conj(A_o) * ph)


def _rk4(fields, z, h, gam, dk):
    y = fields
    k1 = _rhs(*y, z, gam, dk)
    k2 = _rhs(*[a + 0.5 * h * k for a, k in zip(y, k1)], z + 0.5 * h, gam, dk)
    k3 = _rhs(*[a + 0.5 * h * k for a, k in zip(y, k2)], z + 0.5 * h, gam, dk)
    k4 = _rhs(*[a + h * k for a, k in zip(y, k3)], z + h, gam, dk)
    return [a + h / 6 * (p + 2 * q + 2 * r + s) for a, p, q, r, s in zip(y, k1, k2, k3, k4)]


def step(state, stepper, config=None, _factors=None):
    """Advance ``state`` by one step of length L / n_steps."""
    h = stepper.dz
    if state.z + h > stepper.length * (1 + 1e-12):
        raise ValueError("step would leave the crystal")
    grid = state.grid
    half = _factors if _factors is not None else _linear_factors(stepper, grid, h / 2)
    fields = _linear(state.fields, half, grid)
    if any(stepper.gamma):
        fields = _rk4(fields, state.z, h, stepper.gamma, stepper.dk0)
    fields = _linear(fields, half, grid)
    return replace(state, A_i=fields[0], A_o=fields[1], A_p=fields[2], z=state.z + h)


@dataclass(frozen=True)
class Diagnostics:
    z: np.ndarray = field(repr=False)
    photon_numbers: np.ndarray = field(repr=False)  # (n_steps + 1, 3)
    manley_rowe_o: float  # max |dN_o + dN_i| / N_i(0)
    manley_rowe_p: float  # max |dN_p + dN_i| / N_i(0)
    linear_drift: tuple = (0.0, 0.0, 0.0)  # relative round-off of the dispersive steps

    @property
    def manley_rowe(self):
        return max(self.manley_rowe_o, self.manley_rowe_p)

    @property
    def efficiency(self):
        n0 = self.photon_numbers[0, 0]
        return float(self.photon_numbers[-1, 1] / n0) if n0 > 0 else 0.0


def propagate(state, stepper, config=None):
    """Run all steps; return the final state and per-step diagnostics.

    Adjacent linear half steps are fused, which is equivalent to calling
    :func:`step` repeatedly.  Photon numbers in the diagnostics are
    accumulated from the changes across the nonlinear substeps only: the
    dispersive operator conserves them exactly, and its floating-point
    round-off (reported separately as ``linear_drift``, relative) would
    otherwise swamp single-photon bookkeeping next to a pump holding ~1e10
    photons.
    """
    grid, h = state.grid, stepper.dz
    half = _linear_factors(stepper, grid, h / 2)
    full = [f * f for f in half]
    z0 = state.z
    z = [z0]

    def numbers(fields):
        return np.array([np.sum(np.abs(A) ** 2) * grid.dt / (HBAR * w)
                         for A, w in zip(fields, state.carriers)])

    start = numbers(state.fields)
    counts = [start]
    fields = _linear(state.fields, half, grid)
    for n in range(stepper.n_steps):
        zn = z0 + n * h
        if any(stepper.gamma):
            before = numbers(fields)
            fields = _rk4(fields, zn, h, stepper.gamma, stepper.dk0)
            counts.append(counts[-1] + (numbers(fields) - before))
        else:
            counts.append(counts[-1])
        last = n == stepper.n_steps - 1
        fields = _linear(fields, half if last else full, grid)
        z.append(z0 + (n + 1) * h)
    state = replace(state, A_i=fields[0], A_o=fields[1], A_p=fields[2], z=z[-1])
    counts = np.asarray(counts)
    d = counts - counts[0]
    n0 = counts[0, 0]
    scale = n0 if n0 > 0 else 1.0
    mr_o = float(np.max(np.abs(d[:, 1] + d[:, 0])) / scale)
    mr_p = float(np.max(np.abs(d[:, 2] + d[:, 0])) / scale)
    drift = (numbers(fields) - counts[-1]) / np.maximum(counts[-1], np.finfo(float).tiny)
    return state, Diagnostics(np.asarray(z), counts, mr_o, mr_p, tuple(float(x) for x in drift))


def conversion_efficiency(initial, final):
    """Output photons at the end per input photon at the start."""
    n_in = initial.photon_numbers()[0]
    if n_in <= 0:
        raise ZeroInput("initial state carries no input photons")
    return final.photon_numbers()[1] / n_in


# --- spectra ----------------------------------------------------------------------


def field_spectrum(state, which="o"):
    """(absolute angular frequency ascending, complex spectrum) of one field."""
    A = dict(zip(FIELDS, state.fields))[which]
    carrier = dict(zip(FIELDS, state.carriers))[which]
    S = to_spectrum(A, state.grid)
    Om = state.grid.omega
    order = np.argsort(Om)
    return carrier + Om[order], S[order]


def output_spectrum(state, which="o"):
    """(wavelength_nm, angular frequency, |A~|^2) ascending in frequency."""
    omega, S = field_spectrum(state, which)
    return disp.wavelength_from_omega(omega) * 1e3, omega, np.abs(S) ** 2


# --- scenarios and calibration ----------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    """Everything needed to simulate one input pulse through one device."""

    device: jca.Device
    input_spec: jca.FieldSpec
    n_steps: int = DEFAULT_STEPS
    n_points: int = DEFAULT_POINTS
    window: float | None = None

    def grid(self):
        return default_time_grid(self.device.config, self.input_spec, self.device.pump,
                                 self.n_points, self.window)

    def run(self, pump_energy=None, pump_gdd=None, grid=None):
        dev = self.device
        pump = dev.pump
        if pump_energy is not None:
            pump = pump.with_(energy=pump_energy)
        if pump_gdd is not None:
            pump = pump.with_(gdd=pump_gdd)
        grid = grid or default_time_grid(dev.config, self.input_spec, pump, self.n_points,
                                         self.window)
        stepper = make_stepper(dev.config, dev.sigmas, dev.d_eff, self.n_steps)
        s0 = init_fields(dev.config, self.input_spec, pump, grid)
        s1, diag = propagate(s0, stepper, dev.config)
        return s0, s1, diag

    def efficiency(self, pump_energy):
        s0, s1, _ = self.run(pump_energy)
        return conversion_efficiency(s0, s1)

    def efficiency_gdd(self, pump_energy, pump_gdd):
        s0, s1, _ = self.run(pump_energy, pump_gdd)
        return conversion_efficiency(s0, s1)


def calibrate_pump_energy(efficiency, target, initial=1e-12, rtol=2e-3, max_doublings=80):
    """Pump energy at which ``efficiency(energy)`` reaches ``target``.

    The guess is doubled until the target is exceeded, then the bracket is
    bisected geometrically until the efficiency is within ``rtol`` of the
    target.  ``efficiency`` may be any callable, e.g. ``Scenario.efficiency``.
    """
    if not 0 < target < 0.99:
        raise ValueError("target efficiency must lie in (0, 0.99)")
    lo, eta_lo = 0.0, 0.0
    e = initial
    eta = efficiency(e)
    if eta > 0 and eta < target:
        # small-signal scaling (efficiency proportional to energy) for a good first jump
        e = max(e, 0.5 * e * target / eta)
        eta = efficiency(e)
    n = 0
    while eta < target:
        lo, eta_lo = e, eta
        e *= 2
        eta = efficiency(e)
        n += 1
        if n > max_doublings:
            raise NotBracketed("target efficiency not reached while doubling the pump energy")
    hi, eta_hi = e, eta
    if lo == 0.0:
        lo = hi / 2
        eta_lo = efficiency(lo)
        while eta_lo >= target:
            hi, eta_hi = lo, eta_lo
            lo /= 2
            eta_lo = efficiency(lo)
    best, best_eta = hi, eta_hi
    for _ in range(100):
        if abs(best_eta - target) <= rtol * target:
            return best
        mid = np.sqrt(lo * hi)
        eta_mid = efficiency(mid)
        best, best_eta = mid, eta_mid
        if eta_mid < target:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1 < 1e-12:
            break
    if abs(best_eta - target) <= rtol * target:
        return best
    raise NotBracketed("bisection on the pump energy did not converge")


def calibrate_peak_power(device, input_spec, target, chirp_duration, **scenario_kw):
    """Pump peak power [W] at which the pump, chirped to ``chirp_duration``
    [s], converts ``input_spec`` with efficiency ``target``.

    Returns (peak_power, pulse_energy, gdd).
    """
    gdd = gdd_for_duration(device.pump, chirp_duration)
    sc = Scenario(device, input_spec, **scenario_kw)
    energy = calibrate_pump_energy(lambda e: sc.efficiency_gdd(e, gdd), target)
    return peak_power(device.pump, energy, gdd), energy, gdd


def efficiency_sweep(device, input_spec, power, gdds, **scenario_kw):
    """Conversion efficiency and diagnostics for each pump GDD at fixed peak power.

    Stretching the pump at fixed peak power raises its energy in proportion
    to the chirped duration.  Returns a list of (efficiency, Diagnostics).
    """
    sc = Scenario(device, input_spec, **scenario_kw)
    out = []
    for g in gdds:
        s0, s1, diag = sc.run(energy_at_peak_power(device.pump, power, g), g)
        out.append((conversion_efficiency(s0, s1), diag))
    return out
