"""Interferometric visibility between output fields and homogenization bandwidth.

The visibility of two fields is the fringe contrast of their first-order
interferogram,

    V = 2 max_tau |G(tau)| / (P1 + P2),     G(tau) = int conj(E1(t)) E2(t + tau) dt,

so V = 1 only for identical fields (up to delay and global phase) and it
falls with spectral distinguishability or unequal energies.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import jca
from . import propagation as pr
from .errors import GridMismatch, ThresholdNotCrossed, ZeroField

PAD = 4
LOCAL_INPUT_POINTS = 512
LOCAL_INPUT_SPAN_FWHM = 5.0


def _peak_modulus(p, dx, pad=PAD):
    """max over y of |sum_k p_k exp(-i k dx y)|: FFT search, then a bounded
    refinement between the neighbouring samples."""
    n = p.size
    m = pad * n
    coarse = np.abs(np.fft.fft(p, m))
    j = int(np.argmax(coarse))
    dy = 2 * np.pi / (m * dx)
    k = np.arange(n) * dx

    def neg(y):
        return -abs(np.sum(p * np.exp(-1j * k * y)))

    res = minimize_scalar(neg, bounds=((j - 1) * dy, (j + 1) * dy), method="bounded",
                          options={"xatol": dy * 1e-6})
    return max(float(coarse[j]), -float(res.fun))


def _canonical(a, b, sign):
    """Order a pair deterministically so the result is exactly symmetric."""
    if a.tobytes() > b.tobytes():
        return b, a, -sign
    return a, b, sign


def cross_correlation_envelope(E1, E2, dt, carrier_offset=0.0):
    """Linear cross-correlation of two envelopes on a common time grid.

    ``carrier_offset`` is w2 - w1 [rad/s]; E2 is re-referenced to the first
    field's carrier before correlating.  Returns (tau, G) with tau ascending.
    """
    E1 = np.asarray(E1, dtype=complex)
    E2 = np.asarray(E2, dtype=complex)
    if E1.shape != E2.shape or E1.ndim != 1:
        raise GridMismatch("envelopes must be 1-D arrays on the same time grid")
    n = E1.size
    t = (np.arange(n) - n // 2) * dt
    E2r = E2 * np.exp(-1j * carrier_offset * t)
    c = np.fft.ifft(np.conj(np.fft.fft(E1, 2 * n)) * np.fft.fft(E2r, 2 * n)) * dt
    lags = np.fft.fftfreq(2 * n, 1.0 / (2 * n)).astype(int)
    order = np.argsort(lags)
    tau = lags[order] * dt
    return tau, c[order] * np.exp(-1j * carrier_offset * tau)


def _energy(a, dx):
    return float(np.sum(np.abs(a) ** 2) * dx)


def visibility(E1, E2, dt, carrier_offset=0.0):
    """Fringe visibility of two time-domain envelopes, in [0, 1]."""
    E1 = np.asarray(E1, dtype=complex)
    E2 = np.asarray(E2, dtype=complex)
    if E1.shape != E2.shape or E1.ndim != 1:
        raise GridMismatch("envelopes must be 1-D arrays on the same time grid")
    P1, P2 = _energy(E1, dt), _energy(E2, dt)
    if not (P1 > 0 and P2 > 0):
        raise ZeroField("both fields need positive energy")
    if carrier_offset == 0 and np.array_equal(E1, E2):
        return 1.0
    E1, E2, offset = _canonical(E1, E2, carrier_offset)
    n = E1.size
    t = (np.arange(n) - n // 2) * dt
    E2r = E2 * np.exp(-1j * offset * t)
    # spectra of zero-padded envelopes -> linear (not circular) correlation
    X1 = np.fft.fft(E1, 2 * n)
    X2 = np.fft.fft(E2r, 2 * n)
    p = np.conj(X1) * X2
    dOmega = 2 * np.pi / (2 * n * dt)
    peak = _peak_modulus(p, dOmega) * dt / (2 * n)
    return min(1.0, 2 * peak / (P1 + P2))  # clip only absorbs round-off above 1


def spectral_visibility(B1, B2, domega):
    """Visibility of two fields given by their spectra on one uniform frequency axis."""
    B1 = np.asarray(B1, dtype=complex)
    B2 = np.asarray(B2, dtype=complex)
    if B1.shape != B2.shape or B1.ndim != 1:
        raise GridMismatch("spectra must be 1-D arrays on the same frequency axis")
    P1, P2 = _energy(B1, domega), _energy(B2, domega)
    if not (P1 > 0 and P2 > 0):
        raise ZeroField("both fields need positive energy")
    if np.array_equal(B1, B2):
        return 1.0
    B1, B2, _ = _canonical(B1, B2, 0.0)
    peak = _peak_modulus(np.conj(B1) * B2, domega) * domega
    return min(1.0, 2 * peak / (P1 + P2))


# --- scans ------------------------------------------------------------------------


@dataclass(frozen=True)
class VisibilityScan:
    reference_lambda: float  # um
    points: tuple  # ((lambda_i0 [um], V), ...), ascending in lambda
    source: str

    def __post_init__(self):
        if self.source not in ("from_jca_map", "from_propagation"):
            raise ValueError("source must be from_jca_map or from_propagation")
        for _, v in self.points:
            if not 0.0 <= v <= 1.0:
                raise ValueError("visibilities must lie in [0, 1]")

    @property
    def lambdas(self):
        return np.array([p[0] for p in self.points])

    @property
    def values(self):
        return np.array([p[1] for p in self.points])


def jca_output_spectrum(jca_grid, input_spec):
    """Output field spectrum on the JCA output axis for one input pulse.

    The kernel is re-evaluated on a local input axis (512 points over +-5
    input FWHM) with the JCA's global normalization, so inputs narrower than
    the JCA input step are still resolved.
    """
    w0, fw = input_spec.omega0, input_spec.fwhm_omega
    wi = w0 + np.linspace(-LOCAL_INPUT_SPAN_FWHM, LOCAL_INPUT_SPAN_FWHM, LOCAL_INPUT_POINTS) * fw
    amp = jca.spectral_amplitude(input_spec, wi)
    step = wi[1] - wi[0]
    amp = amp / np.sqrt(np.sum(np.abs(amp) ** 2) * step)
    return jca.map_field_spectrum(jca.kernel_on(jca_grid, wi), amp, step)


def _map(fn, items, threads):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _scan_jca(device, template, lambdas, jca_grid, threads):
    jca_grid = jca_grid or jca.build_jca(device.config, device.pump)
    ref = jca_output_spectrum(jca_grid, template.with_(lambda0=device.config.lambda_i))
    step = jca_grid.grid_o.step

    def one(lam):
        out = jca_output_spectrum(jca_grid, template.with_(lambda0=lam))
        return spectral_visibility(ref, out, step)

    return _map(one, list(lambdas), threads)


def _common_grid(device, template, lambdas, n_points, window):
    lam_all = list(lambdas) + [device.config.lambda_i]
    grids = [pr.default_time_grid(device.config, template.with_(lambda0=lam), device.pump,
                                  n_points, window) for lam in lam_all]
    return max(grids, key=lambda g: (g.n_points, -g.dt))


def _scan_propagation(device, template, lambdas, pump_energy, n_steps, n_points, window,
                      threads):
    grid = _common_grid(device, template, lambdas, n_points, window)

    def output(lam):
        sc = pr.Scenario(device, template.with_(lambda0=lam), n_steps=n_steps)
        _, s1, diag = sc.run(pump_energy, grid=grid)
        return s1.A_o

    ref = output(device.config.lambda_i)
    return _map(lambda lam: visibility(ref, output(lam), grid.dt), list(lambdas), threads)


def visibility_scan(device, input_template, lambdas, source="from_jca_map", *, jca_grid=None,
                    pump_energy=None, n_steps=pr.DEFAULT_STEPS, n_points=pr.DEFAULT_POINTS,
                    window=None, threads=1):
    """Visibility of each input carrier's output against the output produced
    by an input at the group-velocity-matched wavelength.

    ``source`` selects the perturbative JCA map or the split-step simulation
    (the latter uses ``pump_energy`` or the device pump's energy).
    """
    lambdas = sorted(float(x) for x in lambdas)
    if source == "from_jca_map":
        vals = _scan_jca(device, input_template, lambdas, jca_grid, threads)
    elif source == "from_propagation":
        e = device.pump.energy if pump_energy is None else pump_energy
        vals = _scan_propagation(device, input_template, lambdas, e, n_steps, n_points, window,
                                 threads)
    else:
        raise ValueError("source must be from_jca_map or from_propagation")
    return VisibilityScan(device.config.lambda_i, tuple(zip(lambdas, vals)), source)


def _crossing(l0, v0, l1, v1, thr):
    return l0 + (thr - v0) * (l1 - l0) / (v1 - v0)


def homogenization_interval(scan, threshold):
    """(lo, hi, lo_open, hi_open) of the contiguous region around the reference
    where V >= threshold, with linear interpolation at the crossings [um]."""
    lam, v = scan.lambdas, scan.values
    if lam.size == 0:
        raise ThresholdNotCrossed("empty scan", open_end="both")
    r = int(np.argmin(np.abs(lam - scan.reference_lambda)))
    if v[r] < threshold:
        raise ThresholdNotCrossed("visibility at the reference is below the threshold",
                                  open_end="both")
    lo_open = hi_open = True
    lo, hi = lam[0], lam[-1]
    for k in range(r, 0, -1):
        if v[k - 1] < threshold:
            lo, lo_open = _crossing(lam[k - 1], v[k - 1], lam[k], v[k], threshold), False
            break
    for k in range(r, lam.size - 1):
        if v[k + 1] < threshold:
            hi, hi_open = _crossing(lam[k], v[k], lam[k + 1], v[k + 1], threshold), False
            break
    return float(lo), float(hi), lo_open, hi_open


def homogenization_bandwidth(scan, threshold, strict=False):
    """Width [nm] of the region around the reference with V >= threshold.

    If the scan never drops below the threshold on a side the width runs to
    the scan end; with ``strict`` that raises ThresholdNotCrossed instead.
    """
    lo, hi, lo_open, hi_open = homogenization_interval(scan, threshold)
    if strict and (lo_open or hi_open):
        end = "both" if lo_open and hi_open else "low" if lo_open else "high"
        raise ThresholdNotCrossed(
            f"visibility stays above {threshold} up to the {end} end of the scan", open_end=end
        )
    return (hi - lo) * 1e3
