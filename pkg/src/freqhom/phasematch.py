"""Wave-vector mismatch, phase-matching function and operating-point solvers.

Three fields take part in difference-frequency generation: the input
(frequency w_i), the output (w_o) and the pump (w_p = w_i - w_o).  A
configuration is "group-velocity matched" when the input and pump travel
with the same group velocity; the phase-matching function then lies parallel
to the input-frequency axis and every input frequency within the pump band is
mapped onto the same output band.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as C_LIGHT
from scipy.optimize import brentq

from . import dispersion as disp
from .errors import DegenerateDenominator, NoBracket, NonpositivePumpFrequency

DK_TOL = 1.0  # 1/m
GVM_TOL = 1e-15  # s/m
ANGLE_STEP = 0.5  # deg, coarse bracketing grid
LAMBDA_SCAN_POINTS = 241
ENERGY_REL_TOL = 1e-9
POLARIZATION_COMBOS = tuple("".join(p) for p in itertools.product("oe", repeat=3) if "".join(p) != "ooo")


def pump_wavelength(lambda_i, lambda_o):
    """Pump carrier wavelength [um] fixed by energy conservation."""
    inv = 1.0 / lambda_i - 1.0 / lambda_o
    if np.any(np.asarray(inv) <= 0):
        raise NonpositivePumpFrequency("input must have a higher frequency than the output")
    return 1.0 / inv


@dataclass(frozen=True)
class InteractionConfig:
    """Crystal, geometry and carrier wavelengths of one DFG device.

    Wavelengths are in micrometers, ``length`` in meters and the optional
    ``poling_period`` in micrometers.
    """

    crystal: disp.CrystalModel
    input: disp.OpticalAxisSpec
    output: disp.OpticalAxisSpec
    pump: disp.OpticalAxisSpec
    lambda_i: float
    lambda_o: float
    lambda_p: float
    length: float
    poling_period: float | None = None
    qpm_order: int = 1

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("crystal length must be positive")
        if self.poling_period is not None and not self.poling_period > 0:
            raise ValueError("poling period must be positive")
        if self.qpm_order % 2 != 1:  # also true for negative odd orders
            raise ValueError("QPM order must be an odd integer")
        lhs = 1.0 / self.lambda_p
        rhs = 1.0 / self.lambda_i - 1.0 / self.lambda_o
        if rhs <= 0:
            raise NonpositivePumpFrequency("input must have a higher frequency than the output")
        if abs(lhs - rhs) > ENERGY_REL_TOL * abs(rhs):
            raise ValueError("carrier wavelengths violate energy conservation")

    @classmethod
    def collinear(cls, crystal, polarizations, lambda_i, lambda_o, length, *, plane=None,
                  angle=90.0, poling_period=None, qpm_order=1):
        """Build a config from a polarization string such as ``"ooe"`` (input, output, pump)."""
        specs = [disp.axis_spec_in_plane(p, plane, angle) for p in polarizations]
        return cls(crystal, *specs, lambda_i=lambda_i, lambda_o=lambda_o,
                   lambda_p=pump_wavelength(lambda_i, lambda_o), length=length,
                   poling_period=poling_period, qpm_order=qpm_order)

    @property
    def omega_i(self):
        return float(disp.omega_from_wavelength(self.lambda_i))

    @property
    def omega_o(self):
        return float(disp.omega_from_wavelength(self.lambda_o))

    @property
    def omega_p(self):
        return self.omega_i - self.omega_o

    @property
    def grating_k(self):
        if self.poling_period is None:
            return 0.0
        return self.qpm_order * 2 * np.pi / (self.poling_period * 1e-6)


def delta_k(config, omega_i, omega_o):
    """k_i - k_o - k_p - grating, evaluated with the full dispersion [1/m]."""
    omega_i = np.asarray(omega_i, dtype=float)
    omega_o = np.asarray(omega_o, dtype=float)
    omega_p = omega_i - omega_o
    if np.any(omega_p <= 0):
        raise NonpositivePumpFrequency("omega_i - omega_o must be positive")
    cr = config.crystal
    return (disp.wavenumber(cr, config.input, omega_i)
            - disp.wavenumber(cr, config.output, omega_o)
            - disp.wavenumber(cr, config.pump, omega_p)
            - config.grating_k)


def delta_k0(config):
    return float(delta_k(config, config.omega_i, config.omega_o))


def inverse_group_velocities(config):
    """(v_i^-1, v_o^-1, v_p^-1) at the carriers [s/m]."""
    cr = config.crystal
    return (float(disp.group_velocity_inverse(cr, config.input, config.lambda_i)),
            float(disp.group_velocity_inverse(cr, config.output, config.lambda_o)),
            float(disp.group_velocity_inverse(cr, config.pump, config.lambda_p)))


def delta_k_linearized(config, Omega_i, Omega_o):
    """First-order expansion of the mismatch about the carriers."""
    vi, vo, vp = inverse_group_velocities(config)
    return delta_k0(config) + (vi - vp) * np.asarray(Omega_i) + (vp - vo) * np.asarray(Omega_o)


def pmf(config, omega_i, omega_o):
    """Unnormalized phase-matching function sinc(dk L / 2)."""
    dk = delta_k(config, omega_i, omega_o)
    # np.sinc(x) = sin(pi x)/(pi x)
    return np.sinc(dk * config.length / (2 * np.pi))


def pmf_angle_from_velocities(vi_inv, vo_inv, vp_inv):
    num = vi_inv - vp_inv
    den = vp_inv - vo_inv
    if abs(den) < 1e-18:
        raise DegenerateDenominator("v_p^-1 - v_o^-1 vanishes; the PMF is vertical (+-90 deg)")
    return float(np.degrees(np.arctan(num / den)))


def pmf_angle(config):
    """Tilt of the PMF ridge relative to the input-frequency axis, in degrees."""
    return pmf_angle_from_velocities(*inverse_group_velocities(config))


def qpm_period(config, order=1):
    """Poling period [um] cancelling the bulk carrier mismatch of ``config``."""
    bare = InteractionConfig(config.crystal, config.input, config.output, config.pump,
                             config.lambda_i, config.lambda_o, config.lambda_p, config.length)
    dk = delta_k0(bare)
    if dk == 0:
        raise ValueError("bulk mismatch is zero; no grating needed")
    return abs(order) * 2 * np.pi / abs(dk) * 1e6


def qpm_order_sign(config, order=1):
    """Signed order such that the grating term cancels the bulk mismatch.

    The grating enters as ``- order * 2 pi / period``; a negative odd order
    stands for a grating vector pointing the other way.
    """
    bare = InteractionConfig(config.crystal, config.input, config.output, config.pump,
                             config.lambda_i, config.lambda_o, config.lambda_p, config.length)
    return int(np.sign(delta_k0(bare))) * abs(order)


# --- carrier phase matching -------------------------------------------------------


@dataclass(frozen=True)
class PhaseMatchAngle:
    angle: float  # free angle of the plane [deg]
    theta: float
    phi: float
    lambda_p: float
    dk0: float


def _dk0_vec(crystal, pols, plane, angle, lam_i, lam_o):
    """Carrier mismatch broadcast over angle and input wavelength [1/m]."""
    lam_p = 1.0 / (1.0 / lam_i - 1.0 / lam_o)
    ni = disp.directional_index(crystal, pols[0], plane, angle, lam_i)
    no = disp.directional_index(crystal, pols[1], plane, angle, lam_o)
    npump = disp.directional_index(crystal, pols[2], plane, angle, lam_p)
    return 2 * np.pi * 1e6 * (ni / lam_i - no / lam_o - npump / lam_p)


def _angle_grid(step=ANGLE_STEP):
    return np.linspace(0.0, 90.0, int(round(90.0 / step)) + 1)


def _bracket_indices(values):
    s = np.sign(values)
    return np.nonzero(s[..., :-1] * s[..., 1:] <= 0)


def carrier_angles(crystal, polarizations, plane, lambda_i, lambda_o, step=ANGLE_STEP):
    """All phase-matching angles in [0, 90] for one input wavelength, ascending."""
    pols = tuple(polarizations)
    grid = _angle_grid(step)
    vals = _dk0_vec(crystal, pols, plane, grid, lambda_i, lambda_o)
    roots = []
    for k in _bracket_indices(vals)[0]:
        a, b = grid[k], grid[k + 1]
        if vals[k] == 0:
            root = a
        elif vals[k + 1] == 0:
            continue  # picked up as the left end of the next interval
        else:
            f = lambda t: float(_dk0_vec(crystal, pols, plane, t, lambda_i, lambda_o))  # noqa: E731
            root = brentq(f, a, b, xtol=1e-13, rtol=1e-15, maxiter=200)
        roots.append(root)
    return roots


def solve_carrier_phasematch(crystal, polarizations, lambda_i, lambda_o, plane=None, branch=0):
    """Angle giving zero carrier mismatch for a collinear birefringent interaction.

    ``branch`` selects among several roots (ascending angle).  Raises NoBracket
    when Delta k0 does not change sign on [0, 90] degrees.
    """
    disp.check_validity(crystal, [lambda_i, lambda_o, pump_wavelength(lambda_i, lambda_o)])
    roots = carrier_angles(crystal, polarizations, plane, lambda_i, lambda_o)
    if len(roots) <= branch:
        raise NoBracket(
            f"{crystal.name} {polarizations} {plane or ''}: no phase-matching angle for "
            f"lambda_i={lambda_i:.6g} um, lambda_o={lambda_o:.6g} um"
        )
    angle = roots[branch]
    spec = disp.axis_spec_in_plane("o", plane, angle)
    lam_p = pump_wavelength(lambda_i, lambda_o)
    dk = float(_dk0_vec(crystal, tuple(polarizations), plane, angle, lambda_i, lambda_o))
    if abs(dk) >= DK_TOL:
        raise NoBracket(f"angle solve stalled with residual {dk:.3g} 1/m")
    return PhaseMatchAngle(angle, spec.theta, spec.phi, lam_p, dk)


# --- group-velocity matching ------------------------------------------------------


@dataclass(frozen=True)
class GVMSolution:
    crystal: str
    citation: str
    lambda_i: float
    lambda_o: float
    lambda_p: float
    theta: float
    phi: float
    principal_plane: str | None
    polarizations: str
    dk0_residual: float
    gvm_residual: float
    poling_period: float | None = None
    crystal_key: str = ""
    qpm_order: int = 1

    @property
    def angle(self):
        return self.phi if self.principal_plane == "XY" else self.theta

    def config(self, crystal, length):
        """InteractionConfig at this operating point."""
        return InteractionConfig.collinear(
            crystal, self.polarizations, self.lambda_i, self.lambda_o, length,
            plane=self.principal_plane, angle=self.angle, poling_period=self.poling_period,
            qpm_order=self.qpm_order,
        )

    def as_row(self):
        return {
            "crystal": self.crystal,
            "crystal_key": self.crystal_key,
            "lambda_i_nm": self.lambda_i * 1e3,
            "lambda_o_nm": self.lambda_o * 1e3,
            "lambda_p_nm": self.lambda_p * 1e3,
            "theta_deg": self.theta,
            "phi_deg": self.phi,
            "plane": self.principal_plane or "",
            "polarizations": self.polarizations,
            "poling_period_um": "" if self.poling_period is None else self.poling_period,
            "qpm_order": "" if self.poling_period is None else self.qpm_order,
            "dk0_residual_per_m": self.dk0_residual,
            "gvm_residual_s_per_m": self.gvm_residual,
            "citation": self.citation,
        }


def _vinv(crystal, pol, plane, angle, lam):
    spec = disp.axis_spec_in_plane(pol, plane, angle)
    return float(disp.group_velocity_inverse(crystal, spec, lam))


def _input_scan_range(crystal, lambda_o, margin=1e-3):
    lo, hi = crystal.validity
    if not lo < lambda_o < hi:
        raise NoBracket(f"output wavelength {lambda_o} um outside {crystal.name} validity")
    a = lo + margin
    b = min(lambda_o, 1.0 / (1.0 / (hi - margin) + 1.0 / lambda_o)) - margin
    if not a < b:
        raise NoBracket(f"{crystal.name}: no admissible input wavelengths")
    return a, b


def _gvm_residual_scan(crystal, pols, plane, lambda_o, lam_grid, fixed_angle):
    """Per-branch GVM residual on a grid of input wavelengths (nan where undefined)."""
    if fixed_angle is not None:
        angles = np.full((1, lam_grid.size), float(fixed_angle))
    else:
        grid = _angle_grid()
        vals = _dk0_vec(crystal, pols, plane, grid[None, :], lam_grid[:, None], lambda_o)
        rows, cols = _bracket_indices(vals)
        nbranch = np.bincount(rows, minlength=lam_grid.size).max() if rows.size else 0
        angles = np.full((nbranch, lam_grid.size), np.nan)
        seen = np.zeros(lam_grid.size, dtype=int)
        for r, k in zip(rows, cols):
            if vals[r, k + 1] == 0 and k + 1 < grid.size - 1:
                continue
            # vectorized refinement is not needed for a sign test; linear estimate suffices
            v0, v1 = vals[r, k], vals[r, k + 1]
            t = grid[k] if v0 == v1 else grid[k] + (grid[k + 1] - grid[k]) * v0 / (v0 - v1)
            angles[seen[r], r] = t
            seen[r] += 1
    lam_p = 1.0 / (1.0 / lam_grid - 1.0 / lambda_o)
    res = np.full(angles.shape, np.nan)
    for b in range(angles.shape[0]):
        ok = np.isfinite(angles[b])
        if not ok.any():
            continue
        a = angles[b, ok]
        gi = _group_index_vec(crystal, pols[0], plane, a, lam_grid[ok])
        gp = _group_index_vec(crystal, pols[2], plane, a, lam_p[ok])
        res[b, ok] = (gi - gp) / C_LIGHT
    return res


def _group_index_vec(crystal, pol, plane, angle, lam):
    geo = disp._resolve_geometry(crystal, disp.axis_spec_in_plane(pol, plane, 45.0))
    if geo[0] == "principal":
        n, dn, _ = disp._n_from_n2(*crystal.axes[geo[1]].n2_derivatives(lam))
    else:
        n, dn, _ = disp._ellipse_derivatives(crystal, geo[1], geo[2], angle, lam)
    return n - lam * dn


def _make_solution(crystal, pols, plane, lambda_i, lambda_o, angle, poling_period=None,
                   qpm_order=1):
    spec = disp.axis_spec_in_plane("o", plane, angle)
    lam_p = pump_wavelength(lambda_i, lambda_o)
    dk = float(_dk0_vec(crystal, pols, plane, angle, lambda_i, lambda_o))
    if poling_period is not None:
        dk -= qpm_order * 2 * np.pi / (poling_period * 1e-6)
    gvm = _vinv(crystal, pols[0], plane, angle, lambda_i) - _vinv(crystal, pols[2], plane, angle, lam_p)
    return GVMSolution(
        crystal=crystal.name, citation=crystal.citation, lambda_i=float(lambda_i),
        lambda_o=float(lambda_o), lambda_p=float(lam_p), theta=float(spec.theta),
        phi=float(spec.phi), principal_plane=plane, polarizations="".join(pols),
        dk0_residual=dk, gvm_residual=gvm, poling_period=poling_period, crystal_key=crystal.key,
        qpm_order=qpm_order,
    )


def solve_gvm_operating_points(crystal, polarizations, lambda_o, plane=None, *,
                               fixed_angle=None, qpm_order=1, lambda_i_range=None,
                               n_scan=LAMBDA_SCAN_POINTS):
    """Every input wavelength where input and pump group velocities coincide.

    With ``fixed_angle`` None the angle is re-solved for zero carrier mismatch
    at each trial input wavelength.  With a fixed angle the mismatch is
    instead cancelled by a poling grating whose period is returned on the
    solution.  Results are sorted by input wavelength.
    """
    pols = tuple(polarizations)
    if len(pols) != 3 or any(p not in "oe" for p in pols):
        raise ValueError("polarizations must be a 3-letter string of 'o'/'e'")
    a, b = lambda_i_range if lambda_i_range is not None else _input_scan_range(crystal, lambda_o)
    lam_grid = np.linspace(a, b, n_scan)
    res = _gvm_residual_scan(crystal, pols, plane, lambda_o, lam_grid, fixed_angle)
    sols = []
    for br in range(res.shape[0]):
        r = res[br]
        for k in range(lam_grid.size - 1):
            if not (np.isfinite(r[k]) and np.isfinite(r[k + 1])) or r[k] * r[k + 1] > 0:
                continue
            sol = _refine_gvm(crystal, pols, plane, lambda_o, lam_grid[k], lam_grid[k + 1],
                              br, fixed_angle, qpm_order)
            if sol is not None:
                sols.append(sol)
    sols.sort(key=lambda s: (s.lambda_i, s.theta, s.phi))
    return sols


def _refine_gvm(crystal, pols, plane, lambda_o, a, b, branch, fixed_angle, qpm_order):
    def angle_at(li):
        if fixed_angle is not None:
            return float(fixed_angle)
        return solve_carrier_phasematch(crystal, pols, li, lambda_o, plane, branch).angle

    def resid(li):
        ang = angle_at(li)
        return _vinv(crystal, pols[0], plane, ang, li) - _vinv(crystal, pols[2], plane,
                                                              ang, pump_wavelength(li, lambda_o))

    try:
        ra, rb = resid(a), resid(b)
        if ra * rb > 0:
            return None
        li = a if ra == 0 else b if rb == 0 else brentq(resid, a, b, xtol=1e-14, rtol=1e-15, maxiter=200)
        ang = angle_at(li)
    except NoBracket:
        return None  # the angle branch vanished inside the interval
    period = None
    if fixed_angle is not None:
        bare = float(_dk0_vec(crystal, pols, plane, ang, li, lambda_o))
        if bare == 0:
            return None
        qpm_order = int(np.sign(bare)) * abs(qpm_order)
        period = abs(qpm_order) * 2 * np.pi / abs(bare) * 1e6
    sol = _make_solution(crystal, pols, plane, li, lambda_o, ang, period, qpm_order)
    if abs(sol.dk0_residual) >= DK_TOL or abs(sol.gvm_residual) >= GVM_TOL:
        return None
    return sol


def solve_gvm_operating_point(crystal, polarizations, lambda_o, plane=None, *, near=None, **kw):
    """Single GVM operating point.

    If several exist, the one closest to ``near`` (input wavelength, um) is
    returned, else the shortest-wavelength one.  Raises NoBracket if none.
    """
    sols = solve_gvm_operating_points(crystal, polarizations, lambda_o, plane, **kw)
    if not sols:
        raise NoBracket(
            f"{crystal.name} {''.join(polarizations)} {plane or ''}: input and pump group "
            "velocities never coincide in the scanned range"
        )
    if near is None:
        return sols[0]
    return min(sols, key=lambda s: abs(s.lambda_i - near))


# --- table enumeration ------------------------------------------------------------


@dataclass(frozen=True)
class GVMTable:
    rows: tuple
    failures: tuple  # (crystal key, plane, polarizations, reason)


def _planes(crystal):
    return ("XZ", "YZ", "XY") if crystal.is_biaxial else (None,)


def _combos(crystals):
    for key, cr in crystals.items():
        for plane in _planes(cr):
            for pols in POLARIZATION_COMBOS:
                yield key, cr, plane, pols


def _run_combo(args):
    key, cr, plane, pols, lambda_o = args
    try:
        sols = solve_gvm_operating_points(cr, pols, lambda_o, plane)
    except NoBracket as exc:
        return key, plane, pols, [], str(exc)
    return key, plane, pols, sols, "" if sols else "no group-velocity match"


def gvm_table(lambda_o, crystals, threads=1):
    """Enumerate polarization/plane combinations and collect all GVM points.

    ``crystals`` maps a key to a CrystalModel (ordering is preserved).  Output
    order is independent of ``threads``.
    """
    jobs = [(k, cr, pl, p, lambda_o) for k, cr, pl, p in _combos(crystals)]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_combo, jobs))
    else:
        results = [_run_combo(j) for j in jobs]
    rows, failures = [], []
    for key, plane, pols, sols, reason in results:
        rows.extend(sols)
        if reason:
            failures.append((key, plane or "", pols, reason))
    return GVMTable(tuple(rows), tuple(failures))
