"""Refractive index, group index and GVD of birefringent crystals.

Wavelengths are vacuum wavelengths in micrometers throughout this module.
Every Sellmeier variant is reduced to

    n^2(x) = A + sum_k B_k / (x - C_k) + sum_m P_m x^m,      x = lambda^2

so first and second wavelength derivatives are available in closed form.
Tabulated indices are interpolated with a cubic spline, whose derivatives are
also exact (for the spline).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.constants import c as C_LIGHT
from scipy.interpolate import CubicSpline

from .errors import InvalidGeometry, OutOfValidityRange

FD_STEP_UM = 1e-4
CRYSTAL_DIR_ENV = "FREQHOM_CRYSTAL_DIR"

VARIANTS = ("constant", "kato", "two_pole", "sellmeier", "tabulated")
UNIAXIAL_AXES = ("o", "e")
BIAXIAL_AXES = ("X", "Y", "Z")


def omega_from_wavelength(lam_um):
    """Angular frequency [rad/s] of a vacuum wavelength in micrometers."""
    return 2 * np.pi * C_LIGHT / (np.asarray(lam_um) * 1e-6)


def wavelength_from_omega(omega):
    """Vacuum wavelength in micrometers of an angular frequency [rad/s]."""
    return 2 * np.pi * C_LIGHT / np.asarray(omega) * 1e6


def _canonical(variant, coefficients):
    """Map a variant's coefficient list to (A, poles, poly)."""
    c = list(coefficients)
    if variant == "constant":
        (n0,) = c
        return n0 * n0, (), ()
    if variant == "kato":
        # A + B/(x - C) - D x + E x^2 + F x^3; trailing terms optional
        if not 3 <= len(c) <= 6:
            raise ValueError("kato variant takes 3 to 6 coefficients")
        c = c + [0.0] * (6 - len(c))
        a, b, cc, d, e, f = c
        return a, ((b, cc),), (-d, e, f)
    if variant == "two_pole":
        a, b, cc, d, e = c
        return a, ((b, cc), (d, e)), ()
    if variant == "sellmeier":
        # 1 + sum B x/(x - C)  ==  1 + sum B + sum B C/(x - C)
        if len(c) % 2:
            raise ValueError("sellmeier variant takes (B, C) pairs")
        pairs = list(zip(c[0::2], c[1::2]))
        return 1.0 + sum(b for b, _ in pairs), tuple((b * cc, cc) for b, cc in pairs), ()
    raise ValueError(f"unknown Sellmeier variant {variant!r}")


@dataclass(frozen=True)
class SellmeierForm:
    """One principal-axis dispersion fit.

    For ``variant == "tabulated"`` the coefficients are unused and ``table``
    holds ``(wavelength_um, n)`` pairs.
    """

    variant: str
    coefficients: tuple = ()
    validity: tuple = (0.0, np.inf)
    table: tuple | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown Sellmeier variant {self.variant!r}")
        lo, hi = self.validity
        if not lo < hi:
            raise ValueError("validity interval must satisfy lo < hi")
        if self.variant == "tabulated":
            if self.table is None or len(self.table) < 4:
                raise ValueError("tabulated form needs at least 4 (wavelength, n) pairs")
        else:
            _canonical(self.variant, self.coefficients)

    @cached_property
    def _spline(self):
        tab = np.asarray(self.table, dtype=float)
        order = np.argsort(tab[:, 0])
        return CubicSpline(tab[order, 0], tab[order, 1])

    def n2_derivatives(self, lam):
        """Return (n^2, d(n^2)/dlam, d2(n^2)/dlam2) at wavelength(s) ``lam`` [um]."""
        lam = np.asarray(lam, dtype=float)
        if self.variant == "tabulated":
            s = self._spline
            n, dn, d2n = s(lam), s(lam, 1), s(lam, 2)
            return n * n, 2 * n * dn, 2 * dn * dn + 2 * n * d2n
        a, poles, poly = _canonical(self.variant, self.coefficients)
        x = lam * lam
        g = np.full_like(x, a)
        g1 = np.zeros_like(x)
        g2 = np.zeros_like(x)
        for b, cc in poles:
            d = x - cc
            g = g + b / d
            g1 = g1 - b / d**2
            g2 = g2 + 2 * b / d**3
        for m, p in enumerate(poly, start=1):
            if p == 0.0:
                continue
            g = g + p * x**m
            g1 = g1 + m * p * x ** (m - 1)
            if m >= 2:
                g2 = g2 + m * (m - 1) * p * x ** (m - 2)
        # chain rule from x = lam^2
        return g, 2 * lam * g1, 2 * g1 + 4 * x * g2


@dataclass(frozen=True)
class CrystalModel:
    name: str
    symmetry: str
    axes: dict
    citation: str = ""
    key: str = ""

    def __post_init__(self):
        if self.symmetry not in ("uniaxial", "biaxial"):
            raise ValueError(f"symmetry must be uniaxial or biaxial, got {self.symmetry!r}")
        need = UNIAXIAL_AXES if self.symmetry == "uniaxial" else BIAXIAL_AXES
        if set(self.axes) != set(need):
            raise ValueError(f"{self.symmetry} crystal needs axes {need}, got {tuple(self.axes)}")

    @property
    def validity(self):
        lo = max(f.validity[0] for f in self.axes.values())
        hi = min(f.validity[1] for f in self.axes.values())
        return lo, hi

    @property
    def is_biaxial(self):
        return self.symmetry == "biaxial"

    def principal_index(self, axis, lam):
        check_validity(self, lam)
        n2, _, _ = self.axes[axis].n2_derivatives(lam)
        return np.sqrt(n2)

    def check_invariants(self, samples=10):
        """Raise ValueError if indices are unphysical or biaxial ordering is violated."""
        lo, hi = self.validity
        hi_eff = min(hi, 50.0)
        lam = np.linspace(lo, hi_eff, samples + 2)[1:-1]
        idx = {}
        for name, form in self.axes.items():
            n2, _, _ = form.n2_derivatives(lam)
            if not np.all(np.isfinite(n2)) or np.any(n2 <= 1.0):
                raise ValueError(f"{self.name}: axis {name} has n <= 1 or non-finite n inside validity")
            idx[name] = np.sqrt(n2)
        if self.is_biaxial and not (np.all(idx["X"] < idx["Y"]) and np.all(idx["Y"] < idx["Z"])):
            raise ValueError(f"{self.name}: principal axes must satisfy n_X < n_Y < n_Z")


@dataclass(frozen=True)
class OpticalAxisSpec:
    """Polarization plus propagation direction.

    ``theta`` is measured from Z, ``phi`` from X towards Y (degrees).  For
    biaxial crystals the direction must lie in ``principal_plane``: XZ means
    phi = 0, YZ means phi = 90, XY means theta = 90.
    """

    polarization: str
    theta: float = 90.0
    phi: float = 0.0
    principal_plane: str | None = None

    def __post_init__(self):
        if self.polarization not in ("o", "e"):
            raise InvalidGeometry(f"polarization must be 'o' or 'e', got {self.polarization!r}")
        if not 0.0 <= self.theta <= 90.0 or not 0.0 <= self.phi <= 90.0:
            raise InvalidGeometry("theta and phi must lie in [0, 90] degrees")
        if self.principal_plane not in (None, "XY", "XZ", "YZ"):
            raise InvalidGeometry(f"unknown principal plane {self.principal_plane!r}")


def check_validity(model, lam, strict=False):
    lo, hi = model.validity
    lam = np.asarray(lam, dtype=float)
    bad = (lam <= lo) | (lam >= hi) if strict else (lam < lo) | (lam > hi)
    if np.any(bad) or np.any(~np.isfinite(lam)):
        worst = lam[bad].flat[0] if np.any(bad) else np.nan
        raise OutOfValidityRange(
            f"{model.name}: wavelength {worst:.6g} um outside fitted range [{lo}, {hi}] um"
        )


def _resolve_geometry(model, spec):
    """Return ('principal', axis) or ('ellipse', axis_at_0, axis_at_90, angle_deg)."""
    if not model.is_biaxial:
        if spec.principal_plane is not None:
            raise InvalidGeometry("principal_plane is only meaningful for biaxial crystals")
        if spec.polarization == "o":
            return ("principal", "o")
        return ("ellipse", "o", "e", spec.theta)
    plane = spec.principal_plane
    if plane is None:
        raise InvalidGeometry(f"{model.name} is biaxial: principal_plane is required")
    if plane == "XZ":
        if abs(spec.phi) > 1e-9:
            raise InvalidGeometry("XZ plane requires phi = 0")
        return ("principal", "Y") if spec.polarization == "o" else ("ellipse", "X", "Z", spec.theta)
    if plane == "YZ":
        if abs(spec.phi - 90.0) > 1e-9:
            raise InvalidGeometry("YZ plane requires phi = 90")
        return ("principal", "X") if spec.polarization == "o" else ("ellipse", "Y", "Z", spec.theta)
    if abs(spec.theta - 90.0) > 1e-9:
        raise InvalidGeometry("XY plane requires theta = 90")
    return ("principal", "Z") if spec.polarization == "o" else ("ellipse", "Y", "X", spec.phi)


def _n_from_n2(n2, d1, d2):
    n = np.sqrt(n2)
    dn = d1 / (2 * n)
    d2n = (d2 - 2 * dn * dn) / (2 * n)
    return n, dn, d2n


def _ellipse_derivatives(model, ax0, ax90, angle_deg, lam):
    a = np.radians(angle_deg)
    c2, s2 = np.cos(a) ** 2, np.sin(a) ** 2
    F0, F0p, F0pp = model.axes[ax0].n2_derivatives(lam)
    F9, F9p, F9pp = model.axes[ax90].n2_derivatives(lam)
    # u = 1/n^2 = cos^2/F0 + sin^2/F90
    u = c2 / F0 + s2 / F9
    up = -c2 * F0p / F0**2 - s2 * F9p / F9**2
    upp = c2 * (2 * F0p**2 / F0**3 - F0pp / F0**2) + s2 * (2 * F9p**2 / F9**3 - F9pp / F9**2)
    n = u**-0.5
    dn = -0.5 * u**-1.5 * up
    d2n = 0.75 * u**-2.5 * up**2 - 0.5 * u**-1.5 * upp
    return n, dn, d2n


def index_derivatives(model, spec, lam):
    """Return (n, dn/dlam, d2n/dlam2) for the given polarization and direction.

    Derivatives are per micrometer.  The direction is held fixed while
    differentiating.
    """
    check_validity(model, lam)
    lam = np.asarray(lam, dtype=float)
    geo = _resolve_geometry(model, spec)
    if geo[0] == "principal":
        return _n_from_n2(*model.axes[geo[1]].n2_derivatives(lam))
    _, ax0, ax90, angle = geo
    return _ellipse_derivatives(model, ax0, ax90, angle, lam)


def axis_spec_in_plane(polarization, plane, angle):
    """Build an OpticalAxisSpec from the single free angle of a plane.

    The free angle is theta for uniaxial crystals and the XZ/YZ planes, phi
    for the XY plane.
    """
    if plane is None:
        return OpticalAxisSpec(polarization, theta=angle, phi=0.0)
    if plane == "XZ":
        return OpticalAxisSpec(polarization, theta=angle, phi=0.0, principal_plane="XZ")
    if plane == "YZ":
        return OpticalAxisSpec(polarization, theta=angle, phi=90.0, principal_plane="YZ")
    if plane == "XY":
        return OpticalAxisSpec(polarization, theta=90.0, phi=angle, principal_plane="XY")
    raise InvalidGeometry(f"unknown principal plane {plane!r}")


def free_angle(spec):
    return spec.phi if spec.principal_plane == "XY" else spec.theta


def directional_index(model, polarization, plane, angle, lam):
    """Refractive index with the free angle broadcast against ``lam``.

    Vectorized companion of :func:`refractive_index` used by angle scans.
    """
    check_validity(model, lam)
    geo = _resolve_geometry(model, axis_spec_in_plane(polarization, plane, 45.0))
    lam = np.asarray(lam, dtype=float)
    if geo[0] == "principal":
        n2, _, _ = model.axes[geo[1]].n2_derivatives(lam)
        return np.sqrt(n2) + 0 * np.asarray(angle)
    return _ellipse_derivatives(model, geo[1], geo[2], angle, lam)[0]


def refractive_index(model, spec, lam):
    return index_derivatives(model, spec, lam)[0]


def _fd_derivatives(model, spec, lam, h=FD_STEP_UM):
    lam = np.asarray(lam, dtype=float)
    n0 = refractive_index(model, spec, lam)
    np_ = refractive_index(model, spec, lam + h)
    nm = refractive_index(model, spec, lam - h)
    return n0, (np_ - nm) / (2 * h), (np_ - 2 * n0 + nm) / (h * h)


def _derivs(model, spec, lam, method):
    check_validity(model, lam, strict=True)
    if method == "analytic":
        return index_derivatives(model, spec, lam)
    if method == "fd":
        return _fd_derivatives(model, spec, lam)
    raise ValueError("method must be 'analytic' or 'fd'")


def group_index(model, spec, lam, method="analytic"):
    """n_g = n - lam dn/dlam."""
    n, dn, _ = _derivs(model, spec, lam, method)
    return n - np.asarray(lam) * dn


def group_velocity_inverse(model, spec, lam, method="analytic"):
    """dk/domega at the given wavelength [s/m]."""
    return group_index(model, spec, lam, method) / C_LIGHT


def gvd(model, spec, lam, method="analytic"):
    """d2k/domega2 [s^2/m]."""
    _, _, d2n = _derivs(model, spec, lam, method)
    lam = np.asarray(lam)
    # lam^3/(2 pi c^2) d2n/dlam2 with lam in m; um^3 * um^-2 -> 1e-6
    return lam**3 * d2n * 1e-6 / (2 * np.pi * C_LIGHT**2)


def wavenumber(model, spec, omega):
    """k(omega) [1/m] for angular frequency ``omega``."""
    omega = np.asarray(omega, dtype=float)
    return refractive_index(model, spec, wavelength_from_omega(omega)) * omega / C_LIGHT


# --- data files -----------------------------------------------------------------


def _form_from_dict(d, default_validity=None):
    validity = tuple(d.get("validity", default_validity or (0.0, np.inf)))
    table = d.get("table")
    return SellmeierForm(
        variant=d["variant"],
        coefficients=tuple(d.get("coefficients", ())),
        validity=validity,
        table=tuple(map(tuple, table)) if table is not None else None,
    )


def crystal_from_dict(d, key=""):
    unknown = set(d) - {"name", "symmetry", "axes", "citation", "validity"}
    if unknown:
        raise ValueError(f"unknown keys in crystal file: {sorted(unknown)}")
    axes = {name: _form_from_dict(a, d.get("validity")) for name, a in d["axes"].items()}
    model = CrystalModel(
        name=d["name"], symmetry=d["symmetry"], axes=axes, citation=d.get("citation", ""), key=key
    )
    model.check_invariants()
    return model


def load_crystal(path):
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        return crystal_from_dict(json.load(fh), key=path.stem)


def crystal_dir():
    override = os.environ.get(CRYSTAL_DIR_ENV)
    if override:
        return Path(override)
    return Path(__file__).parent / "data" / "crystals"


def load_database(directory=None):
    """Load every ``*.json`` crystal file, keyed by file stem, in sorted order."""
    directory = Path(directory) if directory is not None else crystal_dir()
    return {p.stem: load_crystal(p) for p in sorted(directory.glob("*.json"))}


def get_crystal(key, directory=None):
    directory = Path(directory) if directory is not None else crystal_dir()
    path = directory / f"{key}.json"
    if not path.exists():
        raise KeyError(f"no crystal file {path}")
    return load_crystal(path)


def constant_model(n0, symmetry="uniaxial", name="constant", ne=None, nxyz=None):
    """Dispersionless model; handy for tests and vacuum (n0 = 1)."""
    if symmetry == "uniaxial":
        axes = {
            "o": SellmeierForm("constant", (n0,)),
            "e": SellmeierForm("constant", (ne if ne is not None else n0,)),
        }
    else:
        nx, ny, nz = nxyz
        axes = {k: SellmeierForm("constant", (v,)) for k, v in zip(BIAXIAL_AXES, (nx, ny, nz))}
    return CrystalModel(name=name, symmetry=symmetry, axes=axes, citation="synthetic")
