"""Command-line front end.

Every subcommand reads an optional JSON config (validated before any
computation, unknown keys rejected), computes in memory, checks its
invariant gates and only then writes its files into ``--out``.  Files are
written to temporary names and renamed into place; ``manifest.json`` goes
last and records the resolved config, toolkit version, wall-clock time and
a SHA-256 per data file.

Exit codes: 0 success, 2 invalid config, 3 failed invariant gate,
4 any other toolkit error (no solution, grid too coarse, ...).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import __version__
from . import dispersion as disp
from . import jca
from . import metrics
from . import phasematch as pm
from . import propagation as pr
from . import svg
from .errors import ComputeFailed, ConfigInvalid, FreqhomError, ThresholdNotCrossed

EXIT_OK, EXIT_CONFIG, EXIT_GATE, EXIT_ERROR = 0, 2, 3, 4

MANLEY_ROWE_GATE = 1e-3
NORM_GATE = 1e-10
KAPPA_SUM_GATE = 1e-9
RECONSTRUCTION_GATE = 1e-8
PS2 = 1e-24  # s^2 per ps^2
# peak power that makes the reference device convert a 1-nm input with 46.6%
# efficiency behind a pump chirped to 10 ps (see efficiency-scan calibration)
DEFAULT_PEAK_POWER_W = 195.0


# --- configs ----------------------------------------------------------------------


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DeviceModel(_Strict):
    crystal: str = "ktp_kato2002"
    polarizations: str = Field("ooe", pattern="^[oe]{3}$")
    plane: Optional[Literal["XZ", "YZ", "XY"]] = "XZ"
    lambda_o_nm: float = Field(1550.0, gt=0)
    length_mm: float = Field(jca.REFERENCE_LENGTH * 1e3, gt=0)
    # a fixed direction selects quasi-phase matching; null solves the angle instead
    fixed_angle_deg: Optional[float] = Field(90.0, ge=0, le=90)
    near_lambda_i_nm: Optional[float] = Field(None, gt=0)
    pump_fwhm_nm: float = Field(jca.REFERENCE_PUMP_FWHM_NM, gt=0)
    sigma_pump_um: float = Field(jca.REFERENCE_SIGMA_PUMP * 1e6, gt=0)
    sigma_input_um: Optional[float] = Field(None, gt=0)
    sigma_output_um: Optional[float] = Field(None, gt=0)
    d_eff_pm_per_v: float = Field(jca.REFERENCE_D_EFF * 1e12, gt=0)


class InputModel(_Strict):
    fwhm_nm: float = Field(1.0, gt=0)
    lambda_nm: Optional[float] = Field(None, gt=0)  # default: the matched input wavelength
    single_photon: bool = True
    energy_j: float = Field(0.0, ge=0)

    @model_validator(mode="after")
    def _energy(self):
        if not self.single_photon and self.energy_j <= 0:
            raise ValueError("energy_j must be positive unless single_photon is set")
        return self


class NumericsModel(_Strict):
    n_steps: int = Field(pr.DEFAULT_STEPS, ge=1)
    n_points: int = Field(pr.DEFAULT_POINTS, ge=16)
    window_ps: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _pow2(self):
        if self.n_points & (self.n_points - 1):
            raise ValueError("n_points must be a power of two")
        return self


class GvmSearchConfig(_Strict):
    lambda_o_nm: float = Field(1550.0, gt=0)
    crystals: Optional[List[str]] = None  # keys or JSON paths; default: whole database


class PmTableConfig(_Strict):
    crystal: str = "bbo_tamosauskas2018"
    polarizations: str = Field("eoe", pattern="^[oe]{3}$")
    plane: Optional[Literal["XZ", "YZ", "XY"]] = None
    lambda_o_nm: float = Field(1550.0, gt=0)
    lambda_i_nm: List[float] = Field(default_factory=lambda: [float(x) for x in range(850, 951, 10)])
    branch: int = Field(0, ge=0)


class JcaConfig(_Strict):
    device: DeviceModel = DeviceModel()
    grid_points: int = Field(1024, ge=16)
    export_points: int = Field(256, ge=2)

    @model_validator(mode="after")
    def _sizes(self):
        for v in (self.grid_points, self.export_points):
            if v & (v - 1):
                raise ValueError("grid_points and export_points must be powers of two")
        if self.export_points > self.grid_points:
            raise ValueError("export_points cannot exceed grid_points")
        return self


class _PumpDrive(_Strict):
    pump_energy_j: Optional[float] = Field(None, gt=0)
    pump_peak_power_w: Optional[float] = Field(None, gt=0)
    pump_gdd_ps2: float = Field(0.0, ge=0)

    @model_validator(mode="after")
    def _one_drive(self):
        if self.pump_energy_j is not None and self.pump_peak_power_w is not None:
            raise ValueError("give pump_energy_j or pump_peak_power_w, not both")
        return self

    def energy(self, device):
        gdd = self.pump_gdd_ps2 * PS2
        if self.pump_energy_j is not None:
            return self.pump_energy_j
        power = DEFAULT_PEAK_POWER_W if self.pump_peak_power_w is None else self.pump_peak_power_w
        return pr.energy_at_peak_power(device.pump, power, gdd)


class PropagateConfig(_PumpDrive):
    device: DeviceModel = DeviceModel()
    input: InputModel = InputModel()
    numerics: NumericsModel = NumericsModel()


class VisibilityScanConfig(_PumpDrive):
    device: DeviceModel = DeviceModel()
    input: InputModel = InputModel()
    offsets_nm: Optional[List[float]] = None  # relative to the matched input wavelength
    lambda_i_nm: Optional[List[float]] = None  # absolute carriers; overrides offsets_nm
    sources: List[Literal["from_jca_map", "from_propagation"]] = ["from_jca_map"]
    grid_points: int = Field(1024, ge=16)
    numerics: NumericsModel = NumericsModel()

    def carriers_um(self, lambda_ref_um):
        if self.lambda_i_nm is not None:
            return [x * 1e-3 for x in self.lambda_i_nm]
        offs = self.offsets_nm if self.offsets_nm is not None else [float(k) for k in range(-20, 21)]
        return [lambda_ref_um + x * 1e-3 for x in offs]


class CalibrationModel(_Strict):
    target_efficiency: float = Field(0.466, gt=0, lt=0.99)
    input_fwhm_nm: float = Field(1.0, gt=0)
    pump_duration_ps: float = Field(10.0, gt=0)


class EfficiencyScanConfig(_Strict):
    device: DeviceModel = DeviceModel()
    input_bandwidths_nm: List[float] = [0.1, 1.0, 5.0]
    # pump stretched to these FWHM durations; a transform-limited point is added
    pump_durations_ps: Optional[List[float]] = [0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0]
    include_transform_limited: bool = True
    gdd_ps2: Optional[List[float]] = None  # explicit GDD list; overrides pump_durations_ps
    pump_peak_power_w: Optional[float] = Field(None, gt=0)  # skips calibration when set
    calibration: CalibrationModel = CalibrationModel()
    numerics: NumericsModel = NumericsModel()

    @model_validator(mode="after")
    def _bandwidths(self):
        if any(b <= 0 for b in self.input_bandwidths_nm):
            raise ValueError("input bandwidths must be positive")
        if self.gdd_ps2 is not None and any(g < 0 for g in self.gdd_ps2):
            raise ValueError("gdd_ps2 entries must be non-negative")
        return self


CONFIGS = {
    "gvm-search": GvmSearchConfig,
    "pm-table": PmTableConfig,
    "jca": JcaConfig,
    "propagate": PropagateConfig,
    "visibility-scan": VisibilityScanConfig,
    "efficiency-scan": EfficiencyScanConfig,
}


def load_config(command, path=None):
    """Validate a JSON config file (or the defaults) for ``command``."""
    model = CONFIGS[command]
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise ConfigInvalid(f"invalid {command} config:\n{exc}") from exc


# --- model construction -----------------------------------------------------------


def resolve_crystal(ref):
    """A database key (looked up in the crystal directory) or a JSON file path."""
    if ref.endswith(".json") or os.sep in ref:
        return disp.load_crystal(ref)
    try:
        return disp.get_crystal(ref)
    except KeyError as exc:
        raise ConfigInvalid(f"unknown crystal {ref!r} in {disp.crystal_dir()}") from exc


def build_device(model: DeviceModel):
    crystal = resolve_crystal(model.crystal)
    um = 1e-6
    return jca.build_device(
        crystal, model.polarizations, model.plane, model.lambda_o_nm * 1e-3,
        model.length_mm * 1e-3, fixed_angle=model.fixed_angle_deg,
        near=None if model.near_lambda_i_nm is None else model.near_lambda_i_nm * 1e-3,
        pump_fwhm_nm=model.pump_fwhm_nm, sigma_pump=model.sigma_pump_um * um,
        sigma_input=None if model.sigma_input_um is None else model.sigma_input_um * um,
        sigma_output=None if model.sigma_output_um is None else model.sigma_output_um * um,
        d_eff=model.d_eff_pm_per_v * 1e-12,
    )


def build_input(model: InputModel, device, fwhm_nm=None):
    lam = device.config.lambda_i if model.lambda_nm is None else model.lambda_nm * 1e-3
    return jca.FieldSpec("input", lam, model.fwhm_nm if fwhm_nm is None else fwhm_nm,
                         energy=model.energy_j, single_photon=model.single_photon)


def _scenario_kw(num: NumericsModel):
    return dict(n_steps=num.n_steps, n_points=num.n_points,
                window=None if num.window_ps is None else num.window_ps * 1e-12)


def _operating_point(device):
    row = device.solution.as_row()
    return {k: row[k] for k in ("crystal", "lambda_i_nm", "lambda_o_nm", "lambda_p_nm",
                                "theta_deg", "phi_deg", "plane", "polarizations",
                                "poling_period_um", "qpm_order")}


# --- serialization ----------------------------------------------------------------


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if np.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def json_text(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


class Outputs:
    """Files staged in memory and published atomically once every gate passed."""

    def __init__(self):
        self.files = {}
        self.gates = {}

    def add(self, name, text):
        self.files[name] = text.encode("utf-8")

    def gate(self, name, value, limit):
        """Record ``value`` and fail the run if it reaches ``limit``."""
        ok = bool(np.isfinite(value) and value < limit)
        self.gates[name] = {"value": float(value), "limit": limit, "passed": ok}
        if not ok:
            raise ComputeFailed(name, f"{value:.3g} exceeds the limit {limit:g}")

    def publish(self, out_dir, manifest):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        manifest["files"] = {
            name: {"sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)}
            for name, data in sorted(self.files.items())
        }
        manifest["gates"] = self.gates
        items = sorted(self.files.items()) + [("manifest.json", json_text(manifest).encode())]
        tag = f".tmp-{os.getpid()}"
        temps = []
        try:
            for name, data in items:
                tmp = out / (name + tag)
                with open(tmp, "wb") as fh:
                    fh.write(data)
                    fh.flush()
                    os.fsync(fh.fileno())
                temps.append((tmp, out / name))
        except BaseException:
            for tmp, _ in temps:
                tmp.unlink(missing_ok=True)
            (out / (items[len(temps)][0] + tag)).unlink(missing_ok=True)
            raise
        # data files first, manifest last
        for tmp, final in temps:
            os.replace(tmp, final)
        return [final for _, final in temps]


# --- commands ---------------------------------------------------------------------


def cmd_gvm_search(cfg: GvmSearchConfig, out: Outputs, threads=1):
    if cfg.crystals is None:
        crystals = disp.load_database()
    else:
        crystals = {}
        for ref in cfg.crystals:
            cr = resolve_crystal(ref)
            crystals[Path(ref).stem if ref.endswith(".json") else ref] = cr
    table = pm.gvm_table(cfg.lambda_o_nm * 1e-3, crystals, threads=threads)
    header = ["crystal", "crystal_key", "lambda_i_nm", "lambda_o_nm", "lambda_p_nm", "theta_deg",
              "phi_deg", "plane", "polarizations", "poling_period_um", "qpm_order",
              "dk0_residual_per_m", "gvm_residual_s_per_m", "citation"]
    out.add("gvm_table.csv", csv_text(header, ([r.as_row()[h] for h in header] for r in table.rows)))
    out.add("failures.csv", csv_text(["crystal_key", "plane", "polarizations", "reason"],
                                     table.failures))
    out.add("summary.json", json_text({"lambda_o_nm": cfg.lambda_o_nm, "n_rows": len(table.rows),
                                       "n_failures": len(table.failures),
                                       "crystals": list(crystals)}))


def cmd_pm_table(cfg: PmTableConfig, out: Outputs, threads=1):
    crystal = resolve_crystal(cfg.crystal)
    lam_o = cfg.lambda_o_nm * 1e-3
    header = ["lambda_i_nm", "lambda_o_nm", "lambda_p_nm", "theta_deg", "phi_deg",
              "dk0_residual_per_m", "pmf_angle_deg", "gvm_input_pump_s_per_m", "status"]

    def row(lam_i_nm):
        lam_i = lam_i_nm * 1e-3
        lam_p = pm.pump_wavelength(lam_i, lam_o) if lam_i < lam_o else float("nan")
        try:
            sol = pm.solve_carrier_phasematch(crystal, cfg.polarizations, lam_i, lam_o,
                                              cfg.plane, branch=cfg.branch)
        except (FreqhomError, ValueError) as exc:
            return [lam_i_nm, cfg.lambda_o_nm, lam_p * 1e3, None, None, None, None, None,
                    type(exc).__name__]
        conf = pm.InteractionConfig.collinear(crystal, cfg.polarizations, lam_i, lam_o, 1e-3,
                                              plane=cfg.plane, angle=sol.angle)
        vi, vo, vp = pm.inverse_group_velocities(conf)
        try:
            theta_pmf = pm.pmf_angle(conf)
        except FreqhomError:
            theta_pmf = 90.0
        return [lam_i_nm, cfg.lambda_o_nm, sol.lambda_p * 1e3, sol.theta, sol.phi, sol.dk0,
                theta_pmf, vi - vp, "ok"]

    rows = metrics._map(row, sorted(cfg.lambda_i_nm), threads)
    out.add("pm_table.csv", csv_text(header, rows))
    out.add("summary.json", json_text({"crystal": crystal.name, "n_rows": len(rows),
                                       "n_matched": sum(r[-1] == "ok" for r in rows)}))


def _jca_gates(out, grid, schmidt):
    out.gate("jca_unit_norm", abs(grid.norm - 1.0), NORM_GATE)
    out.gate("kappa_sum", abs(float(np.sum(schmidt.kappa_all)) - 1.0), KAPPA_SUM_GATE)
    out.gate("schmidt_reconstruction", schmidt.reconstruction_error(grid), RECONSTRUCTION_GATE)


def cmd_jca(cfg: JcaConfig, out: Outputs, threads=1):
    device = build_device(cfg.device)
    gi, go = jca.default_grids(device.config, device.pump, cfg.grid_points)
    grid = jca.build_jca(device.config, device.pump, gi, go)
    schmidt = jca.schmidt_decompose(grid)
    _jca_gates(out, grid, schmidt)

    stride = cfg.grid_points // cfg.export_points
    mag = np.abs(grid.f[::stride, ::stride])
    lam_i = gi.wavelengths_nm[::stride]
    lam_o = go.wavelengths_nm[::stride]
    header = ["lambda_i_nm\\lambda_o_nm"] + [repr(float(x)) for x in lam_o]
    out.add("jca_magnitude.csv", csv_text(header, ([li] + list(r) for li, r in zip(lam_i, mag))))
    out.add("jca_magnitude.svg", svg.heatmap(mag, lam_o, lam_i, title="|JCA|",
                                             xlabel="output wavelength (nm)",
                                             ylabel="input wavelength (nm)"))
    kappa = schmidt.kappa
    out.add("schmidt.csv", csv_text(["n", "kappa"], ((n, k) for n, k in enumerate(kappa))))
    out.add("summary.json", json_text({
        "schmidt_number": schmidt.K,
        "purity": schmidt.purity,
        "n_modes": schmidt.n_modes,
        "pmf_norm": grid.pmf_norm,
        "grid_points": cfg.grid_points,
        "input_span_nm": [float(gi.wavelengths_nm.min()), float(gi.wavelengths_nm.max())],
        "output_span_nm": [float(go.wavelengths_nm.min()), float(go.wavelengths_nm.max())],
        "operating_point": _operating_point(device),
    }))


def _spectrum_rows(state, which, floor=1e-12):
    lam, _, inten = pr.output_spectrum(state, which)
    peak = float(np.max(inten)) if inten.size else 0.0
    if peak <= 0:
        return []
    keep = np.nonzero(inten >= floor * peak)[0]
    sl = slice(keep[0], keep[-1] + 1)
    return list(zip(lam[sl], inten[sl] / peak))


def cmd_propagate(cfg: PropagateConfig, out: Outputs, threads=1):
    device = build_device(cfg.device)
    spec = build_input(cfg.input, device)
    sc = pr.Scenario(device, spec, **_scenario_kw(cfg.numerics))
    energy = cfg.energy(device)
    s0, s1, diag = sc.run(energy, cfg.pump_gdd_ps2 * PS2)
    out.gate("manley_rowe", diag.manley_rowe, MANLEY_ROWE_GATE)
    header = ["wavelength_nm", "intensity_normalized"]
    out.add("spectrum_output.csv", csv_text(header, _spectrum_rows(s1, "o")))
    out.add("spectrum_input_initial.csv", csv_text(header, _spectrum_rows(s0, "i")))
    out.add("spectrum_input_final.csv", csv_text(header, _spectrum_rows(s1, "i")))
    n0, n1 = s0.photon_numbers(), s1.photon_numbers()
    out.add("diagnostics.json", json_text({
        "efficiency": pr.conversion_efficiency(s0, s1),
        "photon_numbers_initial": dict(zip(("input", "output", "pump"), n0)),
        "photon_numbers_final": dict(zip(("input", "output", "pump"), n1)),
        "manley_rowe_output": diag.manley_rowe_o,
        "manley_rowe_pump": diag.manley_rowe_p,
        "linear_drift": dict(zip(("input", "output", "pump"), diag.linear_drift)),
        "pump_energy_j": energy,
        "pump_gdd_ps2": cfg.pump_gdd_ps2,
        "time_grid": {"n_points": s0.grid.n_points, "dt_s": s0.grid.dt},
        "operating_point": _operating_point(device),
    }))


def cmd_visibility_scan(cfg: VisibilityScanConfig, out: Outputs, threads=1):
    device = build_device(cfg.device)
    # the pump energy only matters for the split-step source
    device = jca.Device(device.config,
                        device.pump.with_(energy=cfg.energy(device), gdd=cfg.pump_gdd_ps2 * PS2),
                        device.solution, device.sigmas, device.d_eff)
    template = build_input(cfg.input, device)
    lambdas = cfg.carriers_um(device.config.lambda_i)
    rows, summary, curves = [], {}, []
    for source in cfg.sources:
        kw = {}
        if source == "from_jca_map":
            gi, go = jca.default_grids(device.config, device.pump, cfg.grid_points)
            grid = jca.build_jca(device.config, device.pump, gi, go)
            out.gate("jca_unit_norm", abs(grid.norm - 1.0), NORM_GATE)
            kw = dict(jca_grid=grid)
        else:
            kw = dict(pump_energy=device.pump.energy, **_scenario_kw(cfg.numerics))
        scan = metrics.visibility_scan(device, template, lambdas, source, threads=threads, **kw)
        rows += [(lam * 1e3, v, source) for lam, v in scan.points]
        summary[source] = {f"{thr:g}": _bandwidth(scan, thr) for thr in (0.9, 0.99)}
        curves.append((source, scan.lambdas * 1e3, scan.values))
    out.add("visibility.csv", csv_text(["lambda_i0_nm", "visibility", "source"], rows))
    out.add("visibility.svg", svg.line_plot(curves, title="visibility vs input carrier",
                                            xlabel="input carrier wavelength (nm)",
                                            ylabel="visibility", ylim=(0.0, 1.0),
                                            hlines=(0.9, 0.99)))
    out.add("summary.json", json_text({
        "reference_lambda_nm": device.config.lambda_i * 1e3,
        "input_fwhm_nm": cfg.input.fwhm_nm,
        "bandwidth_nm": summary,
        "operating_point": _operating_point(device),
    }))


def _bandwidth(scan, threshold):
    try:
        lo, hi, lo_open, hi_open = metrics.homogenization_interval(scan, threshold)
    except ThresholdNotCrossed as exc:
        return {"width_nm": None, "open_end": exc.open_end}
    return {"width_nm": (hi - lo) * 1e3, "low_nm": lo * 1e3, "high_nm": hi * 1e3,
            "low_open": lo_open, "high_open": hi_open}


def _gdd_list(cfg: EfficiencyScanConfig, pump):
    if cfg.gdd_ps2 is not None:
        return [g * PS2 for g in cfg.gdd_ps2]
    gdds = [0.0] if cfg.include_transform_limited else []
    tl = pr.tl_duration(pump)
    for d in cfg.pump_durations_ps or []:
        if d * 1e-12 < tl:
            raise ConfigInvalid(f"pump duration {d} ps is below the transform limit "
                                f"{tl * 1e12:.4g} ps")
        gdds.append(pr.gdd_for_duration(pump, d * 1e-12))
    return gdds


def cmd_efficiency_scan(cfg: EfficiencyScanConfig, out: Outputs, threads=1):
    device = build_device(cfg.device)
    gdds = _gdd_list(cfg, device.pump)
    kw = _scenario_kw(cfg.numerics)
    cal = {}
    if cfg.pump_peak_power_w is not None:
        power = cfg.pump_peak_power_w
    else:
        c = cfg.calibration
        spec = jca.FieldSpec("input", device.config.lambda_i, c.input_fwhm_nm, single_photon=True)
        power, energy, gdd = pr.calibrate_peak_power(device, spec, c.target_efficiency,
                                                     c.pump_duration_ps * 1e-12, **kw)
        cal = {"pump_energy_j": energy, "pump_gdd_ps2": gdd / PS2, **c.model_dump()}

    def sweep(bw):
        spec = jca.FieldSpec("input", device.config.lambda_i, bw, single_photon=True)
        return pr.efficiency_sweep(device, spec, power, gdds, **kw)

    results = metrics._map(sweep, list(cfg.input_bandwidths_nm), threads)
    rows, curves, worst = [], [], 0.0
    for bw, res in zip(cfg.input_bandwidths_nm, results):
        for g, (eta, diag) in zip(gdds, res):
            rows.append((g / PS2, bw, eta))
            worst = max(worst, diag.manley_rowe)
        curves.append((f"{bw:g} nm", [g / PS2 for g in gdds], [e for e, _ in res]))
    out.gate("manley_rowe", worst, MANLEY_ROWE_GATE)
    out.add("efficiency.csv", csv_text(["gdd_ps2", "input_bandwidth_nm", "efficiency"], rows))
    out.add("efficiency.svg", svg.line_plot(curves, title="efficiency vs pump GDD",
                                            xlabel="pump GDD (ps^2)", ylabel="efficiency"))
    out.add("summary.json", json_text({
        "pump_peak_power_w": power,
        "calibration": cal or None,
        "pump_durations_fwhm_ps": [pr.chirped_duration(device.pump, g) * 1e12 for g in gdds],
        "operating_point": _operating_point(device),
    }))


COMMANDS = {
    "gvm-search": cmd_gvm_search,
    "pm-table": cmd_pm_table,
    "jca": cmd_jca,
    "propagate": cmd_propagate,
    "visibility-scan": cmd_visibility_scan,
    "efficiency-scan": cmd_efficiency_scan,
}


# --- entry point ------------------------------------------------------------------


def run(command, config=None, out_dir=".", threads=1):
    """Run one command; ``config`` is a validated model, a dict or None."""
    model = CONFIGS[command]
    if config is None:
        config = model()
    elif isinstance(config, dict):
        try:
            config = model.model_validate(config)
        except ValidationError as exc:
            raise ConfigInvalid(f"invalid {command} config:\n{exc}") from exc
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    outputs = Outputs()
    COMMANDS[command](config, outputs, threads=threads)
    manifest = {
        "command": command,
        "toolkit_version": __version__,
        "config": config.model_dump(mode="json"),
        "crystal_dir": str(disp.crystal_dir()),
        "started_utc": started.isoformat(timespec="seconds"),
        "wall_clock_s": round(time.perf_counter() - t0, 3),
    }
    return outputs.publish(out_dir, manifest)


def build_parser():
    p = argparse.ArgumentParser(
        prog="freqhom",
        description="Group-velocity-matched frequency conversion: phase matching, "
                    "JCA/Schmidt analysis, pulse propagation and visibility scans.",
        epilog=f"Crystal files are read from ${disp.CRYSTAL_DIR_ENV} when it is set.",
    )
    p.add_argument("--config", type=Path, help="JSON config for the command (defaults if omitted)")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="worker threads for scans (default: logical CPU count)")
    p.add_argument("command", choices=sorted(COMMANDS))
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        config = load_config(args.command, args.config)
        files = run(args.command, config, args.out, args.threads)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ComputeFailed as exc:
        print(f"invariant gate failed: {exc}", file=sys.stderr)
        return EXIT_GATE
    except FreqhomError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
