import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freqhom import dispersion as disp
from freqhom.errors import InvalidGeometry, OutOfValidityRange

# hand evaluation of the published two-pole KTP fit and the Kato BBO fit
KTP_NZ_1550 = 1.8157731108173114
BBO_NO_800 = 1.660553524880645
BBO_NE_800 = 1.5444203018104292


@pytest.fixture(scope="module")
def ktp():
    return disp.get_crystal("ktp_kato2002")


@pytest.fixture(scope="module")
def bbo():
    return disp.get_crystal("bbo_kato1986")


def test_ktp_z_index_matches_hand_evaluation(ktp):
    spec = disp.axis_spec_in_plane("e", "XZ", 90.0)
    assert disp.refractive_index(ktp, spec, 1.55) == pytest.approx(KTP_NZ_1550, abs=1e-12)


def test_bbo_principal_indices(bbo):
    o = disp.OpticalAxisSpec("o", theta=30.0)
    e90 = disp.OpticalAxisSpec("e", theta=90.0)
    e0 = disp.OpticalAxisSpec("e", theta=0.0)
    assert disp.refractive_index(bbo, o, 0.8) == pytest.approx(BBO_NO_800, abs=1e-12)
    assert disp.refractive_index(bbo, e90, 0.8) == pytest.approx(BBO_NE_800, abs=1e-12)
    # along the optic axis both polarizations see n_o
    assert disp.refractive_index(bbo, e0, 0.8) == pytest.approx(BBO_NO_800, abs=1e-12)


def test_index_ellipse_at_45_degrees(bbo):
    spec = disp.OpticalAxisSpec("e", theta=45.0)
    expect = (0.5 / BBO_NO_800**2 + 0.5 / BBO_NE_800**2) ** -0.5
    assert disp.refractive_index(bbo, spec, 0.8) == pytest.approx(expect, abs=1e-12)


def test_every_bundled_crystal_loads_with_axis_ordering():
    db = disp.load_database()
    assert len(db) == 7
    for key, cr in db.items():
        lo, hi = cr.validity
        lam = np.linspace(lo, hi, 7)[1:-1]
        if cr.is_biaxial:
            nx, ny, nz = (cr.principal_index(a, lam) for a in "XYZ")
            assert np.all(nx < ny) and np.all(ny < nz), key


def test_biaxial_plane_assignment(ktp):
    lam = 1.0
    nx, ny, nz = (float(ktp.principal_index(a, lam)) for a in "XYZ")
    assert float(disp.directional_index(ktp, "o", "XZ", 30.0, lam)) == pytest.approx(ny)
    assert float(disp.directional_index(ktp, "o", "YZ", 30.0, lam)) == pytest.approx(nx)
    assert float(disp.directional_index(ktp, "o", "XY", 30.0, lam)) == pytest.approx(nz)
    assert float(disp.directional_index(ktp, "e", "XZ", 90.0, lam)) == pytest.approx(nz)
    assert float(disp.directional_index(ktp, "e", "YZ", 0.0, lam)) == pytest.approx(ny)
    assert float(disp.directional_index(ktp, "e", "XY", 90.0, lam)) == pytest.approx(nx)


@pytest.mark.parametrize("key,pol,plane,angle", [
    ("ktp_kato2002", "e", "XZ", 37.0),
    ("lbo_kato1994", "e", "YZ", 15.0),
    ("lbo_kato1994", "e", "XY", 60.0),
    ("bbo_tamosauskas2018", "e", None, 26.0),
    ("mglnb_zelmon1997", "o", None, 0.0),
    ("liio3_kato1985", "e", None, 30.0),
])
def test_analytic_derivatives_match_finite_differences(key, pol, plane, angle):
    cr = disp.get_crystal(key)
    spec = disp.axis_spec_in_plane(pol, plane, angle)
    lam = np.array([0.6, 0.9, 1.3])
    ng_a = disp.group_index(cr, spec, lam)
    ng_f = disp.group_index(cr, spec, lam, method="fd")
    np.testing.assert_allclose(ng_a, ng_f, rtol=1e-8)
    b2_a = disp.gvd(cr, spec, lam)
    b2_f = disp.gvd(cr, spec, lam, method="fd")
    np.testing.assert_allclose(b2_a, b2_f, rtol=1e-4)


def test_group_index_equals_d_k_d_omega(ktp):
    spec = disp.axis_spec_in_plane("o", "XZ", 90.0)
    w = float(disp.omega_from_wavelength(0.55))
    dw = w * 1e-6
    dkdw = (disp.wavenumber(ktp, spec, w + dw) - disp.wavenumber(ktp, spec, w - dw)) / (2 * dw)
    assert float(disp.group_velocity_inverse(ktp, spec, 0.55)) == pytest.approx(float(dkdw), rel=1e-7)


def test_constant_model_is_dispersionless():
    cr = disp.constant_model(1.7)
    spec = disp.OpticalAxisSpec("o")
    assert float(disp.group_index(cr, spec, 1.0)) == pytest.approx(1.7)
    assert float(disp.gvd(cr, spec, 1.0)) == 0.0


def test_out_of_validity_range_raises(ktp):
    spec = disp.axis_spec_in_plane("o", "XZ", 90.0)
    with pytest.raises(OutOfValidityRange):
        disp.refractive_index(ktp, spec, 0.3)
    # the strict check applies to derivative evaluation at the endpoints
    with pytest.raises(OutOfValidityRange):
        disp.group_index(ktp, spec, ktp.validity[1])


def test_invalid_geometry(ktp, bbo):
    with pytest.raises(InvalidGeometry):
        disp.refractive_index(ktp, disp.OpticalAxisSpec("o", theta=45.0), 1.0)  # no plane
    with pytest.raises(InvalidGeometry):
        disp.refractive_index(bbo, disp.OpticalAxisSpec("o", principal_plane="XZ"), 1.0)
    with pytest.raises(InvalidGeometry):
        disp.OpticalAxisSpec("x")
    with pytest.raises(InvalidGeometry):
        disp.refractive_index(ktp, disp.OpticalAxisSpec("e", theta=45.0, phi=10.0,
                                                        principal_plane="XZ"), 1.0)


def test_sellmeier_variant_matches_its_canonical_form():
    form = disp.SellmeierForm("sellmeier", (0.9, 0.01, 0.8, 100.0))
    lam = np.array([0.5, 1.0, 2.0])
    x = lam**2
    expect = 1 + 0.9 * x / (x - 0.01) + 0.8 * x / (x - 100.0)
    np.testing.assert_allclose(form.n2_derivatives(lam)[0], expect, rtol=1e-14)


def test_tabulated_variant_reproduces_smooth_data():
    lam = np.linspace(0.5, 2.0, 40)
    n = 1.5 + 0.01 / lam**2
    form = disp.SellmeierForm("tabulated", validity=(0.5, 2.0), table=tuple(zip(lam, n)))
    cr = disp.CrystalModel("tab", "uniaxial", {"o": form, "e": form})
    spec = disp.OpticalAxisSpec("o")
    assert float(disp.refractive_index(cr, spec, 1.1)) == pytest.approx(1.5 + 0.01 / 1.21, rel=1e-6)
    ng = float(disp.group_index(cr, spec, 1.1))
    assert ng == pytest.approx(1.5 + 0.03 / 1.21, rel=1e-4)


def test_crystal_file_rejects_unknown_keys(tmp_path):
    d = json.loads((disp.crystal_dir() / "bbo_kato1986.json").read_text())
    d["extra"] = 1
    with pytest.raises(ValueError):
        disp.crystal_from_dict(d)


def test_crystal_dir_env_override(tmp_path, monkeypatch):
    src = disp.crystal_dir() / "bbo_kato1986.json"
    (tmp_path / "mybbo.json").write_text(src.read_text())
    monkeypatch.setenv(disp.CRYSTAL_DIR_ENV, str(tmp_path))
    assert list(disp.load_database()) == ["mybbo"]
    assert disp.get_crystal("mybbo").name == "BBO"


@settings(max_examples=60, deadline=None)
@given(theta=st.floats(0.0, 90.0), lam=st.floats(0.3, 2.5))
def test_extraordinary_index_lies_between_principal_values(bbo, theta, lam):
    n = float(disp.refractive_index(bbo, disp.OpticalAxisSpec("e", theta=theta), lam))
    no = float(bbo.principal_index("o", lam))
    ne = float(bbo.principal_index("e", lam))
    assert min(no, ne) - 1e-12 <= n <= max(no, ne) + 1e-12


@settings(max_examples=40, deadline=None)
@given(lam=st.floats(0.45, 3.0))
def test_normal_dispersion_in_transparency_window(ktp, lam):
    # index falls with wavelength away from the absorption edges
    spec = disp.axis_spec_in_plane("e", "XZ", 60.0)
    _, dn, _ = disp.index_derivatives(ktp, spec, lam)
    assert dn < 0
