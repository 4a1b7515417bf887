import math

import numpy as np
import pytest

from tntsim.exceptions import NoSeparatrixError, PoleError
from tntsim.hamiltonian import PhysicalParams
from tntsim.meanfield import (
    ClassicalPoint,
    classical_energy,
    classical_rhs,
    classify_region,
    find_fixed_points,
    integrate_classical,
    jacobian,
    portrait_rows,
    saddle_point,
    write_portrait_csv,
)

TWO_PI = 2 * np.pi


def params_for_lambda(lam, omega_hz=19.0):
    """Fixed N chi chosen so |N chi / Omega| = lam at any N."""
    return PhysicalParams(omega=TWO_PI * omega_hz, nchi_fixed=TWO_PI * omega_hz * lam)


def test_equatorial_fixed_point_of_rhs():
    p = params_for_lambda(1.5)
    dz, dphi = classical_rhs(ClassicalPoint(0.0, 0.0), p, 500)
    assert dz == pytest.approx(0.0, abs=1e-15)
    assert dphi == pytest.approx(0.0, abs=1e-12)


def test_pure_coupling_rotation():
    p = PhysicalParams(omega=1.0, nchi_fixed=0.0)
    dz, dphi = classical_rhs(ClassicalPoint(0.0, np.pi / 2), p, 100)
    assert dz == pytest.approx(-1.0, abs=1e-15)
    assert dphi == pytest.approx(0.0, abs=1e-15)


def test_pole_errors():
    p = params_for_lambda(1.5)
    with pytest.raises(PoleError):
        classical_rhs(ClassicalPoint(1.0, 0.0), p, 100)
    with pytest.raises(PoleError):
        jacobian(ClassicalPoint(-1.0, 0.0), p, 100)


def test_rhs_is_canonical_gradient_of_energy():
    # zdot = -(2/N) dE/dphi, phidot = +(2/N) dE/dz, checked by central
    # differences at many random interior points
    rng = np.random.default_rng(4)
    p = PhysicalParams(
        omega=TWO_PI * 19, chi_coeff=TWO_PI * 1.43, delta_ext=TWO_PI * 0.7,
        delta_coeff=TWO_PI * 0.63,
    )
    n = 500
    h = 1e-6
    for _ in range(1000):
        z = rng.uniform(-0.95, 0.95)
        phi = rng.uniform(0, 2 * np.pi)
        dz, dphi = classical_rhs(ClassicalPoint(z, phi), p, n)
        de_dphi = (
            classical_energy(ClassicalPoint(z, phi + h), p, n)
            - classical_energy(ClassicalPoint(z, phi - h), p, n)
        ) / (2 * h)
        de_dz = (
            classical_energy(ClassicalPoint(z + h, phi), p, n)
            - classical_energy(ClassicalPoint(z - h, phi), p, n)
        ) / (2 * h)
        scale = max(abs(dz), abs(dphi), 1e-3)
        assert dz == pytest.approx(-2.0 / n * de_dphi, abs=2e-8 * scale * n)
        assert dphi == pytest.approx(2.0 / n * de_dz, abs=2e-8 * scale * n)


def test_derived_rhs_value_at_half_imbalance():
    # independent evaluation of the canonical equations at (z=0.5, phi=pi)
    p = params_for_lambda(1.5)
    n = 500
    dz, dphi = classical_rhs(ClassicalPoint(0.5, np.pi), p, n)
    omega = p.omega
    assert dz == pytest.approx(0.0, abs=1e-12)
    expected_dphi = 1.5 * omega * 0.5 - omega * 0.5 / math.sqrt(0.75)
    assert dphi == pytest.approx(expected_dphi, rel=1e-12)


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(12)
    p = PhysicalParams(
        omega=TWO_PI * 19, chi_coeff=TWO_PI * 1.43, delta_coeff=TWO_PI * 0.63
    )
    n = 400
    h = 1e-7
    for _ in range(25):
        z = rng.uniform(-0.9, 0.9)
        phi = rng.uniform(0, 2 * np.pi)
        jac = jacobian(ClassicalPoint(z, phi), p, n)
        fd = np.zeros((2, 2))
        for j, (dz_, dphi_) in enumerate(((h, 0.0), (0.0, h))):
            f_plus = classical_rhs(ClassicalPoint(z + dz_, phi + dphi_), p, n)
            f_minus = classical_rhs(ClassicalPoint(z - dz_, phi - dphi_), p, n)
            fd[:, j] = (np.array(f_plus) - np.array(f_minus)) / (2 * h)
        assert np.allclose(jac, fd, rtol=1e-6, atol=1e-8 * np.abs(jac).max())


def test_fixed_point_census_below_and_above_threshold():
    below = find_fixed_points(params_for_lambda(0.5), 500)
    assert len(below) == 2
    assert all(fp.stability == "center" for fp in below)

    above = find_fixed_points(params_for_lambda(1.5), 500)
    assert len(above) == 4
    saddles = [fp for fp in above if fp.stability == "saddle"]
    centers = [fp for fp in above if fp.stability == "center"]
    assert len(saddles) == 1 and len(centers) == 3
    assert saddles[0].point.z == pytest.approx(0.0, abs=1e-12)
    assert saddles[0].point.phi == pytest.approx(np.pi)
    z_star = math.sqrt(1 - 1.5**-2)
    off_eq = sorted(fp.point.z for fp in centers if abs(fp.point.z) > 0.1)
    assert off_eq == pytest.approx([-z_star, z_star], abs=1e-9)


def test_census_across_lambda_sweep():
    for lam in (0.2, 0.5, 0.9, 1.1, 1.5, 3.0):
        fps = find_fixed_points(params_for_lambda(lam), 300)
        assert len(fps) == (2 if lam < 1 else 4)


def test_bifurcation_continuity():
    # just above threshold the off-equator centers sit at z ~ sqrt(2 eps)
    for eps in (1e-3, 1e-4):
        fps = find_fixed_points(params_for_lambda(1 + eps), 300)
        zs = sorted(abs(fp.point.z) for fp in fps)
        assert zs[-1] < 2.0 * math.sqrt(2 * eps)
        assert zs[-1] > 0.0


def test_saddle_eigenvalues_closed_form():
    # +/- Omega sqrt(Lambda - 1) = +/- 2 pi x 13.435 Hz at Lambda = 1.5
    p = params_for_lambda(1.5)
    fp = saddle_point(p, 500)
    lam_rate = TWO_PI * 19.0 * math.sqrt(0.5)
    eig = sorted(e.real for e in fp.eigenvalues)
    assert eig[0] == pytest.approx(-lam_rate, rel=1e-9)
    assert eig[1] == pytest.approx(lam_rate, rel=1e-9)
    assert lam_rate == pytest.approx(TWO_PI * 13.435, rel=1e-3)
    assert all(abs(e.imag) < 1e-9 * lam_rate for e in fp.eigenvalues)


def test_detuned_roots_still_found():
    p = PhysicalParams(
        omega=TWO_PI * 19, nchi_fixed=TWO_PI * 30, delta_ext=TWO_PI * 2.0
    )
    fps = find_fixed_points(p, 500)
    assert len(fps) >= 2
    for fp in fps:
        dz, dphi = classical_rhs(fp.point, p, 500)
        assert abs(dz) < 1e-9 and abs(dphi) < 1e-6


def test_stationary_at_center():
    p = params_for_lambda(1.5)
    center = [fp for fp in find_fixed_points(p, 500) if fp.stability == "center"][0]
    traj = integrate_classical(center.point, p, 500, 50e-3, 1e-5)
    assert not traj.truncated
    assert np.max(np.abs(traj.z - center.point.z)) < 1e-9


def test_rabi_circle_and_pole_truncation():
    p = PhysicalParams(omega=TWO_PI * 19.0, nchi_fixed=0.0)
    start = ClassicalPoint(0.0, np.pi / 2)
    quarter = 0.5 * np.pi / p.omega
    traj = integrate_classical(start, p, 100, 0.8 * quarter, 1e-6)
    assert not traj.truncated
    assert np.allclose(traj.z, -np.sin(p.omega * traj.times), atol=1e-8)
    full = integrate_classical(start, p, 100, 4 * quarter, 1e-6)
    assert full.truncated  # runs into the pole at z = -1


def test_energy_conservation_along_trajectory():
    p = params_for_lambda(1.5)
    start = ClassicalPoint(0.3, 2.0)
    traj = integrate_classical(start, p, 500, 40e-3, 1e-6)
    energies = [
        classical_energy(ClassicalPoint(z, phi), p, 500)
        for z, phi in zip(traj.z[:: len(traj.z) // 20], traj.phi[:: len(traj.phi) // 20])
    ]
    e0 = energies[0]
    scale = max(abs(e0), 0.5 * 500 * abs(p.omega))
    assert max(abs(e - e0) for e in energies) / scale < 1e-8


def test_saddle_displacement_grows_at_instability_rate():
    p = params_for_lambda(1.5)
    n = 500
    fp = saddle_point(p, n)
    rate = max(e.real for e in fp.eigenvalues)
    # unstable eigenvector of the (z, phi) linearization: phi = sqrt(L-1) z
    eps = 1e-3
    direction = np.array([1.0, math.sqrt(0.5)])
    direction /= np.linalg.norm(direction)
    start = ClassicalPoint(
        fp.point.z + eps * direction[0], fp.point.phi + eps * direction[1]
    )
    t_lin = 1.0 / rate  # stay well inside the linear regime
    traj = integrate_classical(start, p, n, t_lin, 1e-6)
    sep = np.hypot(traj.z - fp.point.z, traj.phi - fp.point.phi)
    growth = sep[-1] / sep[0]
    assert growth == pytest.approx(math.exp(rate * traj.times[-1]), rel=0.05)


def test_region_classification():
    p = params_for_lambda(1.5)
    n = 500
    saddle = saddle_point(p, n).point
    assert classify_region(saddle, p, n) == "libration"
    assert classify_region(ClassicalPoint(0.0, 0.0), p, n) == "libration"
    assert classify_region(ClassicalPoint(0.5, np.pi), p, n) == "inside-separatrix-upper"
    assert classify_region(ClassicalPoint(-0.5, np.pi), p, n) == "inside-separatrix-lower"
    with pytest.raises(NoSeparatrixError):
        classify_region(ClassicalPoint(0.2, 0.1), params_for_lambda(0.5), n)


def test_near_pole_orbit_at_moderate_lambda_is_libration():
    # for 1 < Lambda < 2 the separatrix lobes do not reach the poles: the
    # orbit through (z = 0.99, phi = pi) has energy below the saddle energy,
    # crosses the equator, and is therefore libration-class
    p = params_for_lambda(1.5)
    n = 500
    pt = ClassicalPoint(0.99, np.pi)
    assert classify_region(pt, p, n) == "libration"
    traj = integrate_classical(pt, p, n, 0.2, 2e-6)
    assert traj.z.min() < -0.5  # the trajectory really does swing past z = 0
    # whereas a point inside the upper lobe keeps its sign
    lobe = ClassicalPoint(0.5, np.pi)
    lobe_traj = integrate_classical(lobe, p, n, 0.2, 2e-6)
    assert lobe_traj.z.min() > 0.0


def test_portrait_export(tmp_path):
    p = params_for_lambda(1.5)
    rows = portrait_rows(p, 300, n_z=7, n_phi=9)
    assert len(rows) == 7 * 9
    path = tmp_path / "portrait.csv"
    write_portrait_csv(path, p, 300, n_z=5, n_phi=5)
    text = path.read_text().splitlines()
    assert text[0] == "z,phi,dzdt,dphidt,region,energy"
    assert len(text) == 1 + 25
