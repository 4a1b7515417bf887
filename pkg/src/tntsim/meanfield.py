"""Classical (N -> infinity) phase space of the two-mode model.

Canonical pair: imbalance z = (N_up - N_down)/N and relative phase phi, with
energy per the large-N limit

    E(z, phi) = (N^2 chi / 4) z^2 - (N Omega / 2) sqrt(1 - z^2) cos(phi)
                + (N delta / 2) z

and equations of motion zdot = -(2/N) dE/dphi, phidot = (2/N) dE/dz.  For
|N chi / Omega| > 1 an equatorial saddle appears whose separatrix divides
self-trapped lobes from phase-bounded libration.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .exceptions import NoSeparatrixError, NoUnstablePointError, PoleError

__all__ = [
    "ClassicalPoint",
    "FixedPoint",
    "ClassicalTrajectory",
    "classical_energy",
    "classical_rhs",
    "jacobian",
    "find_fixed_points",
    "saddle_point",
    "integrate_classical",
    "classify_region",
    "portrait_rows",
    "write_portrait_csv",
]

_POLE_MARGIN = 1e-9


@dataclass(frozen=True)
class ClassicalPoint:
    z: float
    phi: float

    def __post_init__(self):
        if abs(self.z) > 1.0:
            raise ValueError(f"|z| = {abs(self.z)} > 1")
        object.__setattr__(self, "phi", float(self.phi) % (2.0 * math.pi))


@dataclass(frozen=True)
class FixedPoint:
    point: ClassicalPoint
    stability: str  # "center" or "saddle"
    eigenvalues: tuple


@dataclass(frozen=True)
class ClassicalTrajectory:
    times: np.ndarray
    z: np.ndarray
    phi: np.ndarray
    truncated: bool


def classical_energy(point, params, n_atoms):
    chi = params.chi_at(n_atoms)
    delta = params.delta_at(n_atoms)
    z, phi = point.z, point.phi
    return (
        0.25 * n_atoms**2 * chi * z * z
        - 0.5 * n_atoms * params.omega * math.sqrt(max(1.0 - z * z, 0.0)) * math.cos(phi)
        + 0.5 * n_atoms * delta * z
    )


def _rhs(z, phi, nchi, omega, delta):
    root = math.sqrt(1.0 - z * z)
    dz = -omega * root * math.sin(phi)
    dphi = nchi * z + omega * z * math.cos(phi) / root + delta
    return dz, dphi


def classical_rhs(point, params, n_atoms):
    """(dz/dt, dphi/dt); raises PoleError near |z| = 1 where phi degenerates."""
    if 1.0 - abs(point.z) < _POLE_MARGIN:
        raise PoleError(f"classical equations undefined at |z| = {abs(point.z)}")
    return _rhs(
        point.z,
        point.phi,
        n_atoms * params.chi_at(n_atoms),
        params.omega,
        params.delta_at(n_atoms),
    )


def jacobian(point, params, n_atoms):
    """Analytic Jacobian of (dz/dt, dphi/dt) with respect to (z, phi)."""
    if 1.0 - abs(point.z) < _POLE_MARGIN:
        raise PoleError(f"classical equations undefined at |z| = {abs(point.z)}")
    z, phi = point.z, point.phi
    nchi = n_atoms * params.chi_at(n_atoms)
    omega = params.omega
    root = math.sqrt(1.0 - z * z)
    return np.array(
        [
            [omega * z * math.sin(phi) / root, -omega * root * math.cos(phi)],
            [nchi + omega * math.cos(phi) / root**3, -omega * z * math.sin(phi) / root],
        ]
    )


def _classify(point, params, n_atoms):
    eig = np.linalg.eigvals(jacobian(point, params, n_atoms))
    scale = max(float(np.max(np.abs(eig))), 1e-30)
    if np.all(np.abs(eig.real) <= 1e-9 * scale):
        return "center", (complex(eig[0]), complex(eig[1]))
    return "saddle", (complex(eig[0]), complex(eig[1]))


def find_fixed_points(params, n_atoms, grid=4001):
    """All stationary points of the flow with |z| < 1, classified.

    zdot = 0 forces sin(phi) = 0; the remaining root condition per branch,
    N chi z +/- Omega z / sqrt(1 - z^2) + delta = 0, is bracketed on a dense
    z grid and polished by Brent's method.
    """
    if params.omega == 0.0:
        raise ValueError("fixed-point census requires Omega != 0")
    nchi = n_atoms * params.chi_at(n_atoms)
    delta = params.delta_at(n_atoms)
    zs = np.linspace(-1.0 + 1e-9, 1.0 - 1e-9, grid)
    points = []
    for phi, cosphi in ((0.0, 1.0), (math.pi, -1.0)):

        def g(z, c=cosphi):
            return nchi * z + params.omega * c * z / math.sqrt(1.0 - z * z) + delta

        vals = np.array([g(z) for z in zs])
        roots = [float(zs[i]) for i in np.flatnonzero(vals == 0.0)]
        for i in np.flatnonzero(vals[:-1] * vals[1:] < 0.0):
            roots.append(brentq(g, zs[i], zs[i + 1], xtol=1e-14, rtol=8.9e-16))
        roots.sort()
        deduped = []
        for z in roots:
            if not deduped or abs(z - deduped[-1]) > 1e-10:
                deduped.append(z)
        for z in deduped:
            pt = ClassicalPoint(z, phi)
            stability, eig = _classify(pt, params, n_atoms)
            points.append(FixedPoint(pt, stability, eig))
    return points


def saddle_point(params, n_atoms):
    """The unstable equatorial fixed point; exists only for Lambda > 1."""
    saddles = [fp for fp in find_fixed_points(params, n_atoms) if fp.stability == "saddle"]
    if not saddles:
        raise NoUnstablePointError(
            f"no saddle for Lambda = {params.lambda_at(n_atoms):g}, delta = {params.delta_at(n_atoms):g}"
        )
    return min(saddles, key=lambda fp: abs(fp.point.z))


def integrate_classical(p0, params, n_atoms, duration, dt):
    """Fixed-step RK4 path from p0; stops with a flag if it reaches a pole."""
    if 1.0 - abs(p0.z) < _POLE_MARGIN:
        raise PoleError("initial point too close to a pole")
    if dt <= 0 or duration < 0:
        raise ValueError("need dt > 0 and duration >= 0")
    nchi = n_atoms * params.chi_at(n_atoms)
    omega = params.omega
    delta = params.delta_at(n_atoms)
    n_steps = int(round(duration / dt))
    ts = np.empty(n_steps + 1)
    zs = np.empty(n_steps + 1)
    phis = np.empty(n_steps + 1)
    z, phi = p0.z, p0.phi
    ts[0], zs[0], phis[0] = 0.0, z, phi
    truncated = False
    n_done = 0
    for i in range(n_steps):
        k1z, k1p = _rhs(z, phi, nchi, omega, delta)
        z2 = z + 0.5 * dt * k1z
        if abs(z2) >= 1.0 - _POLE_MARGIN:
            truncated = True
            break
        k2z, k2p = _rhs(z2, phi + 0.5 * dt * k1p, nchi, omega, delta)
        z3 = z + 0.5 * dt * k2z
        if abs(z3) >= 1.0 - _POLE_MARGIN:
            truncated = True
            break
        k3z, k3p = _rhs(z3, phi + 0.5 * dt * k2p, nchi, omega, delta)
        z4 = z + dt * k3z
        if abs(z4) >= 1.0 - _POLE_MARGIN:
            truncated = True
            break
        k4z, k4p = _rhs(z4, phi + dt * k3p, nchi, omega, delta)
        z = z + dt / 6.0 * (k1z + 2.0 * (k2z + k3z) + k4z)
        phi = phi + dt / 6.0 * (k1p + 2.0 * (k2p + k3p) + k4p)
        if abs(z) >= 1.0 - _POLE_MARGIN:
            truncated = True
            break
        n_done = i + 1
        ts[n_done] = (i + 1) * dt
        zs[n_done] = z
        phis[n_done] = phi
    n_keep = n_done + 1
    return ClassicalTrajectory(ts[:n_keep], zs[:n_keep], phis[:n_keep], truncated)


def classify_region(point, params, n_atoms):
    """'inside-separatrix-upper' / '-lower' for self-trapped points, else
    'libration', by comparing the energy with the saddle energy.

    A trajectory can reach the equator z = 0 (and hence change the sign of z)
    exactly when its energy is on the saddle side of the separatrix; energy
    equal to the saddle energy counts as libration.
    """
    chi = params.chi_at(n_atoms)
    if abs(params.delta_at(n_atoms)) > 1e-12 * max(abs(params.omega), 1.0):
        raise ValueError("region classification implemented for delta = 0")
    if params.omega == 0.0 or params.lambda_at(n_atoms) <= 1.0:
        raise NoSeparatrixError("no separatrix for Lambda <= 1")
    saddle = saddle_point(params, n_atoms)
    e_s = classical_energy(saddle.point, params, n_atoms)
    e = classical_energy(point, params, n_atoms)
    if math.copysign(1.0, chi) * (e - e_s) > 0.0:
        return "inside-separatrix-upper" if point.z > 0 else "inside-separatrix-lower"
    return "libration"


def portrait_rows(params, n_atoms, n_z=41, n_phi=81):
    """(z, phi, dzdt, dphidt, region, energy) rows on a regular grid."""
    have_separatrix = params.omega != 0.0 and params.lambda_at(n_atoms) > 1.0
    rows = []
    for z in np.linspace(-0.999, 0.999, n_z):
        for phi in np.linspace(0.0, 2.0 * math.pi, n_phi, endpoint=False):
            pt = ClassicalPoint(float(z), float(phi))
            dz, dphi = classical_rhs(pt, params, n_atoms)
            if have_separatrix and abs(params.delta_at(n_atoms)) < 1e-12:
                region = classify_region(pt, params, n_atoms)
            else:
                region = "libration"
            rows.append((pt.z, pt.phi, dz, dphi, region, classical_energy(pt, params, n_atoms)))
    return rows


def write_portrait_csv(path, params, n_atoms, n_z=41, n_phi=81):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["z", "phi", "dzdt", "dphidt", "region", "energy"])
        for row in portrait_rows(params, n_atoms, n_z=n_z, n_phi=n_phi):
            writer.writerow([f"{row[0]:.17g}", f"{row[1]:.17g}", f"{row[2]:.17g}",
                             f"{row[3]:.17g}", row[4], f"{row[5]:.17g}"])
