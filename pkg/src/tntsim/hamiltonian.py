"""Two-mode collective-spin Hamiltonian H = chi Jz^2 - Omega Jx + delta Jz.

chi and delta carry atom-number scaling laws (chi ~ 1/sqrt(N), delta linear
in sqrt(N) around a reference atom number); Lambda = |N chi / Omega| controls
the bifurcation of the classical limit.  Evolution offers a fixed-step RK4
production path and an exact tridiagonal-diagonalization path used both for
piecewise-constant segments and as a cross-check oracle.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from . import _kernels
from .exceptions import NoUnstablePointError, StepSizeError
from .spins import SpinState, ladder_offdiag

__all__ = [
    "PhysicalParams",
    "TridiagonalHamiltonian",
    "build_hamiltonian",
    "coupling_hamiltonian",
    "evolve",
    "evolve_under",
    "unstable_phase",
    "default_dt",
]


@dataclass(frozen=True)
class PhysicalParams:
    """Angular frequencies (rad/s) and their atom-number laws.

    chi(N) = chi_coeff / sqrt(N), or nchi_fixed / N when nchi_fixed is set
    (constant twisting product, used for ideal-theory comparisons).
    delta(N) = delta_ext - delta_coeff (sqrt(N) - sqrt(n_ref)).
    """

    omega: float = 0.0
    chi_coeff: float = 0.0
    nchi_fixed: float | None = None
    delta_ext: float = 0.0
    delta_coeff: float = 0.0
    n_ref: float = 550.0

    def chi_at(self, n_atoms):
        if n_atoms < 1:
            raise ValueError("atom number must be >= 1")
        if self.nchi_fixed is not None:
            return self.nchi_fixed / n_atoms
        return self.chi_coeff / math.sqrt(n_atoms)

    def delta_at(self, n_atoms):
        if n_atoms < 1:
            raise ValueError("atom number must be >= 1")
        return self.delta_ext - self.delta_coeff * (math.sqrt(n_atoms) - math.sqrt(self.n_ref))

    def lambda_at(self, n_atoms):
        """Bifurcation parameter |N chi(N) / Omega|."""
        if self.omega == 0.0:
            raise ValueError("Lambda undefined for Omega = 0")
        return abs(n_atoms * self.chi_at(n_atoms) / self.omega)


@dataclass(frozen=True)
class TridiagonalHamiltonian:
    """Hermitian tridiagonal operator in the k basis, plus an optional
    non-negative decay diagonal D so that H_eff = H - (i/2) D."""

    n_atoms: int
    diag: np.ndarray
    off: np.ndarray
    decay: np.ndarray

    def __post_init__(self):
        for name in ("diag", "off", "decay"):
            arr = getattr(self, name)
            arr.setflags(write=False)

    def inf_norm(self):
        """Max row sum of |entries| of the Hermitian part plus decay."""
        dim = self.diag.shape[0]
        row = np.abs(self.diag) + 0.5 * np.abs(self.decay)
        if dim > 1:
            a = np.abs(self.off)
            row[:-1] += a
            row[1:] += a
        return float(row.max())

    def to_dense(self):
        h = np.diag(self.diag.astype(np.complex128) - 0.5j * self.decay)
        if self.diag.shape[0] > 1:
            h += np.diag(self.off, k=1)
            h += np.diag(np.conj(self.off), k=-1)
        return h

    def expectation(self, state):
        """<H> (Hermitian part only) for a SpinState."""
        c = state.amplitudes
        val = float(np.dot(self.diag, np.abs(c) ** 2))
        if c.shape[0] > 1:
            val += 2.0 * float(np.real(np.dot(np.conj(c[:-1]) * c[1:], self.off)))
        return val


def build_hamiltonian(params, n_atoms):
    """H = chi(N) Jz^2 - Omega Jx + delta(N) Jz as tridiagonal arrays."""
    if n_atoms < 1:
        raise ValueError("atom number must be >= 1")
    n = int(n_atoms)
    m = np.arange(n + 1) - n / 2.0
    chi = params.chi_at(n)
    delta = params.delta_at(n)
    diag = chi * m * m + delta * m
    off = (-0.5 * params.omega) * ladder_offdiag(n).astype(np.complex128)
    return TridiagonalHamiltonian(n, diag, off, np.zeros(n + 1))


def coupling_hamiltonian(params, n_atoms, omega, axis_phase=0.0):
    """Like build_hamiltonian but with coupling strength omega about the
    equatorial axis at azimuth axis_phase (0 = +x, pi/2 = +y)."""
    n = int(n_atoms)
    m = np.arange(n + 1) - n / 2.0
    diag = params.chi_at(n) * m * m + params.delta_at(n) * m
    off = (-0.5 * omega * np.exp(1j * axis_phase)) * ladder_offdiag(n)
    return TridiagonalHamiltonian(n, diag, off.astype(np.complex128), np.zeros(n + 1))


def default_dt(ham):
    """Fixed-step default: min(1 us, 0.1 / ||H||_inf)."""
    nrm = ham.inf_norm()
    if nrm <= 0.0:
        return 1e-6
    return min(1e-6, 0.1 / nrm)


def _gauged_eigh(diag, off):
    """Eigendecomposition of the Hermitian tridiagonal (diag, off).

    A diagonal gauge makes the off-diagonal real non-negative, so the solver
    only ever sees a real symmetric tridiagonal matrix.
    """
    dim = diag.shape[0]
    gauge = np.ones(dim, dtype=np.complex128)
    mag = np.abs(off)
    for k in range(dim - 1):
        gauge[k + 1] = gauge[k] * (off[k] / mag[k] if mag[k] > 0 else 1.0)
    vals, vecs = eigh_tridiagonal(diag, mag)
    return vals, vecs, gauge


def _evolve_diag(psi, diag, off, duration):
    vals, vecs, gauge = _gauged_eigh(diag, off)
    w = vecs.T @ (gauge * psi)
    w *= np.exp(-1j * vals * duration)
    return np.conj(gauge) * (vecs @ w)


def evolve_under(state, ham, duration, dt=None, method="rk4"):
    """Advance a state under a fixed TridiagonalHamiltonian for `duration`.

    method 'rk4' is the production integrator (renormalized once at the end);
    'diag' is the exact dense-free diagonalization path for time-independent
    Hermitian segments.  Norm drift of the RK4 path stays far below 1e-9/ms
    because the generator is shifted by <H> (a global phase).
    """
    if duration < 0:
        raise ValueError("duration must be >= 0")
    psi = state.amplitudes.copy()
    if duration == 0:
        return state
    if method == "diag":
        if np.any(ham.decay):
            raise ValueError("diagonalization path handles Hermitian segments only")
        out = _evolve_diag(psi, ham.diag, ham.off, duration)
        return SpinState(state.atom_count, out / np.linalg.norm(out))
    if method != "rk4":
        raise ValueError(f"unknown method {method!r}")
    if dt is None:
        dt = default_dt(ham)
    if dt <= 0:
        raise ValueError("dt must be > 0")
    nrm = ham.inf_norm()
    if nrm * dt >= 0.5:
        raise StepSizeError(
            f"dt = {dt:g} s too large for operator norm {nrm:g} rad/s",
            suggested_dt=default_dt(ham),
        )
    shift = ham.expectation(state)
    dc = (ham.diag - shift) - 0.5j * ham.decay
    off = ham.off.astype(np.complex128)
    n_full = int(duration / dt + 1e-9)
    remainder = duration - n_full * dt
    _kernels.rk4_run(dc, off, psi, dt, n_full, False)
    if remainder > 1e-15:
        _kernels.rk4_run(dc, off, psi, remainder, 1, False)
    psi /= np.linalg.norm(psi)
    return SpinState(state.atom_count, psi)


def evolve(state, params, duration, dt=None, method="rk4"):
    """Schroedinger evolution under build_hamiltonian(params, N)."""
    ham = build_hamiltonian(params, state.atom_count)
    return evolve_under(state, ham, duration, dt=dt, method=method)


def unstable_phase(params, n_atoms):
    """Equatorial azimuth of the unstable fixed point (Lambda > 1, delta = 0).

    For chi > 0, Omega > 0 under H = chi Jz^2 - Omega Jx the saddle sits at
    phi = pi; flipping the sign of either coupling mirrors it to phi = 0.
    """
    chi = params.chi_at(n_atoms)
    if params.omega == 0.0 or chi == 0.0:
        raise NoUnstablePointError("need both twisting and coupling for a saddle")
    delta = params.delta_at(n_atoms)
    if abs(delta) > 1e-9 * abs(params.omega):
        raise NoUnstablePointError(
            f"unstable equatorial point defined for delta = 0, got delta = {delta:g}"
        )
    if params.lambda_at(n_atoms) <= 1.0:
        raise NoUnstablePointError(
            f"Lambda = {params.lambda_at(n_atoms):g} <= 1: no equatorial saddle"
        )
    return math.pi if chi * params.omega > 0 else 0.0
