"""Collective-spin states of N two-mode bosons in the symmetric (Dicke) manifold.

A pure state of N indistinguishable two-level bosons is a normalized complex
vector over the occupation basis |k> with k atoms in the upper mode and N - k
in the lower one, equivalent to a single spin J = N/2.  Basis ordering is
k ascending, so Jz is diagonal with entries k - N/2.

All operations here are pure functions over immutable states; RNG state is
owned by the caller.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln

__all__ = [
    "SpinState",
    "SpinMoments",
    "coherent_state",
    "moments",
    "rotate",
    "sample_jz",
    "overlap",
    "dense_operators",
    "ladder_offdiag",
]


@dataclass(frozen=True)
class SpinState:
    """Normalized amplitude vector over the fixed-N occupation basis."""

    atom_count: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.atom_count < 0:
            raise ValueError(f"atom_count must be >= 0, got {self.atom_count}")
        if amps.shape != (self.atom_count + 1,):
            raise ValueError(
                f"amplitude vector has length {amps.shape}, expected {self.atom_count + 1}"
            )
        nrm = np.linalg.norm(amps)
        if not np.isfinite(nrm) or abs(nrm - 1.0) > 1e-6:
            raise ValueError(f"state norm {nrm} too far from 1")
        amps = amps / nrm
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def jz_values(self):
        """Jz eigenvalues k - N/2 aligned with the amplitude vector."""
        return np.arange(self.atom_count + 1) - self.atom_count / 2

    def probabilities(self):
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class SpinMoments:
    """First and symmetrized second moments of (Jx, Jy, Jz).

    ``covariance[a, b] = <{J_a, J_b}>/2 - <J_a><J_b>``.
    """

    mean: np.ndarray
    covariance: np.ndarray

    def variance(self, axis):
        i = "xyz".index(axis)
        return self.covariance[i, i]


def ladder_offdiag(n_atoms):
    """Matrix elements <k+1| J+ |k> = sqrt((k+1)(N-k)) for k = 0..N-1."""
    k = np.arange(n_atoms)
    return np.sqrt((k + 1.0) * (n_atoms - k))


def coherent_state(n_atoms, theta, phi):
    """Coherent spin state at polar angle theta, azimuth phi.

    theta = 0 is the north pole (all atoms up, the k = N basis state); the
    amplitudes are c_k = sqrt(C(N,k)) cos(theta/2)^k sin(theta/2)^(N-k)
    exp(-i k phi).  Under this convention the mean spin is
    (N/2)(sin(theta) cos(phi), sin(theta) sin(phi), cos(theta)).
    """
    if n_atoms < 1:
        raise ValueError(f"need at least one atom, got {n_atoms}")
    if not (np.isfinite(theta) and np.isfinite(phi)):
        raise ValueError("angles must be finite")
    n = int(n_atoms)
    k = np.arange(n + 1)
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    # log-domain magnitudes: binomial coefficients overflow float64 near N ~ 1000
    with np.errstate(divide="ignore"):
        log_mag = 0.5 * (gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))
        log_mag += np.where(k > 0, k * np.log(np.abs(c) + 1e-300), 0.0)
        log_mag += np.where(k < n, (n - k) * np.log(np.abs(s) + 1e-300), 0.0)
    mag = np.exp(log_mag - log_mag.max())
    sign = np.sign(c) ** k * np.sign(s) ** (n - k)
    amps = sign * mag * np.exp(-1j * k * phi)
    amps /= np.linalg.norm(amps)
    return SpinState(n, amps)


def moments(state):
    """Exact first and symmetrized second moments of the collective spin."""
    n = state.atom_count
    c = state.amplitudes
    p = np.abs(c) ** 2
    m = state.jz_values
    s = ladder_offdiag(n)

    jz = float(np.dot(m, p))
    jz2 = float(np.dot(m * m, p))
    # <J+> and <J+ Jz + Jz J+> share the one-step coherence c*_{k+1} c_k
    coh1 = np.conj(c[1:]) * c[:-1] * s
    jp = complex(coh1.sum())
    a = complex(np.dot(coh1, m[:-1] + m[1:]))
    # <J+^2> from the two-step coherence
    jp2 = complex(np.dot(np.conj(c[2:]) * c[:-2], s[:-1] * s[1:]))

    j = n / 2.0
    casimir = j * (j + 1.0)
    jx, jy = jp.real, jp.imag
    jx2 = 0.5 * (jp2.real + casimir - jz2)
    jy2 = 0.5 * (-jp2.real + casimir - jz2)
    sym_xy = 0.5 * jp2.imag
    sym_xz = 0.5 * a.real
    sym_yz = 0.5 * a.imag

    mean = np.array([jx, jy, jz])
    second = np.array(
        [
            [jx2, sym_xy, sym_xz],
            [sym_xy, jy2, sym_yz],
            [sym_xz, sym_yz, jz2],
        ]
    )
    return SpinMoments(mean=mean, covariance=second - np.outer(mean, mean))


@lru_cache(maxsize=32)
def _x_eigenbasis(n_atoms):
    """Eigendecomposition of Jx, which is real symmetric tridiagonal."""
    diag = np.zeros(n_atoms + 1)
    vals, vecs = eigh_tridiagonal(diag, 0.5 * ladder_offdiag(n_atoms))
    vals.setflags(write=False)
    vecs.setflags(write=False)
    return vals, vecs


def rotate(state, axis, angle):
    """Apply exp(-i * angle * J_axis) for axis in {'x', 'y', 'z'}.

    The z rotation is an exact diagonal phase; x and y use the exact
    eigendecomposition of the tridiagonal generator (Jy is gauge-equivalent
    to Jx via the diagonal i^k transformation).
    """
    n = state.atom_count
    c = state.amplitudes
    if axis == "z":
        out = c * np.exp(-1j * angle * state.jz_values)
    elif axis in ("x", "y"):
        vals, vecs = _x_eigenbasis(n)
        if axis == "y":
            gauge = 1j ** np.arange(n + 1)
            c = gauge * c
        out = vecs @ (np.exp(-1j * angle * vals) * (vecs.T @ c))
        if axis == "y":
            out = np.conj(gauge) * out
    else:
        raise ValueError(f"axis must be one of x, y, z, got {axis!r}")
    out = out / np.linalg.norm(out)
    return SpinState(n, out)


def sample_jz(state, shots, rng):
    """Draw i.i.d. projective outcomes k (number of up atoms) from |c_k|^2."""
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    cdf = np.cumsum(state.probabilities())
    cdf /= cdf[-1]
    u = rng.random(int(shots))
    return np.searchsorted(cdf, u, side="right").astype(np.int64)


def overlap(state_a, state_b):
    """|<a|b>|, the global-phase-free fidelity amplitude of two pure states."""
    if state_a.atom_count != state_b.atom_count:
        raise ValueError("states live in different Dicke manifolds")
    return abs(np.vdot(state_a.amplitudes, state_b.amplitudes))


def dense_operators(n_atoms):
    """Dense (Jx, Jy, Jz) matrices in the k basis, for oracles and small N."""
    s = ladder_offdiag(n_atoms)
    # J+ raises k by one: <k+1|J+|k> = s_k (row index is the bra).
    jp = np.zeros((n_atoms + 1, n_atoms + 1), dtype=np.complex128)
    jp[np.arange(1, n_atoms + 1), np.arange(n_atoms)] = s
    jm = jp.conj().T
    jx = 0.5 * (jp + jm)
    jy = -0.5j * (jp - jm)
    jz = np.diag(np.arange(n_atoms + 1) - n_atoms / 2).astype(np.complex128)
    return jx, jy, jz
