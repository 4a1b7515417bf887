"""High-level protocol runners shared by the command-line front end and the
acceptance suite: squeezing-vs-time sweeps (exact and trajectory-averaged),
atom-number sweeps, and synthetic condensate arrays.
"""

import math
from dataclasses import dataclass

import numpy as np

from .analysis import mean_spin_length, spin_squeezing, variance_extrema
from .exceptions import NoUnstablePointError
from .hamiltonian import _gauged_eigh, build_hamiltonian, unstable_phase
from .mcwf import NoiseModel, run_ensemble
from .sequences import pulsed_tnt_sequence, tnt_sequence
from .spins import SpinMoments, SpinState, _x_eigenbasis, coherent_state, moments, rotate, sample_jz

__all__ = [
    "SweepPoint",
    "nominal_saddle_azimuth",
    "prepared_state",
    "evolve_times",
    "analyze_state",
    "ideal_sweep",
    "ensemble_sweep",
    "ndep_sweep",
    "lattice_profile",
    "make_site_states",
    "sample_array_shots",
]


@dataclass(frozen=True)
class SweepPoint:
    time: float
    xi2_min: float
    xi2_max: float
    alpha_min: float
    cos_phi: float
    cos_phi_moments: float | None
    xi2_s: float
    mean_n: float
    flat: bool


def nominal_saddle_azimuth(params):
    """Azimuth of the zero-detuning equatorial saddle for the sign
    conventions in use; falls back to pi when the couplings do not single
    one out (pure twisting)."""
    chi = params.nchi_fixed if params.nchi_fixed is not None else params.chi_coeff
    if chi * params.omega > 0:
        return math.pi
    if chi * params.omega < 0:
        return 0.0
    return math.pi


def prepared_state(params, n_atoms, strict=False):
    """Equator coherent state on the unstable fixed point.

    With strict=True the saddle must genuinely exist (Lambda > 1, delta = 0);
    otherwise the nominal zero-detuning azimuth is used, which is what a
    fixed experimental preparation sequence does regardless of N.
    """
    if strict:
        phi = unstable_phase(params, n_atoms)
    else:
        try:
            phi = unstable_phase(params, n_atoms)
        except (NoUnstablePointError, ValueError):
            phi = nominal_saddle_azimuth(params)
    return coherent_state(n_atoms, 0.5 * math.pi, phi)


def evolve_times(state, ham, times):
    """States at several times under one fixed Hamiltonian (single
    diagonalization)."""
    vals, vecs, gauge = _gauged_eigh(ham.diag, ham.off)
    w0 = vecs.T @ (gauge * state.amplitudes)
    out = []
    for t in times:
        psi = np.conj(gauge) * (vecs @ (np.exp(-1j * vals * t) * w0))
        psi /= np.linalg.norm(psi)
        out.append(SpinState(state.atom_count, psi))
    return out


def analyze_state(state, time=0.0, cos_method="protocol"):
    """Tomography extrema, optimal angle, mean spin length and xi2_S of a
    pure state."""
    mom = moments(state)
    n = state.atom_count
    v_min, v_max, alpha_min, flat = variance_extrema(mom)
    p_of = lambda a: 0.5 + (mom.mean[2] * math.cos(a) + mom.mean[1] * math.sin(a)) / n
    if flat:
        xi2_min = xi2_max = 4.0 * v_min / (4.0 * 0.25 * n)
        alpha_for_length = 0.0
    else:
        p_min = p_of(alpha_min)
        p_max = p_of(alpha_min + 0.5 * math.pi)
        xi2_min = 4.0 * v_min / (4.0 * p_min * (1.0 - p_min) * n)
        xi2_max = 4.0 * v_max / (4.0 * p_max * (1.0 - p_max) * n)
        alpha_for_length = alpha_min
    msl = mean_spin_length(state, alpha_for_length)
    cos_phi = msl.estimate if cos_method == "protocol" else msl.moment_based
    return SweepPoint(
        time=time,
        xi2_min=xi2_min,
        xi2_max=xi2_max,
        alpha_min=alpha_min,
        cos_phi=cos_phi,
        cos_phi_moments=msl.moment_based,
        xi2_s=spin_squeezing(xi2_min, cos_phi),
        mean_n=float(n),
        flat=flat,
    )


def ideal_sweep(params, n_atoms, times, cos_method="protocol", echo=False):
    """Exact closed-system squeezing dynamics on a time grid.

    Free evolution is a single constant Hamiltonian, so states come from one
    diagonalization; an instantaneous echo at half time is applied as an
    index reversal when requested.
    """
    state0 = prepared_state(params, n_atoms)
    ham = build_hamiltonian(params, n_atoms)
    out = []
    if not echo:
        for t, s in zip(times, evolve_times(state0, ham, times)):
            out.append(analyze_state(s, time=t, cos_method=cos_method))
        return out
    for t in times:
        half = evolve_times(state0, ham, [0.5 * t])[0]
        flipped = rotate(half, "x", math.pi)
        final = evolve_times(flipped, ham, [0.5 * t])[0]
        out.append(analyze_state(final, time=t, cos_method=cos_method))
    return out


def _mixture_sweep_point(ens, i, cos_phi, time):
    n_bar = float(ens.mean_n[i])
    mean = ens.mean_j[i]
    mix = SpinMoments(mean=mean, covariance=ens.covariance_at(i))
    v_min, v_max, alpha_min, flat = variance_extrema(mix)
    p_of = lambda a: 0.5 + (mean[2] * math.cos(a) + mean[1] * math.sin(a)) / n_bar
    if flat:
        xi2_min = xi2_max = 4.0 * v_min / (4.0 * 0.25 * n_bar)
    else:
        p_min = p_of(alpha_min)
        p_max = p_of(alpha_min + 0.5 * math.pi)
        xi2_min = 4.0 * v_min / (4.0 * p_min * (1.0 - p_min) * n_bar)
        xi2_max = 4.0 * v_max / (4.0 * p_max * (1.0 - p_max) * n_bar)
    cos_mom = 2.0 * float(np.linalg.norm(mean)) / n_bar
    cp = cos_mom if cos_phi is None else cos_phi
    return SweepPoint(
        time=time,
        xi2_min=xi2_min,
        xi2_max=xi2_max,
        alpha_min=alpha_min,
        cos_phi=cp,
        cos_phi_moments=cos_mom,
        xi2_s=spin_squeezing(xi2_min, cp),
        mean_n=n_bar,
        flat=flat,
    )


def _mixture_protocol_cos(ens, alpha_min):
    """Mixture <sqrt(1 - z^2)> after rotating the long axis onto z, averaged
    over stored final trajectory states."""
    amps = ens.final_amplitudes
    ns = ens.final_atom_counts
    total = 0.0
    for ti in range(amps.shape[0]):
        n = int(ns[ti])
        state = SpinState(n, amps[ti, : n + 1])
        msl = mean_spin_length(state, alpha_min)
        total += msl.estimate
    return total / amps.shape[0]


def ensemble_sweep(
    params,
    n_atoms,
    times,
    channels=(),
    noise=None,
    n_traj=500,
    master_seed=0,
    echo=False,
    pulsed=False,
    pulse_omega=None,
    prep_pulse_omega=None,
    dt=None,
    threads=None,
    cos_method="moments",
):
    """Trajectory-averaged squeezing dynamics.

    Without an echo the whole curve comes from one ensemble pass sampled
    along the way; echoed or pulsed protocols re-run the ensemble per
    evolution time (the echo position depends on the total time).  The
    protocol <cos phi> estimator needs per-trajectory final states and is
    available in the per-time path.
    """
    noise = noise or NoiseModel()
    times = np.asarray(sorted(times), dtype=float)
    per_time = echo or pulsed or cos_method == "protocol"
    out = []
    if not per_time:
        state0 = prepared_state(params, n_atoms)
        seq = tnt_sequence(params, float(times[-1]), echo=False)
        ens = run_ensemble(
            state0, seq, channels, noise, n_traj, master_seed,
            sample_times=times, dt=dt, threads=threads,
        )
        for i, t in enumerate(times):
            out.append(_mixture_sweep_point(ens, i, None, t))
        return out
    for t in times:
        if pulsed:
            if pulse_omega is None:
                raise ValueError("pulsed protocol needs pulse_omega")
            state0 = coherent_state(n_atoms, math.pi, 0.0)  # all atoms down
            seq = pulsed_tnt_sequence(
                params, float(t), pulse_omega, nominal_saddle_azimuth(params),
                echo=echo, prep_pulse_omega=prep_pulse_omega,
            )
        else:
            state0 = prepared_state(params, n_atoms)
            seq = tnt_sequence(params, float(t), echo=echo)
        store = cos_method == "protocol"
        ens = run_ensemble(
            state0, seq, channels, noise, n_traj, master_seed,
            dt=dt, threads=threads, store_states=store,
        )
        point = _mixture_sweep_point(ens, 0, None, t)
        if store and not point.flat:
            cp = _mixture_protocol_cos(ens, point.alpha_min)
            point = _mixture_sweep_point(ens, 0, cp, t)
        out.append(point)
    return out


def ndep_sweep(params, n_values, evolve_time, cos_method="protocol"):
    """Final-state characteristics at a fixed evolution time versus atom
    number, with the chi(N) and delta(N) laws active.

    Preparation always lands on the nominal zero-detuning saddle azimuth:
    a fixed experimental sequence does not adapt to N even though delta(N)
    shifts the true fixed points.
    """
    out = []
    for n in n_values:
        state0 = prepared_state(params, int(n))
        ham = build_hamiltonian(params, int(n))
        final = evolve_times(state0, ham, [evolve_time])[0]
        out.append((int(n), analyze_state(final, time=evolve_time, cos_method=cos_method)))
    return out


def lattice_profile(n_sites=30, n_min=200, n_max=600, shape="gaussian"):
    """Per-site atom numbers across the condensate array."""
    if shape == "flat":
        return np.full(n_sites, int(round(0.5 * (n_min + n_max))), dtype=int)
    if shape != "gaussian":
        raise ValueError(f"unknown profile {shape!r}")
    x = np.linspace(-1.0, 1.0, n_sites)
    envelope = np.exp(-(x**2) / (2 * 0.45**2))
    n = n_min + (n_max - n_min) * (envelope - envelope.min()) / (envelope.max() - envelope.min())
    return np.rint(n).astype(int)


def make_site_states(params, site_atom_numbers, evolve_time):
    """Evolve one prepared state per site atom number (exact path)."""
    out = []
    for n in site_atom_numbers:
        state0 = prepared_state(params, int(n))
        ham = build_hamiltonian(params, int(n))
        out.append(evolve_times(state0, ham, [evolve_time])[0])
    return out


def sample_array_shots(
    states, alpha, n_shots, rng, common_phase_sigma=0.0, coherent_reference=False
):
    """Projective read-out of an array after the fixed tomography rotation.

    common_phase_sigma injects a shot-to-shot rotation error about z shared
    by every site (slow bias-field noise); each site is then rotated by
    alpha about x and measured once per shot.  coherent_reference replaces
    every state by an equator coherent state of the same atom number.
    """
    from .analysis import ShotTable

    sites, shots, ups, downs = [], [], [], []
    etas = rng.normal(0.0, common_phase_sigma, size=n_shots) if common_phase_sigma > 0 else None
    for sid, state in enumerate(states):
        n = state.atom_count
        if coherent_reference:
            mom_phi = math.atan2(moments(state).mean[1], moments(state).mean[0])
            state = coherent_state(n, 0.5 * math.pi, mom_phi)
        vals, vecs = _x_eigenbasis(n)
        phase_rot = np.exp(-1j * alpha * vals)
        m = np.arange(n + 1) - n / 2.0
        if etas is None:
            rotated = vecs @ (phase_rot * (vecs.T @ state.amplitudes))
            ks = sample_jz(SpinState(n, rotated / np.linalg.norm(rotated)), n_shots, rng)
        else:
            # batch the per-shot common z-phase then the fixed x rotation
            zphases = np.exp(-1j * np.outer(m, etas))  # (dim, n_shots)
            batch = zphases * state.amplitudes[:, None]
            batch = vecs @ (phase_rot[:, None] * (vecs.T @ batch))
            probs = np.abs(batch) ** 2
            probs /= probs.sum(axis=0)
            ks = np.empty(n_shots, dtype=np.int64)
            for s in range(n_shots):
                cdf = np.cumsum(probs[:, s])
                ks[s] = np.searchsorted(cdf, rng.random(), side="right")
        sites.extend([sid] * n_shots)
        shots.extend(range(n_shots))
        ups.extend(ks.tolist())
        downs.extend((n - ks).tolist())
    return ShotTable(
        np.array(sites, dtype=np.int64),
        np.array(shots, dtype=np.int64),
        np.array(ups, dtype=float),
        np.array(downs, dtype=float),
    )
