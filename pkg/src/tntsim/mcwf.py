"""Monte Carlo wave-function trajectories with particle loss and slow
detuning noise.

Each step of a trajectory draws one random number: with probability
p_j = dt <L_j^dag L_j> a loss jump via channel j collapses the state onto a
smaller fixed-N manifold (re-evaluating chi(N) and delta(N)); otherwise the
state advances one RK4 step under H_eff = H - (i/2) sum_j L_j^dag L_j and is
renormalized.  Each trajectory also draws one Gaussian detuning offset held
for its whole duration.

Trajectories are independent work units seeded from (master_seed, index);
aggregation runs in fixed trajectory order, so ensembles are bit-identical
for any worker count.
"""

import math
import os
from dataclasses import dataclass

import numba
import numpy as np

from . import _kernels
from .exceptions import ImpossibleJumpError, StepSizeError
from .hamiltonian import build_hamiltonian, coupling_hamiltonian, default_dt
from .sequences import CoupledPulse, FreeEvolution, InstantRotation
from .spins import SpinState

__all__ = [
    "JumpChannel",
    "NoiseModel",
    "JumpRecord",
    "TrajectoryEnsemble",
    "DEFAULT_CHANNELS",
    "apply_jump",
    "step_trajectory",
    "run_ensemble",
]


@dataclass(frozen=True)
class JumpChannel:
    """Loss process L ~ sqrt(rate) a_up^p a_down^q."""

    p: int
    q: int
    rate_coeff: float

    def __post_init__(self):
        if self.p < 0 or self.q < 0 or self.p + self.q < 1:
            raise ValueError(f"need p, q >= 0 with p + q >= 1, got ({self.p}, {self.q})")
        if self.rate_coeff < 0:
            raise ValueError("rate_coeff must be >= 0")

    def diagonal(self, n_atoms):
        """<k| L^dag L |k> / rate: falling factorials of the mode occupations."""
        k = np.arange(n_atoms + 1, dtype=float)
        d = np.ones(n_atoms + 1)
        for i in range(self.p):
            d *= np.maximum(k - i, 0.0)
        for i in range(self.q):
            d *= np.maximum(n_atoms - k - i, 0.0)
        return d


@dataclass(frozen=True)
class NoiseModel:
    """Technical-noise settings: shot-to-shot detuning spread (rad/s),
    detection read-out noise per component (atoms), read-out ramp loss
    (expected atoms lost)."""

    sigma_delta: float = 0.0
    sigma_det: float = 0.0
    ramp_loss_atoms: float = 0.0

    def __post_init__(self):
        if min(self.sigma_delta, self.sigma_det, self.ramp_loss_atoms) < 0:
            raise ValueError("noise magnitudes must be >= 0")


@dataclass(frozen=True)
class JumpRecord:
    channel_index: int
    p: int
    q: int


# Default loss channels: two-body spin relaxation removing two up atoms per
# event, and three-body loss removing an up pair plus one down atom.  The
# operator content and rates are calibration placeholders chosen so a
# 500-atom sample loses roughly 15% of its atoms over 30 ms; quantitative
# acceptance never rests on these numbers.
DEFAULT_CHANNELS = (
    JumpChannel(p=2, q=0, rate_coeff=1.5e-2),
    JumpChannel(p=2, q=1, rate_coeff=4.0e-5),
)


def apply_jump(state, channel):
    """Collapse a state onto the manifold with p + q fewer atoms."""
    n = state.atom_count
    if n < channel.p + channel.q:
        raise ValueError(f"cannot remove {channel.p + channel.q} atoms from {n}")
    amp = np.sqrt(channel.diagonal(n))
    new = (state.amplitudes * amp)[channel.p : n + 1 - channel.q]
    nrm = np.linalg.norm(new)
    if nrm == 0.0:
        raise ImpossibleJumpError(
            f"jump ({channel.p}, {channel.q}) has zero amplitude on this state"
        )
    return SpinState(n - channel.p - channel.q, new / nrm)


def step_trajectory(state, params, channels, noise_offset_delta, dt, rng):
    """One Bernoulli step: jump with probability dt <L^dag L>, else one RK4
    step under the effective non-Hermitian generator, renormalized.

    Reference implementation of the scheme used trajectory-wise by
    run_ensemble; returns (state', JumpRecord or None).
    """
    n = state.atom_count
    probs = state.probabilities()
    weights = np.array([ch.rate_coeff * float(np.dot(ch.diagonal(n), probs)) for ch in channels])
    p_tot = dt * float(weights.sum())
    if p_tot >= 0.1:
        raise StepSizeError(
            f"total jump probability {p_tot:.3g} per step exceeds 0.1",
            suggested_dt=0.05 / max(weights.sum(), 1e-300),
        )
    u = rng.random()
    if u < p_tot:
        j = int(np.searchsorted(np.cumsum(weights), u / dt, side="right"))
        j = min(j, len(channels) - 1)
        return apply_jump(state, channels[j]), JumpRecord(j, channels[j].p, channels[j].q)
    ham = build_hamiltonian(params, n)
    decay = np.zeros(n + 1)
    for ch in channels:
        decay += ch.rate_coeff * ch.diagonal(n)
    m = state.jz_values
    diag = ham.diag + noise_offset_delta * m
    shift = float(np.dot(diag, probs))
    c = state.amplitudes
    if n > 0:
        shift += 2.0 * float(np.real(np.dot(np.conj(c[:-1]) * c[1:], ham.off)))
    psi = c.copy()
    dc = (diag - shift) - 0.5j * decay
    _kernels.rk4_run(dc, ham.off.astype(np.complex128), psi, dt, 1, False)
    psi /= np.linalg.norm(psi)
    return SpinState(n, psi), None


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Trajectory-averaged first/second spin moments and atom statistics."""

    times: np.ndarray
    mean_j: np.ndarray  # (n_times, 3)
    second_moments: np.ndarray  # (n_times, 6): xx, yy, zz, yz, xy, xz
    mean_n: np.ndarray
    var_n: np.ndarray
    n_traj: int
    master_seed: int
    jump_counts: np.ndarray  # per channel, summed over trajectories
    channels: tuple
    final_amplitudes: np.ndarray | None = None  # (n_traj, dim0), zero padded
    final_atom_counts: np.ndarray | None = None

    def covariance_at(self, i):
        """3x3 mixture covariance C_ab = E<{Ja,Jb}/2> - E<Ja> E<Jb>."""
        xx, yy, zz, yz, xy, xz = self.second_moments[i]
        second = np.array([[xx, xy, xz], [xy, yy, yz], [xz, yz, zz]])
        return second - np.outer(self.mean_j[i], self.mean_j[i])

    def to_csv(self, path_or_file):
        header = (
            "time_s,mean_Jx,mean_Jy,mean_Jz,m2_xx,m2_yy,m2_zz,m2_yz,m2_xy,m2_xz,"
            "mean_N,var_N,n_traj"
        )
        lines = [header]
        for i, t in enumerate(self.times):
            vals = [t, *self.mean_j[i], *(self.second_moments[i][j] for j in (0, 1, 2, 3, 4, 5)),
                    self.mean_n[i], self.var_n[i]]
            lines.append(",".join(f"{v:.17g}" for v in vals) + f",{self.n_traj}")
        text = "\n".join(lines) + "\n"
        if hasattr(path_or_file, "write"):
            path_or_file.write(text)
        else:
            with open(path_or_file, "w") as fh:
                fh.write(text)


def _compile_sequence(sequence, n_atoms, dt):
    """Lower a PulseSequence onto the kernel's segment arrays.

    All evolution segments must share one PhysicalParams (the kernel owns a
    single set of scaling laws so it can re-evaluate them after jumps).
    Each evolution segment gets its own step min(1 us, 0.1/||H||) unless a
    fixed dt is forced.  Instant rotations inside a lossy sequence are
    supported for z (any angle) and for x at angle pi (index reversal);
    anything else needs a finite pulse.
    """
    kinds, steps, tails, dts, omegas, phases, angles = [], [], [], [], [], [], []
    params = None
    for seg in sequence.segments:
        if isinstance(seg, (FreeEvolution, CoupledPulse)):
            if params is None:
                params = seg.params
            elif seg.params != params:
                raise ValueError("all evolution segments must share one PhysicalParams")
    if params is None:
        raise ValueError("sequence has no evolution segment")
    for seg in sequence.segments:
        if isinstance(seg, FreeEvolution):
            kinds.append(0)
            omegas.append(seg.params.omega)
            phases.append(0.0)
            angles.append(0.0)
            dur = seg.duration
            ham = build_hamiltonian(seg.params, n_atoms)
        elif isinstance(seg, CoupledPulse):
            kinds.append(1)
            omegas.append(seg.pulse_omega)
            phases.append(seg.axis_phase)
            angles.append(0.0)
            dur = seg.duration
            ham = coupling_hamiltonian(seg.params, n_atoms, seg.pulse_omega, seg.axis_phase)
        elif isinstance(seg, InstantRotation):
            if seg.axis == "z":
                kinds.append(3)
                angles.append(seg.angle)
            elif seg.axis == "x" and abs(abs(seg.angle) - math.pi) < 1e-12:
                kinds.append(2)
                angles.append(seg.angle)
            else:
                raise ValueError(
                    "lossy sequences support instant z rotations and pi x rotations only"
                )
            omegas.append(0.0)
            phases.append(0.0)
            steps.append(0)
            tails.append(0.0)
            dts.append(0.0)
            continue
        else:
            raise ValueError(f"segment {type(seg).__name__} not supported in ensembles")
        seg_dt = default_dt(ham) if dt is None else dt
        n_full = int(dur / seg_dt + 1e-9)
        tail = dur - n_full * seg_dt
        if tail < 1e-12 * max(dur, 1.0):
            tail = 0.0
        steps.append(n_full)
        tails.append(tail)
        dts.append(seg_dt)
    program = {
        "params": params,
        "kind": np.array(kinds, dtype=np.int64),
        "steps": np.array(steps, dtype=np.int64),
        "tail": np.array(tails, dtype=np.float64),
        "dt": np.array(dts, dtype=np.float64),
        "omega": np.array(omegas, dtype=np.float64),
        "axis_phase": np.array(phases, dtype=np.float64),
        "angle": np.array(angles, dtype=np.float64),
    }
    # step-boundary times for mapping sample times onto global step indices
    bounds = [0.0]
    t = 0.0
    for i, kind in enumerate(kinds):
        if kind in (2, 3):
            continue
        for _ in range(steps[i]):
            t += dts[i]
            bounds.append(t)
        if tails[i] > 0.0:
            t += tails[i]
            bounds.append(t)
    program["boundaries"] = np.array(bounds)
    return program


def _sample_step_indices(program, sample_times):
    bounds = program["boundaries"]
    idx = []
    for t in sample_times:
        i = int(np.argmin(np.abs(bounds - t)))
        if abs(bounds[i] - t) > 1e-9:
            raise ValueError(
                f"sample time {t:g} s does not lie on an integrator step boundary"
            )
        idx.append(i)
    idx = np.array(sorted(set(idx)), dtype=np.int64)
    return idx


def _resolve_threads(threads):
    if threads is None:
        env = os.environ.get("TNT_THREADS")
        threads = int(env) if env else numba.get_num_threads()
    return max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS))


def run_ensemble(
    initial,
    sequence,
    channels=(),
    noise=None,
    n_traj=1,
    master_seed=0,
    *,
    sample_times=None,
    dt=None,
    threads=None,
    store_states=False,
):
    """Run n_traj MCWF trajectories of a pulse sequence and aggregate moments.

    Aggregates are means of per-trajectory expectation values (a density
    matrix over the trajectory mixture).  Fully reproducible: the output is a
    pure function of (master_seed, n_traj, physics), independent of threads.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    noise = noise or NoiseModel()
    channels = tuple(channels)
    program = _compile_sequence(sequence, initial.atom_count, dt)
    params = program["params"]
    if sample_times is None:
        sample_times = [sequence.total_duration]
    sample_times = np.asarray(sorted(sample_times), dtype=float)
    sample_steps = _sample_step_indices(program, sample_times)

    n0 = initial.atom_count
    dim0 = n0 + 1
    psi0 = initial.amplitudes.astype(np.complex128)
    n_samples = sample_steps.shape[0]
    n_ch = len(channels)
    out_mom = np.zeros((n_traj, n_samples, 10))
    out_jumps = np.zeros((n_traj, max(n_ch, 1)), dtype=np.int64)
    out_states = np.zeros((n_traj if store_states else 1, dim0), dtype=np.complex128)

    if params.nchi_fixed is not None:
        chi_mode, chi_value = 0, float(params.nchi_fixed)
    else:
        chi_mode, chi_value = 1, float(params.chi_coeff)
    ch_p = np.array([ch.p for ch in channels] or [0], dtype=np.int64)[: max(n_ch, 1)]
    ch_q = np.array([ch.q for ch in channels] or [0], dtype=np.int64)[: max(n_ch, 1)]
    ch_rate = np.array([ch.rate_coeff for ch in channels] or [0.0])[: max(n_ch, 1)]
    if n_ch == 0:
        ch_p = np.zeros(0, dtype=np.int64)
        ch_q = np.zeros(0, dtype=np.int64)
        ch_rate = np.zeros(0)

    # kernel takes a merged steps array where a tail step counts as one step
    seg_steps_total = program["steps"] + (program["tail"] > 0.0)

    n_threads = _resolve_threads(threads)
    old_threads = numba.get_num_threads()
    numba.set_num_threads(n_threads)
    try:
        _kernels.ensemble_kernel(
            psi0,
            n0,
            program["kind"],
            seg_steps_total.astype(np.int64),
            program["steps"].astype(np.int64),
            program["tail"],
            program["dt"],
            program["omega"],
            program["axis_phase"],
            program["angle"],
            chi_mode,
            chi_value,
            float(params.delta_ext),
            float(params.delta_coeff),
            math.sqrt(params.n_ref),
            ch_p,
            ch_q,
            ch_rate,
            float(noise.sigma_delta),
            sample_steps,
            np.uint64(master_seed),
            n_traj,
            out_mom,
            out_jumps,
            out_states,
            store_states,
        )
    finally:
        numba.set_num_threads(old_threads)

    mean = out_mom.mean(axis=0)
    n_col = out_mom[:, :, 9]
    var_n = np.maximum((n_col**2).mean(axis=0) - n_col.mean(axis=0) ** 2, 0.0)
    return TrajectoryEnsemble(
        times=sample_times,
        mean_j=mean[:, 0:3],
        second_moments=mean[:, 3:9],
        mean_n=mean[:, 9],
        var_n=var_n,
        n_traj=n_traj,
        master_seed=int(master_seed),
        jump_counts=out_jumps[:, :n_ch].sum(axis=0) if n_ch else np.zeros(0, dtype=np.int64),
        channels=channels,
        final_amplitudes=out_states if store_states else None,
        final_atom_counts=(
            np.array([n0 - int(np.dot(out_jumps[t, :n_ch], ch_p[:n_ch] + ch_q[:n_ch])) if n_ch else n0
                      for t in range(n_traj)])
            if store_states
            else None
        ),
    )
