import io
import math

import numpy as np
import pytest

from tntsim.analysis import to_db
from tntsim.exceptions import ImpossibleJumpError, StepSizeError
from tntsim.hamiltonian import PhysicalParams, build_hamiltonian, evolve_under
from tntsim.mcwf import (
    DEFAULT_CHANNELS,
    JumpChannel,
    NoiseModel,
    apply_jump,
    run_ensemble,
    step_trajectory,
)
from tntsim.protocols import ensemble_sweep, ideal_sweep, prepared_state
from tntsim.sequences import tnt_sequence
from tntsim.spins import SpinState, coherent_state, moments, overlap

TWO_PI = 2 * np.pi


def test_channel_validation():
    with pytest.raises(ValueError):
        JumpChannel(0, 0, 1.0)
    with pytest.raises(ValueError):
        JumpChannel(1, 0, -1.0)


# ---------------------------------------------------------------------------
# jumps
# ---------------------------------------------------------------------------


def test_fock_ladder_jump():
    all_up = coherent_state(4, 0.0, 0.0)
    out = apply_jump(all_up, JumpChannel(2, 0, 1.0))
    assert out.atom_count == 2
    assert abs(out.amplitudes[-1]) == pytest.approx(1.0)


def test_impossible_jump():
    all_down = SpinState(4, np.array([1.0, 0, 0, 0, 0], dtype=complex))
    with pytest.raises(ImpossibleJumpError):
        apply_jump(all_down, JumpChannel(1, 0, 1.0))
    with pytest.raises(ValueError):
        apply_jump(coherent_state(1, 0.0, 0.0), JumpChannel(2, 0, 1.0))


def test_coherent_state_maps_to_smaller_coherent_state():
    # single-mode annihilation keeps a coherent spin state coherent
    phi = 0.8
    s4 = coherent_state(4, np.pi / 2, phi)
    out = apply_jump(s4, JumpChannel(1, 0, 1.0))
    assert overlap(out, coherent_state(3, np.pi / 2, phi)) == pytest.approx(1.0, abs=1e-12)
    out2 = apply_jump(s4, JumpChannel(0, 1, 1.0))
    assert overlap(out2, coherent_state(3, np.pi / 2, phi)) == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# single steps
# ---------------------------------------------------------------------------


def test_zero_rate_step_equals_unitary_evolution(tnt_params):
    rng = np.random.default_rng(0)
    s = coherent_state(40, np.pi / 2, np.pi)
    stepped, rec = step_trajectory(s, tnt_params, (), 0.0, 1e-6, rng)
    assert rec is None
    reference = evolve_under(s, build_hamiltonian(tnt_params, 40), 1e-6, dt=1e-6)
    assert overlap(stepped, reference) == pytest.approx(1.0, abs=1e-13)
    assert np.linalg.norm(stepped.amplitudes) == pytest.approx(1.0, abs=1e-12)


def test_step_probability_bound():
    s = coherent_state(100, 0.0, 0.0)
    hot = (JumpChannel(1, 0, 10.0),)  # <L^dag L> = 1000/s
    with pytest.raises(StepSizeError):
        step_trajectory(s, PhysicalParams(omega=0, nchi_fixed=0), hot, 0.0, 1e-3, np.random.default_rng(0))


def test_bernoulli_jump_statistics():
    # frozen state, repeated single steps: jump frequency = dt <L^dag L>
    s = coherent_state(60, 0.0, 0.0)  # all up: <L^dag L> = gamma N
    gamma = 3.0
    channels = (JumpChannel(1, 0, gamma),)
    p_expect = 1e-4 * gamma * 60
    rng = np.random.default_rng(42)
    p = PhysicalParams(omega=0.0, nchi_fixed=0.0)
    trials = 10**4
    jumps = 0
    for _ in range(trials):
        _, rec = step_trajectory(s, p, channels, 0.0, 1e-4, rng)
        jumps += rec is not None
    se = math.sqrt(trials * p_expect * (1 - p_expect))
    assert abs(jumps - trials * p_expect) < 3 * se


def test_exponential_decay_of_mean_atom_number():
    # all-up state with single-atom loss: E[N](t) = N0 exp(-gamma t)
    n0 = 30
    gamma = 20.0
    s = coherent_state(n0, 0.0, 0.0)
    p = PhysicalParams(omega=0.0, nchi_fixed=0.0)
    times = [0.0, 0.02, 0.05]
    ens = run_ensemble(
        s,
        tnt_sequence(p, 0.05),
        (JumpChannel(1, 0, gamma),),
        NoiseModel(),
        n_traj=10**4,
        master_seed=17,
        sample_times=times,
        dt=1e-4,
    )
    for t, mean_n in zip(ens.times, ens.mean_n):
        expect = n0 * math.exp(-gamma * t)
        var = expect * (1 - math.exp(-gamma * t))  # binomial thinning per atom
        se = math.sqrt(max(var, 1e-12) / 10**4)
        assert abs(mean_n - expect) <= 3 * se + 1e-9
    assert np.all(np.diff(ens.mean_n) <= 0)


def test_zero_rate_ensemble_matches_unitary(tnt_params):
    n = 80
    s0 = prepared_state(tnt_params, n)
    times = [0.0, 2e-3, 5e-3, 8e-3]
    ens = run_ensemble(
        s0, tnt_sequence(tnt_params, 8e-3), (), NoiseModel(), n_traj=3,
        master_seed=5, sample_times=times,
    )
    ham = build_hamiltonian(tnt_params, n)
    for i, t in enumerate(times):
        ref = moments(evolve_under(s0, ham, t, method="diag"))
        assert np.allclose(ens.mean_j[i], ref.mean, atol=1e-8 * n)
        ref_second = ref.covariance + np.outer(ref.mean, ref.mean)
        got = ens.second_moments[i]
        expect6 = [ref_second[0, 0], ref_second[1, 1], ref_second[2, 2],
                   ref_second[1, 2], ref_second[0, 1], ref_second[0, 2]]
        assert np.allclose(got, expect6, atol=1e-7 * n * n)


def test_echo_suppresses_static_detuning_spread():
    # chi = 0: each trajectory stays a coherent state (quantum Var(Jy) = N/4
    # exactly) but precesses by its own detuning offset, so the offset shows
    # up as excess mixture variance; the pi echo rewinds the accumulated
    # phase and removes that excess entirely
    n = 60
    p = PhysicalParams(omega=0.0, nchi_fixed=0.0)
    noise = NoiseModel(sigma_delta=TWO_PI * 0.45)
    s0 = coherent_state(n, np.pi / 2, np.pi)
    kwargs = dict(channels=(), noise=noise, n_traj=256, master_seed=31, dt=1e-5)
    plain = run_ensemble(s0, tnt_sequence(p, 40e-3, echo=False), **kwargs)
    echoed = run_ensemble(s0, tnt_sequence(p, 40e-3, echo=True), **kwargs)
    excess_plain = plain.covariance_at(0)[1, 1] - n / 4
    excess_echo = echoed.covariance_at(0)[1, 1] - n / 4
    # analytic scale of the dephasing: (N/2)^2 sigma_phi^2 with
    # sigma_phi = sigma_delta * T
    sigma_phi = noise.sigma_delta * 40e-3
    assert excess_plain > 0.3 * (n / 2) ** 2 * sigma_phi**2
    assert abs(excess_echo) < 1e-6
    assert excess_plain / max(abs(excess_echo), 1e-9) > 1e3


def test_jump_bookkeeping_and_atom_conservation(tnt_params):
    s0 = prepared_state(tnt_params, 120)
    ens = run_ensemble(
        s0, tnt_sequence(tnt_params, 20e-3), DEFAULT_CHANNELS, NoiseModel(),
        n_traj=40, master_seed=2, store_states=True,
    )
    lost = sum(
        int(c) * (ch.p + ch.q) for c, ch in zip(ens.jump_counts, ens.channels)
    )
    assert ens.jump_counts.sum() > 0  # losses actually fired
    assert float(np.sum(120 - ens.final_atom_counts)) == lost
    assert ens.mean_n[-1] == pytest.approx(float(np.mean(ens.final_atom_counts)))
    # every stored state is normalized on its own manifold
    for i in range(40):
        dim = int(ens.final_atom_counts[i]) + 1
        nrm = np.linalg.norm(ens.final_amplitudes[i, :dim])
        assert nrm == pytest.approx(1.0, abs=1e-12)
        assert np.all(ens.final_amplitudes[i, dim:] == 0)


def test_ensemble_variances_nonnegative(lossy_curve):
    for point in lossy_curve:
        assert point.xi2_min >= 0.0
        assert point.xi2_max >= point.xi2_min


def test_mean_atom_number_non_increasing(lossy_curve):
    ns = [p.mean_n for p in lossy_curve]
    assert all(b <= a + 1e-9 for a, b in zip(ns, ns[1:]))


def test_lossy_squeezing_curve_shape(lossy_curve):
    # trajectory-averaged curve: minimum in the 10-20 ms window, squeezing
    # lost well before 30 ms
    db = np.array([to_db(p.xi2_s) for p in lossy_curve])
    times = np.array([p.time for p in lossy_curve])
    i_min = int(np.argmin(db))
    assert 10e-3 <= times[i_min] <= 20e-3
    assert db[-1] > db[i_min] + 3.0


def test_ensemble_csv_deterministic_and_thread_independent(tnt_params):
    s0 = prepared_state(tnt_params, 60)
    seq = tnt_sequence(tnt_params, 5e-3)
    blobs = []
    for threads in (1, 2, 4):
        ens = run_ensemble(
            s0, seq, DEFAULT_CHANNELS, NoiseModel(sigma_delta=TWO_PI * 0.45),
            n_traj=16, master_seed=909, threads=threads,
        )
        buf = io.StringIO()
        ens.to_csv(buf)
        blobs.append(buf.getvalue())
    assert blobs[0] == blobs[1] == blobs[2]


def test_experiment_mode_band_at_15ms(tnt_params):
    # pulsed preparation, finite echo, detuning noise and default losses:
    # the 15 ms spin squeezing lands in the expected qualitative band
    pts = ensemble_sweep(
        tnt_params,
        500,
        [15e-3],
        channels=DEFAULT_CHANNELS,
        noise=NoiseModel(sigma_delta=TWO_PI * 0.45),
        n_traj=200,
        master_seed=7,
        echo=True,
        pulsed=True,
        pulse_omega=TWO_PI * 340.0,
    )
    db = to_db(pts[0].xi2_s)
    print(f"experiment-mode xi2_S at 15 ms: {db:.2f} dB")
    assert -10.0 < db < -5.0
