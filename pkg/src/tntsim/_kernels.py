"""Numba kernels: tridiagonal RK4 stepping, spin moments, trajectory ensembles.

The collective-spin Hamiltonian is tridiagonal in the occupation basis, so a
state step is O(N).  Trajectories are embarrassingly parallel; each one owns
an independent xoshiro256++ stream derived from (master_seed, trajectory
index), which makes ensembles bit-reproducible for any thread count.
"""

import numpy as np
from numba import njit, prange

# ---------------------------------------------------------------------------
# counter-seeded RNG (splitmix64 seeding, xoshiro256++ stream)
# ---------------------------------------------------------------------------

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)
_TRAJ_MIX = _U64(0xD1B54A32D192ED03)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


@njit(cache=True, inline="always")
def _splitmix64(s):
    s = s + _GOLDEN
    z = s
    z = (z ^ (z >> _U64(30))) * _MIX1
    z = (z ^ (z >> _U64(27))) * _MIX2
    z = z ^ (z >> _U64(31))
    return s, z


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << _U64(k)) | (x >> _U64(64 - k))


@njit(cache=True)
def _rng_init(master_seed, traj_index):
    s = _U64(master_seed) ^ ((_U64(traj_index) + _U64(1)) * _TRAJ_MIX)
    state = np.empty(4, dtype=np.uint64)
    for i in range(4):
        s, z = _splitmix64(s)
        state[i] = z
    if state[0] | state[1] | state[2] | state[3] == _U64(0):
        state[0] = _U64(1)
    return state


@njit(cache=True, inline="always")
def _rng_next(state):
    result = _rotl(state[0] + state[3], 23) + state[0]
    t = state[1] << _U64(17)
    state[2] ^= state[0]
    state[3] ^= state[1]
    state[1] ^= state[2]
    state[0] ^= state[3]
    state[2] ^= t
    state[3] = _rotl(state[3], 45)
    return result


@njit(cache=True, inline="always")
def _rng_uniform(state):
    return float(_rng_next(state) >> _U64(11)) * _INV53


@njit(cache=True)
def _rng_gauss(state):
    u1 = 1.0 - _rng_uniform(state)  # in (0, 1]
    u2 = _rng_uniform(state)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


# ---------------------------------------------------------------------------
# tridiagonal Schroedinger stepping
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _apply_gen(dc, off, x, out, dim):
    """out = -i H x for Hermitian-plus-decay H given by complex diagonal dc,
    upper off-diagonal off (lower is its conjugate)."""
    if dim == 1:
        out[0] = -1j * (dc[0] * x[0])
        return
    out[0] = -1j * (dc[0] * x[0] + off[0] * x[1])
    for k in range(1, dim - 1):
        out[k] = -1j * (dc[k] * x[k] + off[k] * x[k + 1] + np.conj(off[k - 1]) * x[k - 1])
    out[dim - 1] = -1j * (dc[dim - 1] * x[dim - 1] + np.conj(off[dim - 2]) * x[dim - 2])


@njit(cache=True)
def _rk4_one_step(dc, off, psi, dt, dim, k1, k2, k3, k4, y):
    _apply_gen(dc, off, psi, k1, dim)
    half = 0.5 * dt
    for i in range(dim):
        y[i] = psi[i] + half * k1[i]
    _apply_gen(dc, off, y, k2, dim)
    for i in range(dim):
        y[i] = psi[i] + half * k2[i]
    _apply_gen(dc, off, y, k3, dim)
    for i in range(dim):
        y[i] = psi[i] + dt * k3[i]
    _apply_gen(dc, off, y, k4, dim)
    sixth = dt / 6.0
    for i in range(dim):
        psi[i] = psi[i] + sixth * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i])


@njit(cache=True)
def rk4_run(dc, off, psi, dt, n_steps, renorm_each):
    """Advance psi by n_steps fixed RK4 steps; returns the final norm
    (pre-renormalization norm of the last step when renorm_each is set)."""
    dim = psi.shape[0]
    k1 = np.empty(dim, dtype=np.complex128)
    k2 = np.empty(dim, dtype=np.complex128)
    k3 = np.empty(dim, dtype=np.complex128)
    k4 = np.empty(dim, dtype=np.complex128)
    y = np.empty(dim, dtype=np.complex128)
    nrm = 1.0
    for _ in range(n_steps):
        _rk4_one_step(dc, off, psi, dt, dim, k1, k2, k3, k4, y)
        if renorm_each:
            acc = 0.0
            for i in range(dim):
                acc += psi[i].real ** 2 + psi[i].imag ** 2
            nrm = np.sqrt(acc)
            inv = 1.0 / nrm
            for i in range(dim):
                psi[i] = psi[i] * inv
    if not renorm_each:
        acc = 0.0
        for i in range(dim):
            acc += psi[i].real ** 2 + psi[i].imag ** 2
        nrm = np.sqrt(acc)
    return nrm


@njit(cache=True)
def spin_moments_10(psi, dim, n_cur, out):
    """Write (Jx, Jy, Jz, xx, yy, zz, yz, xy, xz, N) second moments into out.

    Second moments are symmetrized, <{Ja,Jb}>/2, not covariances.
    """
    half_n = 0.5 * n_cur
    jz = 0.0
    jz2 = 0.0
    for k in range(dim):
        p = psi[k].real ** 2 + psi[k].imag ** 2
        m = k - half_n
        jz += m * p
        jz2 += m * m * p
    jp_re = 0.0
    jp_im = 0.0
    a_re = 0.0
    a_im = 0.0
    for k in range(dim - 1):
        s = np.sqrt((k + 1.0) * (n_cur - k))
        coh = np.conj(psi[k + 1]) * psi[k] * s
        jp_re += coh.real
        jp_im += coh.imag
        msum = 2.0 * (k - half_n) + 1.0  # m_k + m_{k+1}
        a_re += coh.real * msum
        a_im += coh.imag * msum
    jp2_re = 0.0
    jp2_im = 0.0
    for k in range(dim - 2):
        s2 = np.sqrt((k + 1.0) * (n_cur - k) * (k + 2.0) * (n_cur - k - 1.0))
        coh = np.conj(psi[k + 2]) * psi[k] * s2
        jp2_re += coh.real
        jp2_im += coh.imag
    j = half_n
    casimir = j * (j + 1.0)
    out[0] = jp_re
    out[1] = jp_im
    out[2] = jz
    out[3] = 0.5 * (jp2_re + casimir - jz2)
    out[4] = 0.5 * (-jp2_re + casimir - jz2)
    out[5] = jz2
    out[6] = 0.5 * a_im
    out[7] = 0.5 * jp2_im
    out[8] = 0.5 * a_re
    out[9] = n_cur


# ---------------------------------------------------------------------------
# trajectory machinery
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _chi_of(chi_mode, chi_value, n_cur):
    # mode 0: fixed N*chi product; mode 1: chi_value / sqrt(N)
    if chi_mode == 0:
        return chi_value / n_cur
    return chi_value / np.sqrt(n_cur)


@njit(cache=True, inline="always")
def _delta_of(delta_ext, delta_coeff, sqrt_nref, n_cur):
    return delta_ext - delta_coeff * (np.sqrt(n_cur) - sqrt_nref)


@njit(cache=True)
def _build_generator(dc, off, dim, n_cur, chi, delta, omega, axis_phase, decay, psi):
    """Fill dc (complex diagonal incl. -i/2 decay) and off for
    H = chi Jz^2 + delta Jz - omega (cos(axis_phase) Jx + sin(axis_phase) Jy).

    The Hermitian part is shifted by <psi|H|psi>, a pure global phase, which
    keeps RK4 phase and norm errors centered on the occupied energy shell.
    """
    half_n = 0.5 * n_cur
    phase = np.cos(axis_phase) + 1j * np.sin(axis_phase)
    for k in range(dim):
        m = k - half_n
        dc[k] = chi * m * m + delta * m
    for k in range(dim - 1):
        s = np.sqrt((k + 1.0) * (n_cur - k))
        off[k] = -0.5 * omega * s * phase
    for k in range(dim - 1, off.shape[0]):
        off[k] = 0.0
    e0 = 0.0
    for k in range(dim):
        e0 += dc[k].real * (psi[k].real ** 2 + psi[k].imag ** 2)
    for k in range(dim - 1):
        coh = np.conj(psi[k]) * psi[k + 1]
        e0 += 2.0 * (off[k] * coh).real
    for k in range(dim):
        dc[k] = dc[k] - e0 - 0.5j * decay[k]


@njit(cache=True)
def _channel_weights(psi, dim, n_cur, ch_p, ch_q, w):
    """w[j] = <L_j^dagger L_j> / rate_j: falling-factorial diagonal forms."""
    n_ch = ch_p.shape[0]
    for j in range(n_ch):
        p = ch_p[j]
        q = ch_q[j]
        acc = 0.0
        for k in range(dim):
            d = 1.0
            for i in range(p):
                d *= k - i
            for i in range(q):
                d *= (n_cur - k) - i
            if d > 0.0:
                acc += d * (psi[k].real ** 2 + psi[k].imag ** 2)
        w[j] = acc
    return w


@njit(cache=True)
def _decay_diagonal(decay, dim, n_cur, ch_p, ch_q, ch_rate):
    for k in range(dim):
        total = 0.0
        for j in range(ch_p.shape[0]):
            d = 1.0
            for i in range(ch_p[j]):
                d *= k - i
            for i in range(ch_q[j]):
                d *= (n_cur - k) - i
            if d > 0.0:
                total += ch_rate[j] * d
        decay[k] = total


@njit(cache=True)
def _apply_jump(psi, dim, n_cur, p, q):
    """Collapse onto the post-loss manifold: psi'_{k-p} ~ sqrt(d(k)) psi_k.
    Returns (new_dim, norm_before_renorm); psi is modified in place."""
    new_dim = dim - p - q
    for k in range(new_dim):
        kk = k + p
        d = 1.0
        for i in range(p):
            d *= kk - i
        for i in range(q):
            d *= (n_cur - kk) - i
        if d > 0.0:
            psi[k] = psi[kk] * np.sqrt(d)
        else:
            psi[k] = 0.0
    for k in range(new_dim, dim):
        psi[k] = 0.0
    acc = 0.0
    for k in range(new_dim):
        acc += psi[k].real ** 2 + psi[k].imag ** 2
    nrm = np.sqrt(acc)
    if nrm > 0.0:
        inv = 1.0 / nrm
        for k in range(new_dim):
            psi[k] = psi[k] * inv
    return new_dim, nrm


@njit(cache=True)
def _reverse_state(psi, dim):
    """pi rotation about x: index reversal up to a global phase."""
    i = 0
    j = dim - 1
    while i < j:
        tmp = psi[i]
        psi[i] = psi[j]
        psi[j] = tmp
        i += 1
        j -= 1


@njit(cache=True)
def _run_one_trajectory(
    psi,
    n0,
    seg_kind,
    seg_steps_total,
    seg_steps_full,
    seg_tail,
    seg_dt,
    seg_omega,
    seg_axis_phase,
    seg_angle,
    chi_mode,
    chi_value,
    delta_ext,
    delta_coeff,
    sqrt_nref,
    ch_p,
    ch_q,
    ch_rate,
    sigma_delta,
    sample_steps,
    rng_state,
    out_mom,
    out_jumps,
):
    dim0 = psi.shape[0]
    dim = n0 + 1
    n_cur = float(n0)
    n_ch = ch_p.shape[0]
    n_samples = sample_steps.shape[0]

    # one detuning offset per trajectory, drawn even when sigma is zero so the
    # stream layout does not depend on the noise setting
    eps = sigma_delta * _rng_gauss(rng_state)

    dc = np.empty(dim0, dtype=np.complex128)
    off = np.empty(max(dim0 - 1, 1), dtype=np.complex128)
    decay = np.zeros(dim0, dtype=np.float64)
    w = np.empty(max(n_ch, 1), dtype=np.float64)
    k1 = np.empty(dim0, dtype=np.complex128)
    k2 = np.empty(dim0, dtype=np.complex128)
    k3 = np.empty(dim0, dtype=np.complex128)
    k4 = np.empty(dim0, dtype=np.complex128)
    y = np.empty(dim0, dtype=np.complex128)

    global_step = 0
    sample_idx = 0
    for s in range(seg_kind.shape[0]):
        kind = seg_kind[s]
        if kind == 2:  # instant pi rotation about x
            _reverse_state(psi, dim)
            continue
        if kind == 3:  # instant rotation about z
            ang = seg_angle[s]
            half_n = 0.5 * n_cur
            for k in range(dim):
                m = k - half_n
                psi[k] = psi[k] * (np.cos(ang * m) - 1j * np.sin(ang * m))
            continue
        # evolution segment (kind 0 free / 1 pulse share the same generator form)
        chi = _chi_of(chi_mode, chi_value, n_cur)
        delta = _delta_of(delta_ext, delta_coeff, sqrt_nref, n_cur) + eps
        _decay_diagonal(decay, dim, n_cur, ch_p, ch_q, ch_rate)
        _build_generator(
            dc, off, dim, n_cur, chi, delta, seg_omega[s], seg_axis_phase[s], decay, psi
        )
        for step in range(seg_steps_total[s]):
            dt_step = seg_dt[s] if step < seg_steps_full[s] else seg_tail[s]
            while sample_idx < n_samples and sample_steps[sample_idx] == global_step:
                spin_moments_10(psi, dim, n_cur, out_mom[sample_idx])
                sample_idx += 1
            ptot = 0.0
            if n_ch > 0:
                _channel_weights(psi, dim, n_cur, ch_p, ch_q, w)
                for j in range(n_ch):
                    ptot += dt_step * ch_rate[j] * w[j]
            u = _rng_uniform(rng_state)
            if u < ptot:
                # reuse the same draw to pick the channel
                target = u / dt_step
                j = 0
                acc = ch_rate[0] * w[0]
                while acc < target and j + 1 < n_ch:
                    j += 1
                    acc += ch_rate[j] * w[j]
                dim, _ = _apply_jump(psi, dim, n_cur, ch_p[j], ch_q[j])
                n_cur = n_cur - ch_p[j] - ch_q[j]
                out_jumps[j] += 1
                chi = _chi_of(chi_mode, chi_value, n_cur)
                delta = _delta_of(delta_ext, delta_coeff, sqrt_nref, n_cur) + eps
                _decay_diagonal(decay, dim, n_cur, ch_p, ch_q, ch_rate)
                _build_generator(
                    dc, off, dim, n_cur, chi, delta, seg_omega[s], seg_axis_phase[s], decay, psi
                )
            else:
                _rk4_one_step(dc, off, psi, dt_step, dim, k1, k2, k3, k4, y)
                acc = 0.0
                for i in range(dim):
                    acc += psi[i].real ** 2 + psi[i].imag ** 2
                inv = 1.0 / np.sqrt(acc)
                for i in range(dim):
                    psi[i] = psi[i] * inv
            global_step += 1
    while sample_idx < n_samples and sample_steps[sample_idx] >= global_step:
        spin_moments_10(psi, dim, n_cur, out_mom[sample_idx])
        sample_idx += 1
    return dim


@njit(cache=True, parallel=True)
def ensemble_kernel(
    psi0,
    n0,
    seg_kind,
    seg_steps_total,
    seg_steps_full,
    seg_tail,
    seg_dt,
    seg_omega,
    seg_axis_phase,
    seg_angle,
    chi_mode,
    chi_value,
    delta_ext,
    delta_coeff,
    sqrt_nref,
    ch_p,
    ch_q,
    ch_rate,
    sigma_delta,
    sample_steps,
    master_seed,
    n_traj,
    out_mom,
    out_jumps,
    out_states,
    store_states,
):
    dim0 = psi0.shape[0]
    for t in prange(n_traj):
        rng_state = _rng_init(master_seed, t)
        psi = psi0.copy()
        dim = _run_one_trajectory(
            psi,
            n0,
            seg_kind,
            seg_steps_total,
            seg_steps_full,
            seg_tail,
            seg_dt,
            seg_omega,
            seg_axis_phase,
            seg_angle,
            chi_mode,
            chi_value,
            delta_ext,
            delta_coeff,
            sqrt_nref,
            ch_p,
            ch_q,
            ch_rate,
            sigma_delta,
            sample_steps,
            rng_state,
            out_mom[t],
            out_jumps[t],
        )
        if store_states:
            for i in range(dim):
                out_states[t, i] = psi[i]
            for i in range(dim, dim0):
                out_states[t, i] = 0.0
