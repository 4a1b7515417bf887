import time
import numpy as np
from tntsim.spins import coherent_state, overlap
from tntsim.hamiltonian import PhysicalParams, build_hamiltonian, evolve, default_dt

TWO_PI = 2 * np.pi
params = PhysicalParams(omega=TWO_PI * 19.0, nchi_fixed=TWO_PI * 30.0)
N = 500
state0 = coherent_state(N, np.pi / 2, np.pi)
ham = build_hamiltonian(params, N)
print("||H||_inf:", ham.inf_norm(), " default dt:", default_dt(ham))

t0 = time.time()
s_rk4 = evolve(state0, params, 18e-3, method="rk4")
t1 = time.time()
s_diag = evolve(state0, params, 18e-3, method="diag")
t2 = time.time()
print(f"rk4 18 ms: {t1-t0:.2f}s (incl jit), diag: {t2-t1:.2f}s")
print("overlap deficit rk4 vs diag:", 1 - overlap(s_rk4, s_diag))

# timing after jit warmup
t0 = time.time()
s_rk4 = evolve(state0, params, 40e-3, method="rk4")
t1 = time.time()
n_steps = 40e-3 / default_dt(ham)
print(f"rk4 40 ms: {t1-t0:.2f}s for {n_steps:.0f} steps -> {(t1-t0)/n_steps*1e6:.2f} us/step")
print("projected 500-traj 40 ms single-core:", (t1 - t0) * 500 / 60, "min")

# norm drift per ms check (no per-step renorm): evolve 1 ms, check |norm-1|
from tntsim import _kernels
psi = state0.amplitudes.copy()
dc = (ham.diag - ham.expectation(state0)) - 0.5j * ham.decay
nrm = _kernels.rk4_run(dc, ham.off.astype(np.complex128), psi, 1e-6, 1000, False)
print("norm drift over 1 ms:", abs(nrm - 1))
