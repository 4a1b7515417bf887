import time
import numpy as np
from tntsim import PhysicalParams, coherent_state
from tntsim.analysis import to_db
from tntsim.mcwf import DEFAULT_CHANNELS, NoiseModel, run_ensemble
from tntsim.protocols import ensemble_sweep, ideal_sweep, prepared_state
from tntsim.sequences import tnt_sequence

TWO_PI = 2 * np.pi
params = PhysicalParams(omega=TWO_PI * 19.0, nchi_fixed=TWO_PI * 30.0)
N = 500

# zero-rate reproduction check at a few times near the optimum
times = [16e-3, 18e-3, 20e-3]
ideal = ideal_sweep(params, N, times, cos_method="protocol")
t0 = time.time()
mc = ensemble_sweep(
    params, N, times, channels=(), noise=NoiseModel(), n_traj=1, master_seed=1,
    cos_method="protocol", dt=2.5e-7,
)
t1 = time.time()
print(f"zero-rate per-time ensembles: {t1-t0:.1f}s")
for pi, pm in zip(ideal, mc):
    d_ideal = to_db(pi.xi2_s)
    d_mc = to_db(pm.xi2_s)
    print(f"t={pi.time*1e3:.0f}ms ideal {d_ideal:.8f} dB  mcwf {d_mc:.8f} dB  diff {abs(d_ideal-d_mc):.2e} dB")

# lossy smoke run timing: one pass over [2..30] ms
t0 = time.time()
loss_times = np.arange(2, 31, 2) * 1e-3
pts = ensemble_sweep(
    params, N, loss_times, channels=DEFAULT_CHANNELS, noise=NoiseModel(),
    n_traj=100, master_seed=11, cos_method="moments",
)
t1 = time.time()
print(f"\nlossy 100-traj sweep to 30 ms: {t1-t0:.1f}s")
for p in pts:
    print(f"  t={p.time*1e3:4.0f} ms  xi2_S={to_db(p.xi2_s):8.3f} dB  N={p.mean_n:.1f}")
