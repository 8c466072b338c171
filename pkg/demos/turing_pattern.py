"""Linear Turing prediction against a full simulation at delta = 0.132, d = 25.

The band of growing wavenumbers and the fastest mode come from the
dispersion relation; a run from small noise then shows how many peaks the
stationary pattern actually has.  Takes about half a minute.

    python demos/turing_pattern.py
"""

from bazykin.core_model import Params
from bazykin.pde import Grid, PdeConfig, count_peaks, initial_condition, simulate, steady_state_detect
from bazykin.turing import critical_diffusion, instability_band

p = Params(delta=0.132)
L, d = 100.0, 25.0
a = instability_band(p, d, L)
print(f"d_cr = {critical_diffusion(p):.3f}")
print(f"unstable k^2 in ({a.r_minus:.4f}, {a.r_plus:.4f}), fastest k^2 = {a.kmax2:.4f}")
print(f"modes {a.unstable_modes[0]}..{a.unstable_modes[-1]}, predicted peaks {a.predicted_peaks:.2f}")

g = Grid.from_spacing(L, 0.25)
cfg = PdeConfig(d=d, dt=0.01, t_end=8000.0, snapshot_stride=10000)
res = simulate(p, cfg, initial_condition("SmallRandom", p, g, seed=1))
print(f"\nafter t = {res.times[-1]:g}: {steady_state_detect(res, tol=1e-3, window=20).value}, "
      f"{count_peaks(res.final.u):g} peaks (half-weight ends: {count_peaks(res.final.u, boundary_weight=0.5):g})")
row = "".join("#" if u > res.final.u.mean() else "." for u in res.final.u[::5])
print(row)
