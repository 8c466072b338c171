"""Transient duration just above the Turing threshold at chi = 12.25.

A small bump on the homogeneous state grows into irregular spatio-temporal
oscillations that eventually give way to the final regime.  Durations are
long near d_cr but not monotone in d: some runs sit in a metastable
oscillation for thousands of time units before collapsing.  Small domain
and few points so it finishes in a few minutes; the `fig9` CLI preset runs
the full scan.

    python demos/long_transients.py
"""

from bazykin.core_model import Params
from bazykin.transients import powerlaw_fit, transient_scan
from bazykin.turing import critical_diffusion

p = Params(chi=12.25)
print(f"d_cr = {critical_diffusion(p):.4f}")
pts = transient_scan(p, [7.2, 7.6, 8.0, 9.0, 10.0], L=100.0, t_end=6000.0)
for s in pts:
    flag = "" if s.settled else "  (still moving, lower bound)"
    print(f"d = {s.d:5.2f}   d - d_cr = {s.distance:.3f}   T = {s.duration:8.1f}{flag}")
good = [(s.distance, s.duration) for s in pts if s.settled and s.duration > 0]
if len(good) >= 3:
    fit = powerlaw_fit(good)
    print(f"\nT ~ {fit.coefficient:.3g} |d - d_cr|^{fit.exponent:.3f}   (r^2 = {fit.r2:.3f})")
