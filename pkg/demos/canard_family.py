"""Walk delta down through the Hopf point at chi = 6, eps = 0.01 and watch
the small canard cycle blow up into a relaxation oscillation.

    python demos/canard_family.py
"""

from bazykin.bifurcation import cycle_kind, hopf_threshold
from bazykin.core_model import Params, coexistence
from bazykin.errors import UnsettledError
from bazykin.ode import detect_cycle
from bazykin.slow_fast import fold_point

p = Params(eps=0.01)
fp = fold_point(p.replace(delta=0.1445))
h = hopf_threshold(p.replace(delta=0.1445), "delta", (0.13, 0.16))
print(f"fold at u={fp.u_f:.3f}, canard point delta_f={fp.delta_f:.6f}")
print(f"Hopf at delta_H={h.delta:.7f}, l1={h.l1:+.3g} (supercritical)\n")

print(" delta      period   u_min      u_max   shape")
for delta in (0.14445, 0.14443, 0.14442, 0.1444, 0.1443):
    q = p.replace(delta=delta)
    seed = (q.chi, coexistence(q).point.v)
    try:
        c = detect_cycle(q, seed, horizon=20000.0, probe=False)
    except UnsettledError:
        print(f"{delta:.5f}   -- orbit settles on E* --")
        continue
    print(f"{delta:.5f}  {c.period:8.2f}  {c.u_min:.3e}  {c.u_max:6.3f}   {cycle_kind(q, c).value}")
