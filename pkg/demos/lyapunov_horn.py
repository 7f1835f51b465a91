"""
Lyapunov functions for a horn
=============================

Build f+ and f- for the horn H(s) = (1 + s)**gamma in R^3 on both sides of
the critical exponent 1/2 and check the sign of the half-Laplacian of
u = f(s(rho, r)).
"""
import numpy as np

from horncrit import DomainSpec, make_profile
from horncrit import lyapunov as L

for gamma in (0.4, 0.6):
    dom = DomainSpec(1, 2, make_profile("power", gamma=gamma))
    s0 = L.admissible_s0(dom)
    print(f"gamma={gamma}  s0={s0:.3g}")
    for sign in ("plus", "minus"):
        f = L.build_f(dom, sign, s0)
        rep = L.verify_delta_u_sign(f)
        s = np.geomspace(s0, 1e9, 5)
        vals = ", ".join(f"{v:.3g}" for v in f.evaluate(s)[0])
        print(f"   f{'+' if sign == 'plus' else '-'}: {f.growth:<9s} f = [{vals}]"
              f"  sign violation {rep.max_violation:.1e}")

# ratio B/A at a few points against its envelopes
dom = DomainSpec(1, 2, make_profile("power", gamma=0.5))
s = np.array([10.0, 1e3, 1e5])
gp, gm = L.gamma_bounds(dom, s)
for si, lo, hi in zip(s, gm, gp):
    mid = L.eval_ABC(dom, 0.5 * float(dom.profile(si)), si).ratio
    print(f"s={si:8.0f}  {lo:.5g} <= {mid:.5g} <= {hi:.5g}")
