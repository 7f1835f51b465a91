"""
Recurrence thresholds for power-law horns and slabs
===================================================

Sweep the exponent of H(s) = (1 + s)**gamma across the critical value
(2 - l)/m and compare the integral-test verdict with the volume test.
"""
import numpy as np

from horncrit import DomainSpec, classify_positive_recurrence, classify_transience, make_profile

# horns have l = 1, slabs have m = 1
for l, m in [(1, 2), (1, 3), (2, 1), (3, 1)]:
    gc = (2.0 - l) / m
    print(f"l={l} m={m}  critical gamma {gc:+.3f}")
    for g in np.round(gc + np.array([-0.3, -0.15, 0.0, 0.15, 0.3]), 3):
        dom = DomainSpec(l, m, make_profile("power", gamma=g))
        tr = classify_transience(dom)
        vol = classify_positive_recurrence(dom)
        print(f"   gamma={g:+.3f}  {tr.verdict:<11s} volume: {vol.verdict}")

# the logarithmic slab sits exactly at the borderline of the power family
for g in (0.5, 1.0, 1.5):
    dom = DomainSpec(2, 1, make_profile("logpower", gamma=g))
    print(f"log slab gamma={g}: {classify_transience(dom).verdict}")
