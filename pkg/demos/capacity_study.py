"""
Capacity of the inner set in growing annuli
===========================================

The Dirichlet energy ell_n of the potential equal to 1 near the origin and 0
at rho = n tends to zero exactly for recurrent domains.  A cylinder decays
like 1/log n, a transient horn levels off.
"""
from horncrit import DomainSpec, make_profile
from horncrit.capacity import capacity_sequence

n = [4, 8, 16, 32]
cases = {"cylinder": DomainSpec(1, 2, make_profile("constant", a=1.0)),
         "horn 0.75": DomainSpec(1, 2, make_profile("power", gamma=0.75))}
for name, dom in cases.items():
    res = capacity_sequence(dom, n)
    ell = "  ".join(f"{v:.4f}" for v in res.ell)
    print(f"{name:<10s} ell_n: {ell}")
    print(f"{'':<10s} best model {res.best}, error ratio {res.fits['error_ratio']:.1f},"
          f" verdict {res.verdict}")
