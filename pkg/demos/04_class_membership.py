"""Function-class membership: which test functions a member supports.

Each order k of the bounds needs E[q^k (g^(k))^2] (Gram class) or
E[q^k |g^(k)|] (outer-product class) to be finite.  The checker classifies
truncated expectations over expanding windows: geometric decay of the
increments means finite, anything slower means divergent.  The logit
function against Beta laws is the classic boundary case.
"""

from varbounds import (EngineConfig, FunctionTuple, bound_report, catalog,
                       check_class, parse_function)

cfg = EngineConfig()
logit = parse_function("log(x) - log(1-x)")
g = FunctionTuple([parse_function("x"), parse_function("x^2"), logit])

for a, b in ((2.0, 3.0), (0.5, 0.5), (5.0, 1.0)):
    spec = catalog("beta", {"a": a, "b": b})
    report = check_class(spec, FunctionTuple([logit]), 1, "H", cfg)
    verdict = "in class" if report.ok else f"fails at (i,k)={report.failures()}"
    print(f"beta({a},{b}): logit {verdict}")

# the pipeline can drop failing functions instead of aborting
print()
for a, b in ((2.0, 3.0), (0.5, 0.5)):
    spec = catalog("beta", {"a": a, "b": b})
    report = bound_report(spec, g, 1, cfg, theorems=("poincare",),
                          class_policy="drop")
    print(f"beta({a},{b}): kept {report.p} of 3 functions "
          f"(dropped {report.provenance['dropped_functions']}), "
          f"verdict {'PASS' if report.passed else 'FAIL'}")

# heavy-tailed members cut the usable polynomial degree: this one has
# density ~ (0.3 x^2 + 1)^(-8/3), so only moments below 4.33 exist
import math  # noqa: E402

import numpy as np  # noqa: E402
from scipy import integrate  # noqa: E402

from varbounds import ContinuousIP, Quadratic  # noqa: E402

expo = -(1.0 / 0.6 + 1.0)
norm = 1.0 / integrate.quad(lambda x: (0.3 * x * x + 1.0) ** expo,
                            -np.inf, np.inf)[0]
heavy = ContinuousIP(0.0, Quadratic(0.3, 0.0, 1.0), (-math.inf, math.inf),
                     lambda x: norm * (0.3 * np.asarray(x) ** 2 + 1.0) ** expo,
                     None, "heavy-tail")
print()
for expr in ("x^2", "x^3"):
    report = check_class(heavy, FunctionTuple([parse_function(expr)]), 1,
                         "H", cfg)
    print(f"heavy-tail member (delta=0.3): {expr} "
          f"{'in class' if report.ok else 'diverges'}")
