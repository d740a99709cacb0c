# The reference field (sin z, cos z, 0): its curl, its factor and its two invariants.
import numpy as np

from beltrami import get_example, curl, beltrami_residual
from beltrami.verify import nambu_identity_check

b0 = get_example("b0")
w = b0.field
print(w)
print("curl w =", curl(w))

pts = b0.samples(100)
print(beltrami_residual(w, pts, expected_hhat=b0.expected_hhat))

# theta = z and L = x cos z - y sin z are constant along the flow,
# and grad theta x grad L reproduces hhat w.
theta, L = b0.invariants
print("max |hhat w - grad z x grad L| =", nambu_identity_check(w, b0.triple, pts))

from beltrami import trace_streamline, StepControl, invariant_drift

s = trace_streamline(w, (1.0, 0.0, 0.0), 10.0, StepControl(rtol=1e-10, atol=1e-10), triple=b0.triple)
print("trace ends at", np.round(s.points[-1], 12), "after", s.accepted, "steps")
print("drift", invariant_drift(s))
