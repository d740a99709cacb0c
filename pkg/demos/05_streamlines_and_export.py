# Trace a few streamlines of the parabolic cylindrical field and write grid/trace files.
import os
import tempfile

import numpy as np

from beltrami import get_example, trace_streamline, StepControl, invariant_drift
from beltrami.io import sample_grid, write_csv, write_vtk

ex3 = get_example("ex3")
out = tempfile.mkdtemp(prefix="beltrami-")

for i, x0 in enumerate(ex3.trace_seeds(3)):
    s = trace_streamline(ex3.field, x0, 20.0, StepControl(rtol=1e-10, atol=1e-10), triple=ex3.triple,
                         guard=ex3.trace_guard)
    d = invariant_drift(s)
    print(f"seed {i}: {s.status:10s} t={s.times[-1]:7.3f}  theta drift {d['theta_drift']:.1e}  "
          f"L drift {d['L_drift']:.1e}")
    write_csv(s, os.path.join(out, f"ex3_trace_{i}.csv"))

g = sample_grid(ex3.field, ex3.box, 21, extras=("hhat", "theta", "L_theta"), triple=ex3.triple)
write_vtk(g, os.path.join(out, "ex3.vtk"))
print(f"{g.n_nodes} nodes, {int(g.mask.sum())} masked; files in {out}")
