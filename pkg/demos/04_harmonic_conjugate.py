# Completing a planar harmonic function to an orthogonal triple.
import numpy as np

from beltrami import OrthoTriple, ScalarField, build_beltrami, harmonic_conjugate, get_example
from beltrami.fields import sample_points
from beltrami.verify import beltrami_residual

ell = ScalarField("exp(x)*sin(y)")
psi = harmonic_conjugate(ell)           # psi(0,0,0) = 0
pts = sample_points(200, ((-1, 1), (-1, 1), (-1, 1)))
print("psi + exp(x)cos(y) is constant:", np.ptp(psi(pts) + np.exp(pts[:, 0]) * np.cos(pts[:, 1])))

t = OrthoTriple(ell, psi, ScalarField("z"))
w = build_beltrami(t).w
print(beltrami_residual(w, pts, expected_hhat="1"))
print("matches catalog ex8:", np.max(np.abs(w(pts) - get_example("ex8").field(pts))))
