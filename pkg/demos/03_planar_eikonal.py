# Factors that depend on one direction only: theta solves |grad theta| = g(n.x).
import math

import numpy as np

from beltrami import planar_frame, build_beltrami, ScalarField
from beltrami.fields import sample_points
from beltrami.verify import beltrami_residual

cube = ((-1, 1),) * 3
pts = sample_points(300, cube)

n = np.array([1.0, 1.0, 0.0]) / math.sqrt(2)
closed = planar_frame(n, "exp(sqrt(2)*s)", "exp(sqrt(2)*s)/sqrt(2)")
print("closed form theta:", closed.theta)

# no antiderivative: theta comes from a quadrature table with exact slopes
quad = planar_frame(n, "exp(sqrt(2)*s)", theta_at_zero=1 / math.sqrt(2))
print("quadrature vs closed form:", np.max(np.abs(quad.theta(pts) - closed.theta(pts))))

w = build_beltrami(quad).w
print(beltrami_residual(w, pts, expected_hhat="exp(x+y)"))

# cos changes sign inside the cube; allowed here, but the Jacobian sign is then
# only constant on half of it
n6 = np.array([1.0, -1.0, 0.0]) / math.sqrt(2)
t6 = planar_frame(n6, "cos(sqrt(2)*s)", on_sign_change="allow")
print("profile zeros near s =", t6.notes["sign_changes"])
