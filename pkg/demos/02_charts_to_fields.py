# Beltrami fields from orthogonal charts: cylindrical, parabolic cylindrical, parabolic.
import numpy as np

from beltrami import OrthoTriple, ScalarField, build_beltrami, check_construction_conditions
from beltrami.frames import PHI, R_CYL, jacobian
from beltrami.verify import eigenvalue_residual

guard = f"{R_CYL} >= 0.05 and {R_CYL} + x >= 0.001"
# ell = phi, psi = log r, theta = z: all gradients orthogonal, |grad phi| = |grad log r| = 1/r
t = OrthoTriple(ScalarField(PHI, guard), ScalarField(f"log({R_CYL})", guard), ScalarField("z", guard),
                box=((-2, 2),) * 3)
print(check_construction_conditions(t, "1"))

c = build_beltrami(t)
print("sigma =", c.sigma, " factor =", c.factor)
pts = t.samples(200)
print("jacobian range", np.ptp(jacobian(t)(pts)), "sign", np.sign(jacobian(t)(pts)[0]))
print("curl w - factor w:", eigenvalue_residual(c.w, c.factor, pts))
print("curl w* + factor w*:", eigenvalue_residual(c.w_star, c.factor_star, pts))

# the same recipe on the parabolic chart gives a field whose factor is 1/r
from beltrami import get_example, beltrami_residual

ex4 = get_example("ex4")
c4 = build_beltrami(ex4.triple)
p4 = ex4.samples(200)
print("parabolic chart:", beltrami_residual(c4.w, p4, expected_hhat=f"1/{R_CYL}").to_dict()["passed"])
