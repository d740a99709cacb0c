"""Built-in Beltrami fields with their known factors, divergences and invariants.

Each entry stores the field in the closed form it is usually written in, an
independent coordinate triple that generates it, and the expected
proportionality factor and divergence. Angular coordinates use ``atan2``; the
branch cut along the negative x-axis is excluded by the guard.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .fields import Guard, ScalarField, VectorField, sample_points
from .frames import CUT_GUARD, PHI, R_CYL, R_SPH, OrthoTriple

__all__ = ["CatalogEntry", "get_example", "list_examples", "EXAMPLE_IDS"]

EXAMPLE_IDS = ("b0", "abc", "ex1", "ex2", "ex3", "ex4", "ex5", "ex6", "ex7", "ex8")


@dataclass
class CatalogEntry:
    id: str
    field: VectorField
    triple: OrthoTriple | None
    expected_hhat: ScalarField
    expected_div: ScalarField
    invariants: tuple | None
    guard: Guard
    box: tuple
    notes: str = ""
    trace_guard: Guard = field(default_factory=Guard)

    def samples(self, n=200, seed=None):
        return sample_points(n, self.box, self.guard, seed)

    def trace_seeds(self, n=5, seed=None):
        # seeds live in the core of the box so short excursions stay admissible
        core = tuple((0.5 * (a + b) - 0.35 * (b - a), 0.5 * (a + b) + 0.35 * (b - a)) for a, b in self.box)
        return sample_points(n, core, self.guard & self.trace_guard, seed)


def _entry(id, comps, triple, hhat, div, guard="none", box=((-1, 1),) * 3, notes="", trace_guard="none"):
    guard = Guard(guard)
    w = VectorField(comps, guard, name=id)
    inv = None
    if triple is not None:
        ell, psi, theta = triple
        t = OrthoTriple(ScalarField(ell, guard), ScalarField(psi, guard), ScalarField(theta, guard),
                        name=id, box=box)
        inv = (t.theta, t.L_theta())
        triple = t
    return CatalogEntry(id, w, triple, ScalarField(hhat, guard), ScalarField(div, guard), inv, guard,
                        tuple(tuple(float(v) for v in b) for b in box), notes, Guard(trace_guard))


def _b0():
    return _entry("b0", ("sin(z)", "cos(z)", "0"), ("x", "y", "z"), "1", "0", box=((-2, 2),) * 3,
                  notes="simplest nontrivial Beltrami field; invariants z and x cos z - y sin z")


def _abc(A=1.0, B=1.0, C=1.0):
    A, B, C = (repr(float(v)) for v in (A, B, C))
    comps = (f"{A}*sin(z) + {C}*cos(y)", f"{B}*sin(x) + {A}*cos(z)", f"{C}*sin(y) + {B}*cos(x)")
    return _entry(f"abc({A},{B},{C})", comps, None, "1", "0", box=((-3.14, 3.14),) * 3,
                  notes="Arnold-Beltrami-Childress flow; strong Beltrami with factor 1")


def _ex1():
    guard = f"{R_CYL} >= 0.05 and {CUT_GUARD}"
    # w = cos z grad(log r) + sin z grad(phi)
    comps = (f"cos(z)*x/(x^2+y^2) - sin(z)*y/(x^2+y^2)", f"cos(z)*y/(x^2+y^2) + sin(z)*x/(x^2+y^2)", "0")
    return _entry("ex1", comps, (PHI, f"log({R_CYL})", "z"), "-1", "0", guard, ((-2, 2),) * 3,
                  notes="cylindrical chart; invariants z and phi cos z - log r sin z",
                  trace_guard=f"{R_CYL} <= 2.5")


def _ex2():
    guard = f"{R_CYL} >= 0.05 and {CUT_GUARD}"
    # w = sin(phi) grad z + cos(phi) grad r
    comps = (f"cos({PHI})*x/{R_CYL}", f"cos({PHI})*y/{R_CYL}", f"sin({PHI})")
    return _entry("ex2", comps, ("z", R_CYL, PHI), f"1/{R_CYL}", f"cos({PHI})/{R_CYL}", guard,
                  ((-2, 2),) * 3, notes="non-solenoidal; invariants phi and z cos phi - r sin phi",
                  trace_guard=f"{R_CYL} <= 3 and z <= 3 and z >= -3")


def _ex3():
    guard = f"y >= 0.05"
    u, v = f"sqrt({R_CYL} + x)", f"sqrt({R_CYL} - x)"
    # grad u = (1 + x/r, y/r) / (2u), grad v = (x/r - 1, y/r) / (2v)
    comps = (f"cos(z)*(x/{R_CYL} - 1)/(2*{v}) + sin(z)*(1 + x/{R_CYL})/(2*{u})",
             f"cos(z)*(y/{R_CYL})/(2*{v}) + sin(z)*(y/{R_CYL})/(2*{u})", "0")
    return _entry("ex3", comps, (u, v, "z"), "1", "0", guard, ((-2, 2), (0.05, 2), (-2, 2)),
                  notes="parabolic cylindrical chart, upper half-space y > 0 where the chart is oriented",
                  trace_guard=f"{R_CYL} <= 3")


def _ex4():
    guard = (f"{R_SPH} >= 0.05 and {R_CYL} >= 0.05 and sqrt({R_SPH} + z) >= 0.05 and "
             f"sqrt({R_SPH} - z) >= 0.05 and {CUT_GUARD}")
    xi, eta = f"sqrt({R_SPH} + z)", f"sqrt({R_SPH} - z)"
    # grad xi = (x/rho, y/rho, 1 + z/rho) / (2 xi), grad eta = (x/rho, y/rho, z/rho - 1) / (2 eta)
    c, s = f"cos({PHI})", f"sin({PHI})"
    comps = (f"{c}*(x/{R_SPH})/(2*{eta}) + {s}*(x/{R_SPH})/(2*{xi})",
             f"{c}*(y/{R_SPH})/(2*{eta}) + {s}*(y/{R_SPH})/(2*{xi})",
             f"{c}*(z/{R_SPH} - 1)/(2*{eta}) + {s}*(1 + z/{R_SPH})/(2*{xi})")
    return _entry("ex4", comps, (xi, eta, PHI), f"1/{R_CYL}",
                  f"(x/{eta} + y/{xi})/(2*{R_CYL}*{R_SPH})", guard, ((-2, 2),) * 3,
                  notes="parabolic chart; factor 1/r with r the cylindrical radius",
                  trace_guard=f"{R_SPH} <= 4")


def _ex5():
    theta = "exp(x+y)/sqrt(2)"
    comps = (f"cos({theta})/sqrt(2)", f"-cos({theta})/sqrt(2)", f"sin({theta})")
    return _entry("ex5", comps, ("z", "(x-y)/sqrt(2)", theta), "exp(x+y)", "0",
                  notes="factor exp(x+y) from the planar eikonal solution",
                  trace_guard="z <= 40 and z >= -40")


def _ex6():
    theta = "sin(x-y)/sqrt(2)"
    ell, psi = "(z-x-y)/sqrt(3)", "(x+y+2*z)/sqrt(6)"
    comps = (f"cos({theta})/sqrt(6) - sin({theta})/sqrt(3)",
             f"cos({theta})/sqrt(6) - sin({theta})/sqrt(3)",
             f"2*cos({theta})/sqrt(6) + sin({theta})/sqrt(3)")
    return _entry("ex6", comps, (ell, psi, theta), "-cos(x-y)", "0", "cos(x-y) >= 0.05",
                  ((-0.7, 0.7),) * 3, notes="factor -cos(x-y); guard keeps one sign of the Jacobian")


def _ex7():
    s = "(x+y+z)"
    theta = f"({s}*atan({s}) - 0.5*log(1 + {s}^2))/sqrt(3)"
    ell, psi = "(x-y)/sqrt(2)", "(x+y-2*z)/sqrt(6)"
    comps = (f"cos({theta})/sqrt(6) + sin({theta})/sqrt(2)",
             f"cos({theta})/sqrt(6) - sin({theta})/sqrt(2)",
             f"-2*cos({theta})/sqrt(6)")
    return _entry("ex7", comps, (ell, psi, theta), f"atan({s})", "0", f"{s} >= 0.05",
                  notes="factor atan(x+y+z); sampled where x+y+z > 0 so the Jacobian keeps one sign")


def _ex8():
    comps = ("-cos(z)*exp(x)*cos(y) + sin(z)*exp(x)*sin(y)",
             "cos(z)*exp(x)*sin(y) + sin(z)*exp(x)*cos(y)", "0")
    return _entry("ex8", comps, ("exp(x)*sin(y)", "-exp(x)*cos(y)", "z"), "1", "0",
                  notes="harmonic-conjugate chart; speed exp(x) so traces are cut at x = 1.5",
                  trace_guard="x <= 1.5")


_BUILDERS = {"b0": _b0, "ex1": _ex1, "ex2": _ex2, "ex3": _ex3, "ex4": _ex4, "ex5": _ex5,
             "ex6": _ex6, "ex7": _ex7, "ex8": _ex8}

_ABC = re.compile(r"^abc(?:\(\s*([^,]+),\s*([^,]+),\s*([^)]+)\))?$")


def get_example(id: str, **params) -> CatalogEntry:
    """Catalog lookup: ``b0``, ``ex1`` ... ``ex8``, ``abc`` or ``abc(A,B,C)``."""
    key = id.strip().lower()
    m = _ABC.match(key)
    if m:
        if m.group(1) is not None:
            params = dict(zip("ABC", (float(g) for g in m.groups())))
        return _abc(**params)
    try:
        return _BUILDERS[key]()
    except KeyError:
        raise KeyError(f"unknown example {id!r}; choose from {', '.join(EXAMPLE_IDS)}") from None


def list_examples():
    return [get_example(i) for i in EXAMPLE_IDS]
