"""Orthogonal coordinate triples and Beltrami fields built from them.

A triple ``(ell, psi, theta)`` that is orthogonal with ``|grad ell| = |grad psi|``
yields the pair::

    w      = cos(theta) grad psi + sin(theta) grad ell
    w_star = sin(theta) grad psi + cos(theta) grad ell

with ``curl w = sigma |grad theta| w`` and ``curl w_star = -sigma |grad theta| w_star``,
where ``sigma`` is the sign of the Jacobian ``grad ell . (grad psi x grad theta)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from . import expr as ex
from .expr import Expr, differentiate, simplify, substitute
from .fields import (Guard, ScalarField, VectorField, as_points, gradient, laplacian,
                     sample_points)
from .quadrature import polyline_integral

__all__ = [
    "OrthoTriple", "ConditionReport", "Construction", "ConditionError", "JacobianSignError",
    "ZeroCrossingError", "PathMismatchError",
    "check_construction_conditions", "check_representation_conditions",
    "build_beltrami", "build_beltrami_profile", "build_beltrami_ratio",
    "planar_frame", "harmonic_conjugate", "catalog_chart", "CHARTS",
    "jacobian", "tangent_basis", "tangent_identity_residual", "uses_quadrature",
]

SYMBOLIC_TOL = 1e-9
QUADRATURE_TOL = 1e-6
DEFAULT_BOX = ((-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0))


class ConditionError(ValueError):
    """A triple failed the conditions a construction requires."""


class JacobianSignError(ValueError):
    """The Jacobian of a triple changes sign (or vanishes) over the sample set."""


class ZeroCrossingError(ValueError):
    """An eikonal profile vanishes inside the working interval."""


class PathMismatchError(ValueError):
    """Two integration paths for a potential disagree."""


@dataclass
class OrthoTriple:
    """Candidate coordinate functions ``(ell, psi, theta)`` plus metadata.

    ``box`` is the sampling region used when no explicit points are given;
    ``alpha`` (optional) is the intended proportionality-factor magnitude.
    """

    ell: ScalarField
    psi: ScalarField
    theta: ScalarField
    jacobian_sign_hint: int | None = None
    name: str = ""
    alpha: ScalarField | None = None
    box: tuple = DEFAULT_BOX
    scale_factors: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ell = _sf(self.ell)
        self.psi = _sf(self.psi)
        self.theta = _sf(self.theta)
        if self.alpha is not None:
            self.alpha = _sf(self.alpha)

    @property
    def guard(self) -> Guard:
        return self.ell.guard & self.psi.guard & self.theta.guard

    def coordinates(self):
        return self.ell, self.psi, self.theta

    def L_theta(self) -> ScalarField:
        """The second invariant ``ell cos(theta) - psi sin(theta)``."""
        l, p, t = self.ell.expr, self.psi.expr, self.theta.expr
        return ScalarField(simplify(l * ex.cos(t) - p * ex.sin(t)), self.guard)

    def samples(self, n=64, seed=None):
        return sample_points(n, self.box, self.guard, seed)


def _sf(f) -> ScalarField:
    return f if isinstance(f, ScalarField) else ScalarField(f)


def uses_quadrature(t: OrthoTriple) -> bool:
    return not all(ex.is_grammar_expr(c.expr) for c in t.coordinates())


# ---------------------------------------------------------------------------
# condition checks


@dataclass
class ConditionReport:
    residuals: dict
    tolerance: float
    worst_points: dict

    @property
    def passed(self) -> dict:
        return {k: bool(v <= self.tolerance) for k, v in self.residuals.items()}

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    def __str__(self):
        rows = [f"{k:>24s}  {v:.3e}  {'pass' if v <= self.tolerance else 'FAIL'}"
                for k, v in self.residuals.items()]
        return "\n".join(rows + [f"tolerance {self.tolerance:g}"])


def _report(named, pts, tol):
    residuals, worst = {}, {}
    for name, vals in named.items():
        vals = np.abs(np.asarray(vals, float))
        i = int(np.argmax(vals))
        residuals[name] = float(vals[i])
        worst[name] = tuple(float(c) for c in pts[i])
    return ConditionReport(residuals, tol, worst)


def _grads(t: OrthoTriple, pts):
    g = t.guard
    gl = gradient(t.ell).with_guard(g)(pts)
    gp = gradient(t.psi).with_guard(g)(pts)
    gt = gradient(t.theta).with_guard(g)(pts)
    return gl, gp, gt


def _rowdot(a, b):
    return np.einsum("ij,ij->i", a, b)


def _points_for(t, points, n=64, seed=None):
    if points is None:
        return t.samples(n, seed)
    return t.guard.enforce(points)


def _default_tol(t, tol):
    if tol is not None:
        return tol
    return QUADRATURE_TOL if uses_quadrature(t) else SYMBOLIC_TOL


def check_construction_conditions(t: OrthoTriple, alpha=None, points=None, tol=None) -> ConditionReport:
    """Residuals of the eikonal/orthogonality system at ``points``.

    Conditions: ``|grad theta| = |alpha|``, ``|grad ell| = |grad psi|`` and the
    three pairwise orthogonality products.
    """
    alpha = _sf(alpha) if alpha is not None else t.alpha
    if alpha is None:
        raise ValueError("no proportionality factor given and the triple carries none")
    pts = _points_for(t, points)
    tol = _default_tol(t, tol)
    gl, gp, gt = _grads(t, pts)
    a = alpha(pts, check=False) if alpha.guard.text == "none" else alpha(pts)
    return _report({
        "eikonal |grad theta|-|alpha|": np.linalg.norm(gt, axis=1) - np.abs(a),
        "|grad ell|-|grad psi|": np.linalg.norm(gl, axis=1) - np.linalg.norm(gp, axis=1),
        "grad ell . grad psi": _rowdot(gl, gp),
        "grad ell . grad theta": _rowdot(gl, gt),
        "grad psi . grad theta": _rowdot(gp, gt),
    }, pts, tol)


def check_representation_conditions(t: OrthoTriple, points=None, tol=None) -> ConditionReport:
    """Residuals of the two (weaker than orthogonal) representation conditions."""
    pts = _points_for(t, points)
    tol = _default_tol(t, tol)
    gl, gp, gt = _grads(t, pts)
    th = t.theta(pts)
    c, s = np.cos(th), np.sin(th)
    cond_a = c * s * (_rowdot(gp, gp) - _rowdot(gl, gl)) - _rowdot(gl, gp) * (c * c - s * s)
    cond_b = s * _rowdot(gl, gt) + c * _rowdot(gp, gt)
    return _report({"(a) angle balance": cond_a, "(b) theta transversality": cond_b}, pts, tol)


def jacobian(t: OrthoTriple) -> ScalarField:
    """``grad ell . (grad psi x grad theta)`` as a field."""
    gl, gp, gt = (gradient(c).components for c in t.coordinates())
    cx = gp[1] * gt[2] - gp[2] * gt[1]
    cy = gp[2] * gt[0] - gp[0] * gt[2]
    cz = gp[0] * gt[1] - gp[1] * gt[0]
    return ScalarField(simplify(gl[0] * cx + gl[1] * cy + gl[2] * cz), t.guard)


def _sigma(t: OrthoTriple, points=None, n=64, seed=None) -> tuple[int, np.ndarray]:
    pts = _points_for(t, points, n=max(n, 9), seed=seed)
    if len(pts) < 9:
        raise ValueError("the Jacobian sign needs at least 9 sample points")
    gl, gp, gt = _grads(t, pts)
    h = _rowdot(gl, np.cross(gp, gt))
    if np.any(h == 0) or not (np.all(h > 0) or np.all(h < 0)):
        raise JacobianSignError(
            f"Jacobian changes sign or vanishes over the samples (min {h.min():.3g}, max {h.max():.3g})")
    sigma = 1 if h[0] > 0 else -1
    if t.jacobian_sign_hint is not None and t.jacobian_sign_hint != sigma:
        raise JacobianSignError(f"sampled Jacobian sign {sigma} contradicts hint {t.jacobian_sign_hint}")
    return sigma, h


class Construction(NamedTuple):
    """Output of the builders: fields, sign and expected proportionality factors."""

    w: VectorField
    w_star: VectorField | None
    sigma: int
    factor: ScalarField
    factor_star: ScalarField | None


def _combo(ca: Expr, ga, cb: Expr, gb, guard) -> VectorField:
    return VectorField([simplify(ca * a + cb * b) for a, b in zip(ga, gb)], guard)


def _grad_norm(f: ScalarField) -> Expr:
    g = gradient(f).components
    return simplify(ex.sqrt(g[0] ** 2 + g[1] ** 2 + g[2] ** 2))


def build_beltrami(t: OrthoTriple, points=None, seed=None) -> Construction:
    """Beltrami pair from an orthogonal, equal-scale triple.

    ``sigma`` is the Jacobian sign sampled at ``points`` (at least 9; drawn
    from ``t.box`` when omitted). Expected factors are ``sigma |grad theta|``
    for ``w`` and its negative for ``w_star``.
    """
    sigma, _ = _sigma(t, points, seed=seed)
    g = t.guard
    th = t.theta.expr
    gl, gp = gradient(t.ell).components, gradient(t.psi).components
    w = _combo(ex.cos(th), gp, ex.sin(th), gl, g)
    w_star = _combo(ex.sin(th), gp, ex.cos(th), gl, g)
    factor = simplify(float(sigma) * _grad_norm(t.theta))
    return Construction(w, w_star, sigma, ScalarField(factor, g), ScalarField(simplify(-factor), g))


def build_beltrami_profile(t: OrthoTriple, F, variable: str = "s", points=None, seed=None) -> Construction:
    """Generalisation with the angle replaced by ``F(theta)``.

    ``F`` is a closed-form antiderivative of the profile ``f`` in ``variable``;
    expected factors are ``+/- sigma |grad theta| f(theta)``.
    """
    F = ex.parse(F, (variable,)) if isinstance(F, str) else F
    sigma, _ = _sigma(t, points, seed=seed)
    g = t.guard
    th = t.theta.expr
    Ft = simplify(substitute(F, {variable: th}))
    ft = simplify(substitute(differentiate(F, variable), {variable: th}))
    gl, gp = gradient(t.ell).components, gradient(t.psi).components
    w = _combo(ex.cos(Ft), gp, ex.sin(Ft), gl, g)
    w_star = _combo(ex.sin(Ft), gp, ex.cos(Ft), gl, g)
    factor = simplify(float(sigma) * _grad_norm(t.theta) * ft)
    return Construction(w, w_star, sigma, ScalarField(factor, g), ScalarField(simplify(-factor), g))


def build_beltrami_ratio(alpha_c, beta_c, gamma_c, f, variable: str = "s",
                         points=None, box=DEFAULT_BOX, tol=SYMBOLIC_TOL, seed=None) -> Construction:
    """Beltrami field ``(grad beta + f grad alpha) / sqrt(1 + f^2)`` with ``f = f(gamma)``.

    Requires ``(alpha, beta, gamma)`` orthogonal with ``|grad alpha| = |grad beta|``
    (checked at the sample points). The expected factor is
    ``sigma |grad gamma| f'(gamma) / (1 + f(gamma)^2)``.
    """
    f = ex.parse(f, (variable,)) if isinstance(f, str) else f
    t = OrthoTriple(alpha_c, beta_c, gamma_c, box=box)
    pts = _points_for(t, points, seed=seed)
    gl, gp, gt = _grads(t, pts)
    rep = _report({
        "|grad alpha|-|grad beta|": np.linalg.norm(gl, axis=1) - np.linalg.norm(gp, axis=1),
        "grad alpha . grad beta": _rowdot(gl, gp),
        "grad alpha . grad gamma": _rowdot(gl, gt),
        "grad beta . grad gamma": _rowdot(gp, gt),
    }, pts, tol)
    if not rep.ok:
        raise ConditionError(f"ratio construction needs an orthogonal equal-scale pair:\n{rep}")
    sigma, _ = _sigma(t, pts)
    g = t.guard
    fg = simplify(substitute(f, {variable: t.theta.expr}))
    dfg = simplify(substitute(differentiate(f, variable), {variable: t.theta.expr}))
    inv = simplify(ex.Pow(ex.ONE + fg ** 2, Fraction(-1, 2)))
    ga, gb = gradient(t.ell).components, gradient(t.psi).components
    w = _combo(inv, gb, simplify(fg * inv), ga, g)
    factor = simplify(float(sigma) * _grad_norm(t.theta) * dfg / (ex.ONE + fg ** 2))
    return Construction(w, None, sigma, ScalarField(factor, g), None)


# ---------------------------------------------------------------------------
# tangent basis


def tangent_basis(t: OrthoTriple, points):
    """Tangent vectors ``(d_ell, d_psi, d_theta)`` at ``points`` from the cotangent basis."""
    pts = t.guard.enforce(points)
    gl, gp, gt = _grads(t, pts)
    h = _rowdot(gl, np.cross(gp, gt))[:, None]
    return np.cross(gp, gt) / h, np.cross(gt, gl) / h, np.cross(gl, gp) / h


def tangent_identity_residual(t: OrthoTriple, w: VectorField, points) -> float:
    """Max componentwise ``|w - |grad psi|^2 (cos theta d_psi + sin theta d_ell)|``."""
    pts = t.guard.enforce(points)
    d_ell, d_psi, _ = tangent_basis(t, pts)
    _, gp, _ = _grads(t, pts)
    th = t.theta(pts)[:, None]
    rhs = _rowdot(gp, gp)[:, None] * (np.cos(th) * d_psi + np.sin(th) * d_ell)
    return float(np.max(np.abs(w(pts) - rhs)))


# ---------------------------------------------------------------------------
# planar eikonal reduction


def _completion(n):
    n = np.asarray(n, float)
    a = np.array([1.0, 0.0, 0.0]) if abs(n[2]) > 0.9 else np.array([0.0, 0.0, 1.0])
    e1 = np.cross(n, a)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return e1, e2


def _linear(c) -> Expr:
    e = ex.ZERO
    for coef, v in zip(c, (ex.X, ex.Y, ex.Z)):
        if coef != 0.0:
            e = e + ex.Const(float(coef)) * v
    return simplify(e)


def _sign_changes(g: Expr, variable, interval, samples=4097):
    s = np.linspace(interval[0], interval[1], samples)
    vals = np.broadcast_to(ex.evaluate(g, {variable: s}), s.shape)
    sgn = np.sign(vals)
    idx = np.flatnonzero((sgn[:-1] * sgn[1:] <= 0))
    return [float(0.5 * (s[i] + s[i + 1])) for i in idx]


def planar_frame(n, g_profile, G_antiderivative=None, variable: str = "s", interval=(-2.0, 2.0),
                 theta_at_zero: float = 0.0, on_sign_change: str = "raise", box=DEFAULT_BOX) -> OrthoTriple:
    """Triple for a factor depending only on ``s = n . x``.

    ``ell = e1 . x`` and ``psi = e2 . x`` complete the unit normal ``n`` to the
    right-handed frame ``(e1, e2, n)``, with ``e1 = normalize(n x a)``
    (``a = z``-hat unless ``|n_z| > 0.9``, then ``x``-hat) and ``e2 = n x e1``.
    ``theta = G(n . x)`` with ``G' = g``: either the supplied closed form, or a
    tabulated antiderivative on ``interval`` with ``G(0) = theta_at_zero``.

    Since ``sigma |grad theta|`` must keep one sign, a zero of ``g`` in
    ``interval`` raises :class:`ZeroCrossingError` unless
    ``on_sign_change="allow"``, which records the crossings in ``notes``.
    """
    n = np.asarray(n, float)
    if abs(np.linalg.norm(n) - 1.0) > 1e-9:
        raise ValueError(f"normal {n.tolist()} is not a unit vector")
    g = ex.parse(g_profile, (variable,)) if isinstance(g_profile, str) else g_profile
    G = ex.parse(G_antiderivative, (variable,)) if isinstance(G_antiderivative, str) else G_antiderivative
    crossings = _sign_changes(g, variable, interval)
    if crossings and on_sign_change == "raise":
        raise ZeroCrossingError(f"profile {ex.to_string(g)!r} changes sign near s = {crossings[:3]}")
    e1, e2 = _completion(n)
    s_expr = _linear(n)
    if G is not None:
        s_chk = np.linspace(interval[0], interval[1], 257)
        dG = np.broadcast_to(ex.evaluate(differentiate(G, variable), {variable: s_chk}), s_chk.shape)
        gv = np.broadcast_to(ex.evaluate(g, {variable: s_chk}), s_chk.shape)
        if np.max(np.abs(dG - gv)) > 1e-9 * (1.0 + np.max(np.abs(gv))):
            raise ValueError("supplied antiderivative does not differentiate to the profile")
        theta = simplify(substitute(G, {variable: s_expr}))
    else:
        theta = ex.Antiderivative(g, variable, s_expr, tuple(float(v) for v in interval), float(theta_at_zero))
    # points whose s = n . x leave the tabulated interval are outside the frame
    lo, hi = interval
    sx = ex.to_string(s_expr)
    guard = Guard(f"{sx} >= {lo!r} and {sx} <= {hi!r}") if G is None else Guard()
    alpha = simplify(substitute(g, {variable: s_expr}))
    notes = {"normal": tuple(n), "e1": tuple(e1), "e2": tuple(e2), "profile": ex.to_string(g),
             "sign_changes": crossings, "quadrature": G is None}
    return OrthoTriple(ScalarField(_linear(e1), guard), ScalarField(_linear(e2), guard),
                       ScalarField(theta, guard), name="planar", alpha=ScalarField(alpha, guard),
                       box=box, notes=notes)


# ---------------------------------------------------------------------------
# harmonic conjugate


def harmonic_conjugate(l2d, anchor=(0.0, 0.0, 0.0), box=((-1.0, 1.0), (-1.0, 1.0)),
                       n_check: int = 64, tol: float = 1e-8, seed=None) -> ScalarField:
    """Conjugate ``psi`` of a planar harmonic ``ell(x, y)`` with ``psi(anchor) = 0``.

    Uses ``psi_x = -ell_y``, ``psi_y = ell_x``, the sign that makes
    ``(grad ell, grad psi, grad z)`` right-handed. Values come from a line
    integral from ``anchor``; the gradient is exact.
    """
    l2d = _sf(l2d)
    extra = ex.free_variables(l2d.expr) - {"x", "y"}
    if extra:
        raise ValueError(f"harmonic_conjugate needs a function of (x, y) only; found {sorted(extra)}")
    anchor = tuple(float(c) for c in anchor)
    box3 = (tuple(box[0]), tuple(box[1]), (anchor[2], anchor[2]))
    pts = sample_points(n_check, box3, l2d.guard, seed)
    lap = laplacian(l2d)(pts)
    if np.max(np.abs(lap)) > tol:
        raise ConditionError(f"input is not harmonic: max |laplacian| = {np.max(np.abs(lap)):.3e}")
    lx = differentiate(l2d.expr, "x")
    ly = differentiate(l2d.expr, "y")
    grad = (simplify(-ly), lx, ex.ZERO)
    psi = ScalarField(ex.PathIntegral(grad, anchor), l2d.guard)
    straight = psi(pts)
    corner = np.column_stack([pts[:, 0], np.full(len(pts), anchor[1]), pts[:, 2]])
    verts = np.stack([np.broadcast_to(anchor, pts.shape), corner, pts], axis=1)
    bent = polyline_integral(grad, verts)
    gap = float(np.max(np.abs(straight - bent)))
    if gap > tol:
        raise PathMismatchError(f"path integrals disagree by {gap:.3e}")
    psi.name = "harmonic conjugate"
    return psi


# ---------------------------------------------------------------------------
# chart catalog

R_CYL = "sqrt(x^2 + y^2)"
R_SPH = "sqrt(x^2 + y^2 + z^2)"
PHI = "atan2(y, x)"
CUT_GUARD = f"{R_CYL} + x >= 0.001"


def catalog_chart(name: str) -> OrthoTriple:
    """Named orthogonal charts with guards and scale factors (``1/|grad q|``)."""
    try:
        build = CHARTS[name]
    except KeyError:
        raise KeyError(f"unknown chart {name!r}; choose from {sorted(CHARTS)}") from None
    return build()


def _cylindrical():
    guard = f"{R_CYL} >= 0.05 and {CUT_GUARD}"
    return OrthoTriple(ScalarField(R_CYL, guard), ScalarField("z", guard), ScalarField(PHI, guard),
                       name="cylindrical", box=((-2, 2), (-2, 2), (-2, 2)),
                       scale_factors={"r": "1", "z": "1", "phi": R_CYL})


def _parabolic_cylindrical():
    guard = f"y >= 0.05"
    return OrthoTriple(ScalarField(f"sqrt({R_CYL} + x)", guard), ScalarField(f"sqrt({R_CYL} - x)", guard),
                       ScalarField("z", guard), name="parabolic_cylindrical",
                       box=((-2, 2), (0.05, 2), (-2, 2)),
                       scale_factors={"u": f"sqrt(2*{R_CYL})", "v": f"sqrt(2*{R_CYL})", "z": "1"})


def _parabolic():
    guard = (f"{R_SPH} >= 0.05 and {R_CYL} >= 0.05 and sqrt({R_SPH} + z) >= 0.05 and "
             f"sqrt({R_SPH} - z) >= 0.05 and {CUT_GUARD}")
    return OrthoTriple(ScalarField(f"sqrt({R_SPH} + z)", guard), ScalarField(f"sqrt({R_SPH} - z)", guard),
                       ScalarField(PHI, guard), name="parabolic", box=((-2, 2), (-2, 2), (-2, 2)),
                       scale_factors={"xi": f"sqrt(2*{R_SPH})", "eta": f"sqrt(2*{R_SPH})", "phi": R_CYL})


CHARTS = {
    "cylindrical": _cylindrical,
    "parabolic_cylindrical": _parabolic_cylindrical,
    "parabolic": _parabolic,
}
