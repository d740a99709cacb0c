"""Beltrami checks: alignment residuals, factor extraction, classification, invariants."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .expr import simplify
from .fields import ScalarField, VectorField, curl, divergence, gradient, norm_squared
from .frames import OrthoTriple

__all__ = [
    "BeltramiReport", "NearZeroFieldError",
    "beltrami_residual", "proportionality_factor", "classify", "hhat_field",
    "invariant_gradient_check", "nambu_identity_check", "nambu_bracket",
    "continuity_check_ideal_gas", "ideal_gas_density", "factor_invariance_check",
    "eigenvalue_residual",
    "NONTRIVIAL", "COMPLEX_LAMELLAR", "NEITHER", "DEGENERATE",
]

NONTRIVIAL = "nontrivial_beltrami"
COMPLEX_LAMELLAR = "complex_lamellar"
NEITHER = "neither"
DEGENERATE = "degenerate"

EPS = 1e-300
ALIGN_TOL = 1e-8
HHAT_MIN = 1e-8
CURL_ZERO = 1e-12
STRONG_VARIANCE = 1e-12


class NearZeroFieldError(ValueError):
    """The field magnitude is too small for the factor to be defined."""


@dataclass
class BeltramiReport:
    max_alignment_residual: float
    hhat_samples: list
    divergence_max: float
    classification: str
    hhat_expected_residual: float | None = None
    strong: bool = False
    tolerance: float = 1e-10
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        ok = self.max_alignment_residual <= self.tolerance
        if self.hhat_expected_residual is not None:
            ok = ok and self.hhat_expected_residual <= self.tolerance
        return ok

    def to_dict(self) -> dict:
        h = np.array([v for _, v in self.hhat_samples]) if self.hhat_samples else np.array([])
        return {
            "max_alignment_residual": self.max_alignment_residual,
            "hhat_expected_residual": self.hhat_expected_residual,
            "divergence_max": self.divergence_max,
            "classification": self.classification,
            "strong": self.strong,
            "hhat_min": float(h.min()) if h.size else None,
            "hhat_max": float(h.max()) if h.size else None,
            "n_points": len(self.hhat_samples),
            "tolerance": self.tolerance,
            "passed": self.passed,
            **self.extra,
        }

    def __str__(self):
        d = self.to_dict()
        lines = [f"classification          {d['classification']}{' (strong)' if d['strong'] else ''}",
                 f"alignment residual      {d['max_alignment_residual']:.3e}",
                 f"max |div w|             {d['divergence_max']:.3e}"]
        if d["hhat_min"] is not None:
            lines.append(f"hhat range              [{d['hhat_min']:.6g}, {d['hhat_max']:.6g}]")
        if self.hhat_expected_residual is not None:
            lines.append(f"hhat vs expected (rel)  {self.hhat_expected_residual:.3e}")
        lines.append(f"verdict                 {'PASS' if self.passed else 'FAIL'} at {self.tolerance:g}")
        return "\n".join(lines)


def _rowdot(a, b):
    return np.einsum("ij,ij->i", a, b)


def _eval_pair(w: VectorField, points, curl_w=None):
    pts = w.guard.enforce(points)
    cw = curl_w if curl_w is not None else curl(w)
    return pts, w(pts, check=False), cw(pts, check=False)


def beltrami_residual(w: VectorField, points, tol: float = 1e-10, expected_hhat=None) -> BeltramiReport:
    """Alignment ``|w x curl w| / (|w| |curl w| + eps)`` over ``points`` plus factor samples.

    With ``expected_hhat`` the relative mismatch
    ``|hhat - expected| / (1 + |expected|)`` is also reported.
    """
    cw = curl(w)
    pts, wv, cv = _eval_pair(w, points, cw)
    wn, cn = np.linalg.norm(wv, axis=1), np.linalg.norm(cv, axis=1)
    if np.any(wn == 0):
        raise NearZeroFieldError("field vanishes at a sample point")
    align = np.linalg.norm(np.cross(wv, cv), axis=1) / (wn * cn + EPS)
    hhat = _rowdot(wv, cv) / wn ** 2
    div = divergence(w)(pts, check=False)
    rep = BeltramiReport(
        max_alignment_residual=float(align.max()),
        hhat_samples=[(tuple(p), float(h)) for p, h in zip(pts, hhat)],
        divergence_max=float(np.max(np.abs(div))),
        classification=_classify_values(wv, cv),
        strong=bool(np.var(hhat) <= STRONG_VARIANCE and np.all(np.abs(hhat) > HHAT_MIN)),
        tolerance=tol,
    )
    if expected_hhat is not None:
        ef = expected_hhat if isinstance(expected_hhat, ScalarField) else ScalarField(expected_hhat)
        e = ef(pts, check=False)
        rep.hhat_expected_residual = float(np.max(np.abs(hhat - e) / (1.0 + np.abs(e))))
    return rep


def proportionality_factor(w: VectorField, p, curl_w=None) -> float:
    """``h / |w|^2`` at a single point."""
    p = np.asarray(p, float)
    _, wv, cv = _eval_pair(w, p.reshape(1, 3), curl_w)
    w2 = float(_rowdot(wv, wv)[0])
    if np.sqrt(w2) <= 1e-12:
        raise NearZeroFieldError(f"|w| = {np.sqrt(w2):.3e} at {tuple(p)}")
    return float(_rowdot(wv, cv)[0]) / w2


def hhat_field(w: VectorField) -> ScalarField:
    """Symbolic ``hhat = (w . curl w) / |w|^2``."""
    cw = curl(w)
    h = ex.ZERO
    for a, b in zip(w.components, cw.components):
        h = h + a * b
    return ScalarField(simplify(h / norm_squared(w).expr), w.guard)


def _classify_values(wv, cv) -> str:
    wn, cn = np.linalg.norm(wv, axis=1), np.linalg.norm(cv, axis=1)
    if np.all(cn <= CURL_ZERO):
        return DEGENERATE
    h = _rowdot(wv, cv)
    align = np.linalg.norm(np.cross(wv, cv), axis=1) / (wn * cn + EPS)
    with np.errstate(divide="ignore", invalid="ignore"):
        hhat = np.where(wn > 0, h / np.maximum(wn, EPS) ** 2, 0.0)
    if np.all(align <= ALIGN_TOL) and np.min(np.abs(hhat)) > HHAT_MIN:
        return NONTRIVIAL
    if np.all(np.abs(h) / (wn * cn + EPS) <= ALIGN_TOL) and np.all(cn > 0):
        return COMPLEX_LAMELLAR
    return NEITHER


def classify(w: VectorField, points) -> str:
    """``nontrivial_beltrami``, ``complex_lamellar``, ``degenerate`` or ``neither``."""
    _, wv, cv = _eval_pair(w, points)
    return _classify_values(wv, cv)


def eigenvalue_residual(w: VectorField, factor, points) -> float:
    """Max over points of ``|curl w - factor w| / |w|``."""
    pts, wv, cv = _eval_pair(w, points)
    f = factor if isinstance(factor, ScalarField) else ScalarField(factor)
    fv = f(pts, check=False)[:, None]
    return float(np.max(np.linalg.norm(cv - fv * wv, axis=1) / np.linalg.norm(wv, axis=1)))


def invariant_gradient_check(w: VectorField, t: OrthoTriple, points) -> float:
    """Max of ``|w . grad theta|`` and ``|w . grad L_theta|``."""
    pts = (w.guard & t.guard).enforce(points)
    wv = w(pts, check=False)
    gt = gradient(t.theta)(pts, check=False)
    gL = gradient(t.L_theta())(pts, check=False)
    return float(max(np.max(np.abs(_rowdot(wv, gt))), np.max(np.abs(_rowdot(wv, gL)))))


def _theta_cross_L(t: OrthoTriple, pts):
    gt = gradient(t.theta)(pts, check=False)
    gL = gradient(t.L_theta())(pts, check=False)
    return np.cross(gt, gL)


def nambu_identity_check(w: VectorField, t: OrthoTriple, points) -> float:
    """Max componentwise ``|hhat w - grad theta x grad L_theta|``."""
    pts = (w.guard & t.guard).enforce(points)
    wv = w(pts, check=False)
    cv = curl(w)(pts, check=False)
    hhat = _rowdot(wv, cv) / _rowdot(wv, wv)
    return float(np.max(np.abs(hhat[:, None] * wv - _theta_cross_L(t, pts))))


def nambu_bracket(f, w: VectorField, t: OrthoTriple, points) -> np.ndarray:
    """``{f, theta, L_theta} = hhat^-1 grad f . (grad theta x grad L_theta)``."""
    f = f if isinstance(f, ScalarField) else ScalarField(f)
    pts = (w.guard & t.guard).enforce(points)
    wv = w(pts, check=False)
    cv = curl(w)(pts, check=False)
    hhat = _rowdot(wv, cv) / _rowdot(wv, wv)
    gf = gradient(f)(pts, check=False)
    return _rowdot(gf, _theta_cross_L(t, pts)) / hhat


def factor_invariance_check(w: VectorField, points, hhat=None) -> float:
    """Max ``|w . grad hhat|``; zero for solenoidal nontrivial fields."""
    hf = hhat if hhat is not None else hhat_field(w)
    hf = hf if isinstance(hf, ScalarField) else ScalarField(hf)
    pts = w.guard.enforce(points)
    return float(np.max(np.abs(_rowdot(w(pts, check=False), gradient(hf)(pts, check=False)))))


def ideal_gas_density(w: VectorField, k: float, c: float) -> ScalarField:
    """``rho = exp((c - |w|^2 / 2) / k)`` for ``P = k rho``."""
    if not k > 0:
        raise ValueError("k must be positive")
    return ScalarField(simplify(ex.exp((ex.Const(float(c)) - 0.5 * norm_squared(w).expr) / float(k))),
                       w.guard)


def continuity_check_ideal_gas(w: VectorField, k: float, c: float, points) -> float:
    """Max ``|div(rho w)|`` with the ideal-gas density."""
    rho = ideal_gas_density(w, k, c)
    flux = w.scale(rho)
    pts = w.guard.enforce(points)
    return float(np.max(np.abs(divergence(flux)(pts, check=False))))
