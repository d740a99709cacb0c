"""Scalar and vector fields over R^3 with exact and finite-difference operators."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import expr as ex
from .expr import CARTESIAN, Expr, compile_expr, compile_many, differentiate, simplify

__all__ = [
    "Guard", "GuardViolation", "ScalarField", "VectorField",
    "gradient", "curl", "divergence", "laplacian", "dot", "cross", "norm_squared",
    "fd_curl", "fd_curl_order4", "helicity_density", "as_points", "sample_points", "default_seed",
]


class GuardViolation(ValueError):
    """A field was evaluated at a point excluded by its domain guard."""


_CMP = re.compile(r"(<=|>=|<|>)")


@dataclass(frozen=True)
class Guard:
    """Declarative domain restriction: a conjunction of ``lhs <op> rhs`` comparisons.

    The text form is e.g. ``"sqrt(x^2+y^2) >= 0.05 and x <= 3"``; ``"none"``
    admits every point.
    """

    text: str = "none"
    clauses: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        text = " ".join(self.text.split()) or "none"
        object.__setattr__(self, "text", text)
        clauses = []
        if text != "none":
            for part in re.split(r"\band\b", text):
                pieces = _CMP.split(part)
                if len(pieces) != 3:
                    raise ValueError(f"guard clause {part.strip()!r} must be 'lhs <op> rhs'")
                lhs, op, rhs = pieces
                clauses.append((ex.parse(lhs.strip()), op, ex.parse(rhs.strip())))
        object.__setattr__(self, "clauses", tuple(clauses))

    @classmethod
    def coerce(cls, g) -> "Guard":
        if g is None:
            return cls()
        return g if isinstance(g, Guard) else cls(str(g))

    def __and__(self, other) -> "Guard":
        other = Guard.coerce(other)
        if self.text == "none":
            return other
        if other.text == "none" or other.text == self.text:
            return self
        parts = [p.strip() for p in re.split(r"\band\b", self.text)]
        parts += [p.strip() for p in re.split(r"\band\b", other.text) if p.strip() not in parts]
        return Guard(" and ".join(parts))

    def mask(self, points) -> np.ndarray:
        """Boolean mask of points satisfying every clause (undefined clauses count as failing)."""
        pts = as_points(points)
        ok = np.ones(len(pts), dtype=bool)
        env = {"x": pts[:, 0], "y": pts[:, 1], "z": pts[:, 2]}
        for lhs, op, rhs in self.clauses:
            with np.errstate(all="ignore"):
                a = compile_expr(lhs)(*env.values())
                b = compile_expr(rhs)(*env.values())
                if op == "<=":
                    c = a <= b
                elif op == ">=":
                    c = a >= b
                elif op == "<":
                    c = a < b
                else:
                    c = a > b
            ok &= np.asarray(c, dtype=bool) & np.isfinite(a) & np.isfinite(b)
        return ok

    def holds(self, p) -> bool:
        return bool(self.mask(np.asarray(p, float).reshape(1, 3))[0])

    def enforce(self, points):
        pts = as_points(points)
        ok = self.mask(pts)
        if not ok.all():
            bad = pts[np.flatnonzero(~ok)[0]]
            raise GuardViolation(f"point {tuple(bad)} violates guard {self.text!r}")
        return pts

    def __str__(self):
        return self.text


def as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, 3)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected points of shape (N, 3), got {pts.shape}")
    return pts


def _as_expr(e) -> Expr:
    if isinstance(e, Expr):
        return e
    if isinstance(e, str):
        return ex.parse(e)
    return ex.Const(float(e))


class ScalarField:
    """A closed-form scalar field with an optional domain guard."""

    def __init__(self, expr, guard=None, name: str = ""):
        self.expr = _as_expr(expr)
        self.guard = Guard.coerce(guard)
        self.name = name

    def __repr__(self):
        return f"ScalarField({ex.to_string(self.expr)!r}, guard={self.guard.text!r})"

    def __call__(self, points, check: bool = True):
        """Values at ``points`` (shape (N, 3) or a single point)."""
        single = np.ndim(points) == 1
        pts = self.guard.enforce(points) if check else as_points(points)
        v = ex.evaluate(self.expr, {"x": pts[:, 0], "y": pts[:, 1], "z": pts[:, 2]})
        v = np.broadcast_to(np.asarray(v, float), (len(pts),))
        return float(v[0]) if single else np.array(v)

    def at(self, p) -> float:
        p = self.guard.enforce(p)[0]
        return ex.eval_point(self.expr, p)

    def with_guard(self, guard) -> "ScalarField":
        return ScalarField(self.expr, self.guard & guard, self.name)

    def _combine(self, other, op):
        if isinstance(other, ScalarField):
            return ScalarField(simplify(op(self.expr, other.expr)), self.guard & other.guard)
        return ScalarField(simplify(op(self.expr, ex._wrap(other))), self.guard)

    def __add__(self, other):
        return self._combine(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a - b)

    def __mul__(self, other):
        return self._combine(other, lambda a, b: a * b)

    def __truediv__(self, other):
        return self._combine(other, lambda a, b: a / b)

    def __radd__(self, other):
        return self._combine(other, lambda a, b: b + a)

    def __rsub__(self, other):
        return self._combine(other, lambda a, b: b - a)

    def __rmul__(self, other):
        return self._combine(other, lambda a, b: b * a)

    def __rtruediv__(self, other):
        return self._combine(other, lambda a, b: b / a)

    def __neg__(self):
        return ScalarField(simplify(-self.expr), self.guard, self.name)


class VectorField:
    """Three scalar components sharing one guard."""

    def __init__(self, components: Sequence, guard=None, name: str = ""):
        comps = tuple(_as_expr(c.expr if isinstance(c, ScalarField) else c) for c in components)
        if len(comps) != 3:
            raise ValueError("a vector field needs exactly three components")
        g = Guard.coerce(guard)
        for c in components:
            if isinstance(c, ScalarField):
                g = g & c.guard
        self.components = comps
        self.guard = g
        self.name = name
        self._fast = None

    def __repr__(self):
        return "VectorField(" + ", ".join(repr(ex.to_string(c)) for c in self.components) + \
            f", guard={self.guard.text!r})"

    def __getitem__(self, i) -> ScalarField:
        return ScalarField(self.components[i], self.guard)

    def __call__(self, points, check: bool = True) -> np.ndarray:
        """Values at ``points``; shape (N, 3), or (3,) for a single point."""
        single = np.ndim(points) == 1
        pts = self.guard.enforce(points) if check else as_points(points)
        env = {"x": pts[:, 0], "y": pts[:, 1], "z": pts[:, 2]}
        cols = [np.broadcast_to(np.asarray(ex.evaluate(c, env), float), (len(pts),))
                for c in self.components]
        out = np.stack(cols, axis=1)
        return out[0] if single else out

    def fast(self):
        """Unchecked scalar evaluator ``f(x, y, z) -> (wx, wy, wz)`` for integrators."""
        if self._fast is None:
            self._fast = compile_many(self.components, CARTESIAN, backend="math")
        return self._fast

    def with_guard(self, guard) -> "VectorField":
        return VectorField(self.components, self.guard & guard, self.name)

    def scale(self, s) -> "VectorField":
        s = s.expr if isinstance(s, ScalarField) else ex._wrap(s)
        return VectorField([simplify(s * c) for c in self.components], self.guard)

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField([simplify(a + b) for a, b in zip(self.components, other.components)],
                           self.guard & other.guard)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField([simplify(a - b) for a, b in zip(self.components, other.components)],
                           self.guard & other.guard)

    def __neg__(self):
        return VectorField([simplify(-c) for c in self.components], self.guard, self.name)


def _scalar(f) -> ScalarField:
    return f if isinstance(f, ScalarField) else ScalarField(f)


def gradient(f) -> VectorField:
    f = _scalar(f)
    return VectorField([differentiate(f.expr, v) for v in CARTESIAN], f.guard)


def curl(w: VectorField) -> VectorField:
    wx, wy, wz = w.components
    d = differentiate
    return VectorField([
        simplify(d(wz, "y") - d(wy, "z")),
        simplify(d(wx, "z") - d(wz, "x")),
        simplify(d(wy, "x") - d(wx, "y")),
    ], w.guard)


def divergence(w: VectorField) -> ScalarField:
    wx, wy, wz = w.components
    return ScalarField(simplify(differentiate(wx, "x") + differentiate(wy, "y") + differentiate(wz, "z")),
                       w.guard)


def laplacian(f) -> ScalarField:
    return divergence(gradient(f))


def dot(a: VectorField, b: VectorField) -> ScalarField:
    e = ex.ZERO
    for u, v in zip(a.components, b.components):
        e = e + u * v
    return ScalarField(simplify(e), a.guard & b.guard)


def cross(a: VectorField, b: VectorField) -> VectorField:
    ax, ay, az = a.components
    bx, by, bz = b.components
    return VectorField([simplify(ay * bz - az * by), simplify(az * bx - ax * bz), simplify(ax * by - ay * bx)],
                       a.guard & b.guard)


def norm_squared(w: VectorField) -> ScalarField:
    return dot(w, w)


_E = np.eye(3)


def _ball_check(w, p, h):
    # the stencil points (and the centre) must all be admissible
    pts = np.concatenate([p[None, :], p + h * _E, p - h * _E, p + 2 * h * _E, p - 2 * h * _E])
    w.guard.enforce(pts)


def fd_curl(w: VectorField, p, h: float = 1e-4) -> np.ndarray:
    """Second-order central-difference curl at ``p`` (independent of symbolic differentiation)."""
    p = np.asarray(p, float)
    pts = np.concatenate([p + h * _E, p - h * _E])
    w.guard.enforce(pts)
    vals = w(pts, check=False)
    # J[i, j] = d w_i / d x_j
    J = ((vals[:3] - vals[3:]) / (2.0 * h)).T
    return np.array([J[2, 1] - J[1, 2], J[0, 2] - J[2, 0], J[1, 0] - J[0, 1]])


def fd_curl_order4(w: VectorField, p, h: float = 1e-3) -> np.ndarray:
    """Fourth-order central-difference curl (cross-check stencil)."""
    p = np.asarray(p, float)
    _ball_check(w, p, h)
    pts = np.concatenate([p + h * _E, p - h * _E, p + 2 * h * _E, p - 2 * h * _E])
    v = w(pts, check=False)
    J = ((8.0 * (v[0:3] - v[3:6]) - (v[6:9] - v[9:12])) / (12.0 * h)).T
    return np.array([J[2, 1] - J[1, 2], J[0, 2] - J[2, 0], J[1, 0] - J[0, 1]])


def helicity_density(w: VectorField, p, curl_w: VectorField | None = None):
    """``w . curl w`` at ``p`` (a point or an (N, 3) array)."""
    cw = curl_w if curl_w is not None else curl(w)
    single = np.ndim(p) == 1
    pts = w.guard.enforce(p)
    h = np.einsum("ij,ij->i", w(pts, check=False), cw(pts, check=False))
    return float(h[0]) if single else h


DEFAULT_SEED = 20190425


def default_seed(seed=None) -> int:
    """``seed`` if given, else ``$BELTRAMI_SEED``, else a fixed default."""
    import os

    if seed is not None:
        return int(seed)
    env = os.environ.get("BELTRAMI_SEED")
    return int(env) if env not in (None, "") else DEFAULT_SEED


def sample_points(n: int, box, guard=None, seed=None, max_rounds: int = 200) -> np.ndarray:
    """``n`` uniform random points in ``box`` (``[(lo, hi)] * 3``) that pass ``guard``."""
    box = np.asarray(box, float)
    guard = Guard.coerce(guard)
    rng = np.random.default_rng(default_seed(seed))
    out = []
    have = 0
    for _ in range(max_rounds):
        cand = rng.uniform(box[:, 0], box[:, 1], size=(max(2 * n, 64), 3))
        cand = cand[guard.mask(cand)]
        out.append(cand)
        have += len(cand)
        if have >= n:
            return np.concatenate(out)[:n]
    raise GuardViolation(f"could not find {n} points in box {box.tolist()} passing guard {guard.text!r}")
