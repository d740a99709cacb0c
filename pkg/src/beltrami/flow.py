"""Streamlines of ``dx/dt = w(x)`` with invariant monitoring.

Integration uses the Dormand-Prince 5(4) pair with a PI step-size
controller. A trajectory that leaves the field's guard is truncated, not
treated as a failure: the fields here are local objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fields import Guard, ScalarField, VectorField
from .frames import OrthoTriple
from .verify import nambu_bracket

__all__ = ["StepControl", "Streamline", "StepUnderflowError", "trace_streamline", "invariant_drift",
           "evolve_observable", "ObservableSeries"]

# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)
_E = tuple(b5 - b4 for b5, b4 in zip(_B5, _B4))


class StepUnderflowError(RuntimeError):
    """The step size collapsed while the trajectory was still admissible."""


@dataclass
class StepControl:
    rtol: float = 1e-8
    atol: float = 1e-10
    max_step: float = math.inf
    first_step: float | None = None
    max_steps: int = 1_000_000
    safety: float = 0.9
    # PI controller exponents (alpha = 0.7/5, beta = 0.4/5)
    alpha: float = 0.14
    beta: float = 0.08


@dataclass
class Streamline:
    times: list
    points: list
    theta_values: list = field(default_factory=list)
    L_theta_values: list = field(default_factory=list)
    accepted: int = 0
    rejected: int = 0
    max_error_estimate: float = 0.0
    status: str = "completed"
    message: str = ""

    @property
    def step_stats(self) -> dict:
        return {"accepted": self.accepted, "rejected": self.rejected,
                "max_local_error": self.max_error_estimate}

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points, float).reshape(-1, 3)

    @property
    def truncated(self) -> bool:
        return self.status != "completed"


def _dp_step(f, t, y, k1, h):
    ks = [k1]
    for i in range(1, 7):
        a = _A[i]
        yi = [y[j] + h * sum(a[m] * ks[m][j] for m in range(i)) for j in range(3)]
        ks.append(f(*yi))
    y5 = [y[j] + h * sum(_B5[m] * ks[m][j] for m in range(7)) for j in range(3)]
    err = [h * sum(_E[m] * ks[m][j] for m in range(7)) for j in range(3)]
    return y5, err, ks[6]


def trace_streamline(w: VectorField, x0, t_end: float, ctrl: StepControl | None = None,
                     triple: OrthoTriple | None = None, guard=None, direction: float = 1.0) -> Streamline:
    """Integrate ``dx/dt = direction * w(x)`` from ``x0`` over ``[0, |t_end|]``.

    Each accepted step keeps ``max_i |err_i| / (atol + rtol * max(|x_i|, |x_new_i|)) <= 1``.
    When ``triple`` is given, ``theta`` and ``L_theta`` are sampled at every
    accepted point. Leaving ``w.guard & guard`` ends the trace with
    ``status == "guard_exit"``.
    """
    ctrl = ctrl or StepControl()
    g = w.guard & Guard.coerce(guard)
    if triple is not None:
        g = g & triple.guard
    x0 = np.asarray(x0, float)
    g.enforce(x0)
    base = w.fast()
    sgn = 1.0 if direction >= 0 else -1.0
    t_end = abs(float(t_end))

    def f(x, y, z):
        v = base(x, y, z)
        return (sgn * v[0], sgn * v[1], sgn * v[2])

    if triple is not None:
        inv = (_fast_scalar(triple.theta), _fast_scalar(triple.L_theta()))
    s = Streamline([0.0], [tuple(x0)])
    if triple is not None:
        s.theta_values.append(inv[0](*x0))
        s.L_theta_values.append(inv[1](*x0))
    if t_end == 0.0:
        return s

    y = list(x0)
    t = 0.0
    k1 = f(*y)
    h = ctrl.first_step or _initial_step(f, y, k1, ctrl)
    h = min(h, ctrl.max_step, t_end)
    err_prev = 1e-4
    h_min = 1e-14
    while t < t_end:
        if s.accepted + s.rejected >= ctrl.max_steps:
            s.status, s.message = "max_steps", f"step budget {ctrl.max_steps} exhausted at t={t:.6g}"
            break
        h = min(h, t_end - t)
        try:
            y_new, err, k_last = _dp_step(f, t, y, k1, h)
            ok_domain = all(math.isfinite(c) for c in y_new) and g.holds(y_new)
        except (ValueError, ZeroDivisionError, OverflowError, ArithmeticError):
            ok_domain = False
        if not ok_domain:
            s.rejected += 1
            h *= 0.25
            if h < h_min * max(1.0, t):
                s.status, s.message = "guard_exit", f"trajectory left the domain near t={t:.6g}"
                break
            continue
        scale = [ctrl.atol + ctrl.rtol * max(abs(a), abs(b)) for a, b in zip(y, y_new)]
        en = max(abs(e) / sc for e, sc in zip(err, scale))
        if en <= 1.0:
            t += h
            y = y_new
            k1 = k_last
            s.accepted += 1
            s.max_error_estimate = max(s.max_error_estimate, max(abs(e) for e in err))
            s.times.append(t)
            s.points.append(tuple(y))
            if triple is not None:
                s.theta_values.append(inv[0](*y))
                s.L_theta_values.append(inv[1](*y))
            en = max(en, 1e-10)
            fac = ctrl.safety * en ** (-ctrl.alpha) * err_prev ** ctrl.beta
            err_prev = en
            h *= min(5.0, max(0.2, fac))
        else:
            s.rejected += 1
            h *= max(0.2, ctrl.safety * en ** -0.2)
        h = min(h, ctrl.max_step)
        if h < h_min * max(1.0, t):
            raise StepUnderflowError(f"step size underflow at t={t:.6g}")
    return s


def _fast_scalar(f: ScalarField):
    from .expr import compile_expr
    return compile_expr(f.expr, backend="math")


def _initial_step(f, y, k1, ctrl):
    # Hairer-Norsett-Wanner starting step heuristic
    sc = [ctrl.atol + ctrl.rtol * abs(v) for v in y]
    d0 = math.sqrt(sum((v / s) ** 2 for v, s in zip(y, sc)) / 3)
    d1 = math.sqrt(sum((v / s) ** 2 for v, s in zip(k1, sc)) / 3)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = [a + h0 * b for a, b in zip(y, k1)]
    try:
        k2 = f(*y1)
    except (ValueError, ZeroDivisionError, ArithmeticError):
        return h0
    d2 = math.sqrt(sum(((a - b) / s) ** 2 for a, b, s in zip(k2, k1, sc)) / 3) / h0
    if max(d1, d2) <= 1e-15:
        return max(1e-6, h0 * 1e-3)
    return min(100 * h0, (0.01 / max(d1, d2)) ** 0.2)


def invariant_drift(s: Streamline) -> dict:
    """``max |theta(t) - theta(0)|`` and ``max |L(t) - L(0)|`` over accepted steps."""
    if not s.theta_values:
        if len(s.times) <= 1:
            return {"theta_drift": 0.0, "L_drift": 0.0}
        raise ValueError("streamline carries no invariant samples; trace it with a triple")
    th = np.asarray(s.theta_values)
    L = np.asarray(s.L_theta_values)
    return {"theta_drift": float(np.max(np.abs(th - th[0]))), "L_drift": float(np.max(np.abs(L - L[0])))}


@dataclass
class ObservableSeries:
    times: np.ndarray
    values: np.ndarray
    bracket: np.ndarray
    fd_slope: np.ndarray
    streamline: Streamline

    @property
    def mismatch(self) -> np.ndarray:
        return np.abs(self.fd_slope - self.bracket)


def evolve_observable(f, t: OrthoTriple, w: VectorField, x0, t_end: float,
                      ctrl: StepControl | None = None, probe: float = 1e-3) -> ObservableSeries:
    """Observable ``f`` along a streamline next to its Nambu-bracket rate.

    ``fd_slope`` is a fourth-order central difference of ``f`` over short
    fixed Dormand-Prince substeps (``+/- probe``, ``+/- 2 probe``) around each
    accepted point, so it is independent of the bracket formula.
    """
    f = f if isinstance(f, ScalarField) else ScalarField(f)
    s = trace_streamline(w, x0, t_end, ctrl, triple=t)
    pts = s.as_array()
    fv = f(pts, check=False)
    bracket = nambu_bracket(f, w, t, pts)
    fast = w.fast()
    ff = _fast_scalar(f)
    slopes = np.empty(len(pts))
    for i, p in enumerate(pts):
        vals = []
        for dt in (2 * probe, probe, -probe, -2 * probe):
            y = list(p)
            y, _, _ = _dp_step(fast, 0.0, y, fast(*y), dt)
            vals.append(ff(*y))
        slopes[i] = (-vals[0] + 8 * vals[1] - 8 * vals[2] + vals[3]) / (12 * probe)
    return ObservableSeries(np.asarray(s.times), fv, bracket, slopes, s)
