"""Field-spec files, grid sampling and CSV/VTK output.

A field spec is an INI document. Every spec has a ``[field]`` section with
``name``, ``kind`` and optionally ``guard`` and ``box``; the remaining
sections depend on the kind::

    [field]
    name = b0
    kind = vector_field          ; or ortho_triple, planar_frame
    guard = none
    box = -2, 2, -2, 2, -2, 2

    [components]                 ; vector_field
    w_x = sin(z)
    w_y = cos(z)
    w_z = 0

    [coordinates]                ; ortho_triple
    ell = z
    psi = (x-y)/sqrt(2)
    theta = exp(x+y)/sqrt(2)

    [planar]                     ; planar_frame, profile in the variable s
    n = 1/sqrt(2), 1/sqrt(2), 0
    g = exp(sqrt(2)*s)
    G = exp(sqrt(2)*s)/sqrt(2)   ; optional closed-form antiderivative
    interval = -2, 2             ; optional, used by the quadrature path

    [expected]                   ; optional
    hhat = exp(x+y)
    div = 0

Expressions use the grammar of :func:`beltrami.expr.parse`.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import expr as ex
from .fields import Guard, ScalarField, VectorField
from .frames import DEFAULT_BOX, OrthoTriple, build_beltrami, planar_frame
from .verify import hhat_field

__all__ = [
    "FieldSpec", "SpecError", "SpecParseError", "SpecSchemaError",
    "load_field_spec", "parse_field_spec", "dump_field_spec", "save_field_spec", "spec_from_entry",
    "GridSample", "sample_grid", "write_vtk", "write_csv", "split_top_level", "parse_box",
]

KINDS = ("vector_field", "ortho_triple", "planar_frame")
_REQUIRED = {
    "vector_field": ("components", ("w_x", "w_y", "w_z")),
    "ortho_triple": ("coordinates", ("ell", "psi", "theta")),
    "planar_frame": ("planar", ("n", "g")),
}


class SpecError(ValueError):
    pass


class SpecParseError(SpecError):
    """Malformed document or expression; carries the source line."""

    def __init__(self, message, path="<string>", line=None):
        self.path, self.line = path, line
        loc = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{loc}: {message}")


class SpecSchemaError(SpecError):
    """Required sections or keys are absent."""

    def __init__(self, missing, path="<string>"):
        self.missing = list(missing)
        super().__init__(f"{path}: missing required keys: {', '.join(self.missing)}")


def split_top_level(text: str, sep: str = ",") -> list[str]:
    """Split on ``sep`` outside parentheses, so ``atan2(y, x), 0`` gives two parts."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur).strip())
    return parts


def _number(text: str) -> float:
    return ex.eval_point(ex.parse(text), (0.0, 0.0, 0.0))


def parse_box(text: str) -> tuple:
    """``"x0,x1,y0,y1,z0,z1"`` to ``((x0, x1), (y0, y1), (z0, z1))``; entries may be expressions."""
    vals = [_number(v) for v in split_top_level(text)]
    if len(vals) != 6:
        raise ValueError(f"box needs 6 numbers, got {len(vals)}")
    box = tuple((vals[i], vals[i + 1]) for i in (0, 2, 4))
    if any(lo > hi for lo, hi in box):
        raise ValueError(f"box bounds out of order: {box}")
    return box


def _fmt_box(box) -> str:
    return ", ".join(repr(float(v)) for lo_hi in box for v in lo_hi)


@dataclass
class FieldSpec:
    name: str
    kind: str
    exprs: dict                 # key -> Expr for the kind's section
    guard: Guard = field(default_factory=Guard)
    expected: dict = field(default_factory=dict)
    box: tuple = DEFAULT_BOX
    planar: dict = field(default_factory=dict)   # n (tuple of Expr), interval, variable

    def triple(self) -> OrthoTriple:
        if self.kind == "ortho_triple":
            e = self.exprs
            return OrthoTriple(ScalarField(e["ell"], self.guard), ScalarField(e["psi"], self.guard),
                               ScalarField(e["theta"], self.guard), name=self.name, box=self.box)
        if self.kind == "planar_frame":
            n = np.array([ex.eval_point(c, (0.0, 0.0, 0.0)) for c in self.planar["n"]])
            t = planar_frame(n, self.exprs["g"], self.exprs.get("G"), variable=self.planar["variable"],
                             interval=self.planar["interval"], on_sign_change="allow", box=self.box)
            if self.guard.text != "none":
                ell, psi, theta = (c.with_guard(c.guard & self.guard) for c in t.coordinates())
                t = OrthoTriple(ell, psi, theta, alpha=t.alpha, box=self.box, notes=t.notes)
            t.name = self.name
            return t
        raise SpecError(f"spec {self.name!r} of kind {self.kind} has no coordinate triple")

    def vector_field(self) -> VectorField:
        """The field itself, or the constructed ``w`` for triple-valued specs."""
        if self.kind == "vector_field":
            return VectorField([self.exprs[k] for k in ("w_x", "w_y", "w_z")], self.guard, name=self.name)
        w = build_beltrami(self.triple()).w
        w.name = self.name
        return w

    def expected_field(self, key: str) -> ScalarField | None:
        e = self.expected.get(key)
        return None if e is None else ScalarField(e, self.guard)


def _line_index(text: str) -> dict:
    """``(section, key) -> line number`` for error messages."""
    idx, section = {}, None
    for i, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            idx[(section, None)] = i
            continue
        m = re.match(r"^([A-Za-z_][A-Za-z0-9_]*)\s*[=:]", s)
        if m and section is not None:
            idx[(section, m.group(1))] = i
    return idx


def parse_field_spec(text: str, path="<string>") -> FieldSpec:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(path))
    except configparser.MissingSectionHeaderError as e:
        raise SpecParseError("content before the first [section] header", path, e.lineno) from None
    except configparser.ParsingError as e:
        line = e.errors[0][0] if e.errors else None
        raise SpecParseError("malformed line", path, line) from None
    except configparser.Error as e:
        raise SpecParseError(str(e).splitlines()[0], path, getattr(e, "lineno", None)) from None
    lines = _line_index(text)

    def get(section, key):
        if cp.has_option(section, key):
            return cp.get(section, key).strip()
        return None

    def expr_of(section, key, variables=ex.CARTESIAN):
        src = get(section, key)
        try:
            return ex.parse(src, variables)
        except ex.ExprSyntaxError as err:
            raise SpecParseError(f"[{section}] {key}: {err}", path, lines.get((section, key))) from None

    missing = []
    if not cp.has_section("field"):
        missing += ["field.name", "field.kind"]
        raise SpecSchemaError(missing, path)
    for k in ("name", "kind"):
        if not get("field", k):
            missing.append(f"field.{k}")
    kind = get("field", "kind")
    if kind and kind not in KINDS:
        raise SpecParseError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}",
                             path, lines.get(("field", "kind")))
    if kind:
        sec, keys = _REQUIRED[kind]
        missing += [k for k in keys if not (cp.has_section(sec) and get(sec, k))]
    if missing:
        raise SpecSchemaError(missing, path)

    sec, keys = _REQUIRED[kind]
    guard_text = get("field", "guard") or "none"
    try:
        guard = Guard(guard_text)
    except (ValueError, ex.ExprSyntaxError) as err:
        raise SpecParseError(f"[field] guard: {err}", path, lines.get(("field", "guard"))) from None
    box = DEFAULT_BOX
    if get("field", "box"):
        try:
            box = parse_box(get("field", "box"))
        except (ValueError, ex.ExprSyntaxError) as err:
            raise SpecParseError(f"[field] box: {err}", path, lines.get(("field", "box"))) from None

    planar = {}
    if kind == "planar_frame":
        variable = get("planar", "variable") or "s"
        exprs = {"g": expr_of("planar", "g", (variable,))}
        if get("planar", "G"):
            exprs["G"] = expr_of("planar", "G", (variable,))
        try:
            n = tuple(ex.parse(c, ()) for c in split_top_level(get("planar", "n")))
            interval = tuple(_number(v) for v in split_top_level(get("planar", "interval") or "-2, 2"))
        except ex.ExprSyntaxError as err:
            raise SpecParseError(f"[planar] {err}", path, lines.get(("planar", "n"))) from None
        if len(n) != 3 or len(interval) != 2:
            raise SpecParseError("[planar] n needs 3 components and interval 2 bounds",
                                 path, lines.get(("planar", "n")))
        planar = {"n": n, "interval": interval, "variable": variable}
    else:
        exprs = {k: expr_of(sec, k) for k in keys}

    expected = {}
    if cp.has_section("expected"):
        for k in ("hhat", "div", "alpha"):
            if get("expected", k):
                expected[k] = expr_of("expected", k)
    return FieldSpec(get("field", "name"), kind, exprs, guard, expected, box, planar)


def load_field_spec(path) -> FieldSpec:
    path = Path(path)
    try:
        text = path.read_bytes().decode("utf-8")
    except UnicodeDecodeError as e:
        raise SpecParseError(f"not valid UTF-8 at byte {e.start}", path) from None
    return parse_field_spec(text, path)


def dump_field_spec(spec: FieldSpec) -> str:
    out = ["[field]", f"name = {spec.name}", f"kind = {spec.kind}", f"guard = {spec.guard.text}",
           f"box = {_fmt_box(spec.box)}", ""]
    sec, keys = _REQUIRED[spec.kind]
    out.append(f"[{sec}]")
    if spec.kind == "planar_frame":
        out.append(f"n = {', '.join(ex.to_string(c) for c in spec.planar['n'])}")
        out.append(f"g = {ex.to_string(spec.exprs['g'])}")
        if "G" in spec.exprs:
            out.append(f"G = {ex.to_string(spec.exprs['G'])}")
        out.append(f"interval = {', '.join(repr(float(v)) for v in spec.planar['interval'])}")
        if spec.planar.get("variable", "s") != "s":
            out.append(f"variable = {spec.planar['variable']}")
    else:
        for k in keys:
            e = spec.exprs[k]
            if not ex.is_grammar_expr(e):
                raise SpecError(f"{k} uses a tabulated or path-integral node and has no text form")
            out.append(f"{k} = {ex.to_string(e)}")
    if spec.expected:
        out += ["", "[expected]"] + [f"{k} = {ex.to_string(v)}" for k, v in spec.expected.items()]
    return "\n".join(out) + "\n"


def save_field_spec(spec: FieldSpec, path) -> None:
    Path(path).write_text(dump_field_spec(spec), encoding="utf-8")


def spec_from_entry(entry, kind: str = "vector_field") -> FieldSpec:
    """Field spec for a catalog entry, either the field itself or its triple."""
    expected = {"hhat": entry.expected_hhat.expr, "div": entry.expected_div.expr}
    if kind == "vector_field":
        exprs = dict(zip(("w_x", "w_y", "w_z"), (c for c in entry.field.components)))
    elif kind == "ortho_triple":
        if entry.triple is None:
            raise SpecError(f"{entry.id} has no coordinate triple")
        t = entry.triple
        exprs = {"ell": t.ell.expr, "psi": t.psi.expr, "theta": t.theta.expr}
    else:
        raise SpecError(f"catalog entries export as vector_field or ortho_triple, not {kind}")
    return FieldSpec(entry.id, kind, exprs, entry.guard, expected, entry.box)


# ---------------------------------------------------------------------------
# grid sampling


@dataclass
class GridSample:
    """Node values on a regular grid, x varying fastest.

    ``mask`` is True at nodes excluded by the guard; those nodes hold NaN.
    """

    box: tuple
    res: tuple
    values: np.ndarray              # (N, 3)
    scalars: dict = field(default_factory=dict)
    mask: np.ndarray | None = None
    name: str = "w"

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.res)) if len(self.res) else 0

    def points(self) -> np.ndarray:
        axes = [np.linspace(lo, hi, n) for (lo, hi), n in zip(self.box, self.res)]
        zz, yy, xx = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
        return np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])

    @property
    def spacing(self) -> tuple:
        return tuple((hi - lo) / (n - 1) for (lo, hi), n in zip(self.box, self.res))


def _safe_eval(f, pts):
    """Evaluate ``f`` row by row where the vectorised pass hits a domain error."""
    try:
        return f(pts, check=False)
    except ex.DomainError:
        blank = np.full(3, np.nan) if isinstance(f, VectorField) else np.nan
        rows = []
        for p in pts:
            try:
                rows.append(f(p[None, :], check=False)[0])
            except ex.DomainError:
                rows.append(blank)
        return np.asarray(rows)


def sample_grid(w: VectorField, box, res, extras=(), triple: OrthoTriple | None = None) -> GridSample:
    """Evaluate ``w`` on a ``res`` grid over ``box``.

    ``extras`` may name ``hhat``, ``theta`` and ``L_theta``; the last two need
    ``triple``. Nodes outside the guard, or where evaluation is undefined, are
    masked with NaN.
    """
    res = (int(res),) * 3 if np.isscalar(res) else tuple(int(r) for r in res)
    if len(res) != 3 or min(res) < 2:
        raise ValueError(f"grid resolution must be at least 2 per axis, got {res}")
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    g = GridSample(box, res, np.empty((0, 3)), name=w.name or "w")
    pts = g.points()
    guard = w.guard if triple is None else w.guard & triple.guard
    ok = guard.mask(pts)
    vals = np.full((len(pts), 3), np.nan)
    if ok.any():
        vals[ok] = _safe_eval(w, pts[ok])
    scalars = {}
    for name in extras:
        if name == "hhat":
            f = hhat_field(w)
        elif name in ("theta", "L_theta"):
            if triple is None:
                raise ValueError(f"extra {name!r} needs a coordinate triple")
            f = triple.theta if name == "theta" else triple.L_theta()
        else:
            raise ValueError(f"unknown extra {name!r}; choose from hhat, theta, L_theta")
        s = np.full(len(pts), np.nan)
        if ok.any():
            s[ok] = _safe_eval(f, pts[ok])
        scalars[name] = s
    bad = ~ok | ~np.all(np.isfinite(vals), axis=1)
    vals[bad] = np.nan
    for s in scalars.values():
        s[bad] = np.nan
    g.values, g.scalars, g.mask = vals, scalars, bad
    return g


# ---------------------------------------------------------------------------
# writers

def _f(v) -> str:
    return "%.17g" % v


def write_vtk(g: GridSample, path) -> None:
    """Legacy ASCII VTK, ``STRUCTURED_POINTS``, one ``VECTORS`` block and one ``SCALARS`` per extra."""
    if g.values.size == 0 or g.n_nodes == 0:
        raise ValueError("grid sample is empty")
    if len(g.values) != g.n_nodes:
        raise ValueError(f"value count {len(g.values)} does not match grid {g.res}")
    nx, ny, nz = g.res
    lines = ["# vtk DataFile Version 3.0", f"beltrami field {g.name}", "ASCII",
             "DATASET STRUCTURED_POINTS", f"DIMENSIONS {nx} {ny} {nz}",
             "ORIGIN " + " ".join(_f(lo) for lo, _ in g.box),
             "SPACING " + " ".join(_f(d) for d in g.spacing),
             f"POINT_DATA {g.n_nodes}", "VECTORS w double"]
    lines += [" ".join(_f(c) for c in row) for row in g.values]
    for name, s in g.scalars.items():
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [_f(v) for v in s]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def write_csv(obj, path) -> None:
    """CSV of a streamline (``t,x,y,z,theta,L_theta``) or a grid sample (coordinates, ``w``, extras)."""
    from .flow import Streamline

    if isinstance(obj, Streamline):
        if not obj.times:
            raise ValueError("streamline is empty")
        pts = obj.as_array()
        n = len(obj.times)
        th = obj.theta_values or [np.nan] * n
        L = obj.L_theta_values or [np.nan] * n
        header = ["t", "x", "y", "z", "theta", "L_theta"]
        rows = ([t, *p, a, b] for t, p, a, b in zip(obj.times, pts, th, L))
    elif isinstance(obj, GridSample):
        if obj.values.size == 0 or obj.n_nodes == 0:
            raise ValueError("grid sample is empty")
        header = ["x", "y", "z", "w_x", "w_y", "w_z", *obj.scalars]
        cols = [obj.points(), obj.values] + [s[:, None] for s in obj.scalars.values()]
        rows = np.hstack(cols)
    else:
        raise TypeError(f"cannot write {type(obj).__name__} as CSV")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(_f(v) for v in r) + "\n")
