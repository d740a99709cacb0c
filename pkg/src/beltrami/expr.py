"""Closed-form scalar expressions over R^3.

Expressions are immutable trees. They can be parsed from text, printed back,
evaluated (scalar or vectorised over numpy arrays), differentiated exactly and
lightly simplified.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' exponent)?
    base   := number | var | func '(' expr (',' expr)? ')' | '(' expr ')' | '-' base
    exponent := ['-'] integer | '(' ['-'] integer '/' integer ')'

Multiplication must be explicit. ``-`` directly followed by a number literal
is read as a negative constant.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Unary", "Binary", "Pow", "Antiderivative", "PathIntegral",
    "ExprSyntaxError", "DomainError",
    "parse", "to_string", "evaluate", "eval_point", "differentiate", "simplify",
    "substitute", "free_variables", "compile_expr",
    "const", "var", "sin", "cos", "exp", "log", "sqrt", "atan", "atan2",
    "X", "Y", "Z", "ZERO", "ONE", "CARTESIAN",
]

CARTESIAN = ("x", "y", "z")
UNARY_OPS = ("neg", "sin", "cos", "exp", "log", "sqrt", "atan")
BINARY_OPS = ("add", "sub", "mul", "div", "atan2")
FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "atan", "atan2")


class ExprSyntaxError(ValueError):
    """Raised by :func:`parse`; ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int, source: str = ""):
        self.offset = offset
        self.source = source
        super().__init__(f"{message} at offset {offset}")


class DomainError(ArithmeticError):
    """Evaluation outside the domain of a sub-expression."""

    def __init__(self, message: str, node: "Expr | None" = None, point=None):
        self.node = node
        self.point = point
        super().__init__(message)


# ---------------------------------------------------------------------------
# nodes


class Expr:
    """Base class of all expression nodes."""

    __slots__ = ()

    def __add__(self, other):
        return Binary("add", self, _wrap(other))

    def __radd__(self, other):
        return Binary("add", _wrap(other), self)

    def __sub__(self, other):
        return Binary("sub", self, _wrap(other))

    def __rsub__(self, other):
        return Binary("sub", _wrap(other), self)

    def __mul__(self, other):
        return Binary("mul", self, _wrap(other))

    def __rmul__(self, other):
        return Binary("mul", _wrap(other), self)

    def __truediv__(self, other):
        return Binary("div", self, _wrap(other))

    def __rtruediv__(self, other):
        return Binary("div", _wrap(other), self)

    def __neg__(self):
        return Unary("neg", self)

    def __pow__(self, exponent):
        return Pow(self, Fraction(exponent))

    def __str__(self):
        return to_string(self)

    def __call__(self, *args, **env):
        if args:
            return eval_point(self, args[0] if len(args) == 1 else args)
        return evaluate(self, env)


def _hashed(cls):
    # Trees get hashed a lot (CSE, memoised differentiation); cache the hash.
    orig = cls.__hash__

    def __hash__(self):
        h = self.__dict__.get("_hash")
        if h is None:
            h = orig(self)
            object.__setattr__(self, "_hash", h)
        return h

    cls.__hash__ = __hash__
    return cls


@_hashed
@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"non-finite constant {self.value!r}")
        object.__setattr__(self, "value", float(self.value))


@_hashed
@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str


@_hashed
@dataclass(frozen=True, eq=True)
class Unary(Expr):
    op: str
    arg: Expr

    def __post_init__(self):
        if self.op not in UNARY_OPS:
            raise ValueError(f"unknown unary op {self.op!r}")


@_hashed
@dataclass(frozen=True, eq=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr

    def __post_init__(self):
        if self.op not in BINARY_OPS:
            raise ValueError(f"unknown binary op {self.op!r}")


@_hashed
@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exponent: Fraction

    def __post_init__(self):
        object.__setattr__(self, "exponent", Fraction(self.exponent))


@_hashed
@dataclass(frozen=True, eq=True)
class Antiderivative(Expr):
    """``offset + integral_0^arg integrand(s) ds``, tabulated on ``interval``.

    The value comes from a cached quadrature table (adaptive Simpson per cell,
    cubic Hermite interpolation with exact slopes). The derivative is exact:
    ``integrand(arg) * d(arg)``.
    """

    integrand: Expr
    variable: str
    arg: Expr
    interval: tuple
    offset: float = 0.0
    cells: int = 2048
    _table: dict = field(default_factory=dict, compare=False, repr=False)

    def table(self):
        if "spline" not in self._table:
            from .quadrature import antiderivative_table
            self._table["spline"] = antiderivative_table(
                self.integrand, self.variable, self.interval, self.offset, self.cells)
        return self._table["spline"]

    def value(self, s):
        s = np.asarray(s, dtype=float)
        lo, hi = self.interval
        if np.any((s < lo) | (s > hi)):
            bad = s[(s < lo) | (s > hi)].ravel()[0]
            raise DomainError(
                f"antiderivative argument {bad!r} outside tabulated interval {self.interval}", self)
        return self.table()(s)


@_hashed
@dataclass(frozen=True, eq=True)
class PathIntegral(Expr):
    """Potential of a curl-free field: ``integral_anchor^p grad . dx``.

    Evaluated by composite Gauss-Legendre along the straight segment from
    ``anchor``; the partial derivative in variable ``i`` is ``gradient[i]``.
    """

    gradient: tuple
    anchor: tuple

    def value(self, x, y, z):
        from .quadrature import line_integral
        return line_integral(self.gradient, self.anchor, x, y, z)


def _wrap(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float, Fraction, np.floating, np.integer)):
        return Const(float(value))
    raise TypeError(f"cannot convert {type(value).__name__} to an expression")


def const(value: float) -> Const:
    return Const(float(value))


def var(name: str) -> Var:
    return Var(name)


def sin(e):
    return Unary("sin", _wrap(e))


def cos(e):
    return Unary("cos", _wrap(e))


def exp(e):
    return Unary("exp", _wrap(e))


def log(e):
    return Unary("log", _wrap(e))


def sqrt(e):
    return Unary("sqrt", _wrap(e))


def atan(e):
    return Unary("atan", _wrap(e))


def atan2(a, b):
    return Binary("atan2", _wrap(a), _wrap(b))


X, Y, Z = Var("x"), Var("y"), Var("z")
ZERO, ONE = Const(0.0), Const(1.0)


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))")


def _tokenize(source: str):
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            start = pos + (len(source[pos:]) - len(source[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {source[start]!r}", _byte(source, start), source)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


def _byte(source: str, char_index: int) -> int:
    return len(source[:char_index].encode("utf-8"))


class _Parser:
    def __init__(self, source, variables):
        self.source = source
        self.variables = tuple(variables)
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return ExprSyntaxError(message, _byte(self.source, tok[2]), self.source)

    def expect(self, text):
        tok = self.take()
        if tok[1] != text or tok[0] == "end":
            raise self.error(f"expected {text!r}, found {tok[1] or 'end of input'!r}", tok)
        return tok

    def parse(self):
        e = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            if tok[0] in ("name", "num") or tok[1] == "(":
                raise self.error("implicit multiplication is not allowed; use '*'", tok)
            raise self.error(f"unexpected {tok[1]!r}", tok)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            e = Binary("add" if op == "+" else "sub", e, self.term())
        return e

    def term(self):
        e = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            e = Binary("mul" if op == "*" else "div", e, self.factor())
        return e

    def factor(self):
        b = self.base()
        if self.peek()[1] == "^":
            self.take()
            b = Pow(b, self.exponent())
        return b

    def integer(self):
        tok = self.take()
        if tok[0] != "num" or not tok[1].isdigit():
            raise self.error("exponent must be an integer or a rational '(p/q)'", tok)
        return int(tok[1])

    def exponent(self):
        tok = self.peek()
        if tok[1] == "(":
            self.take()
            sign = -1 if self.peek()[1] == "-" and self.take() else 1
            p = self.integer()
            self.expect("/")
            q_tok = self.peek()
            q = self.integer()
            if q == 0:
                raise self.error("zero denominator in exponent", q_tok)
            self.expect(")")
            return Fraction(sign * p, q)
        sign = -1 if tok[1] == "-" and self.take() else 1
        return Fraction(sign * self.integer())

    def base(self):
        tok = self.take()
        kind, text, _ = tok
        if kind == "num":
            return Const(float(text))
        if kind == "op" and text == "-":
            if self.peek()[0] == "num":
                return Const(-float(self.take()[1]))
            return Unary("neg", self.base())
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                a = self.expr()
                if text == "atan2":
                    self.expect(",")
                    b = self.expr()
                    self.expect(")")
                    return Binary("atan2", a, b)
                self.expect(")")
                return Unary(text, a)
            if text in self.variables:
                return Var(text)
            raise ExprSyntaxError(f"unknown identifier {text!r}", _byte(self.source, tok[2]), self.source)
        raise self.error(f"unexpected {text or 'end of input'!r}", tok)


def parse(source: str, variables=CARTESIAN) -> Expr:
    """Parse expression text.

    ``variables`` lists the accepted variable names; profiles in one variable
    are parsed with e.g. ``variables=("s",)``.

    >>> parse("x*cos(z) - y*sin(z)")(1.0, 0.0, 0.0)
    1.0
    """
    return _Parser(source, variables).parse()


# ---------------------------------------------------------------------------
# printing

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2}
_SYM = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


def _fmt_num(v: float) -> str:
    s = repr(float(v))
    if s.endswith(".0"):
        s = s[:-2]
    return s


def _fmt_exponent(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    return f"({q.numerator}/{q.denominator})"


def to_string(e: Expr) -> str:
    """Print ``e`` so that ``parse(to_string(e)) == e`` for grammar nodes."""
    return _str(e, 0)


def _str(e, parent_prec):
    if isinstance(e, Const):
        return _fmt_num(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            a = e.arg
            inner = _str(a, 0)
            if isinstance(a, (Var, Unary)) and not (isinstance(a, Unary) and a.op == "neg") \
                    or isinstance(a, Binary) and a.op == "atan2":
                return "-" + inner
            return f"-({inner})"
        return f"{e.op}({_str(e.arg, 0)})"
    if isinstance(e, Binary):
        if e.op == "atan2":
            return f"atan2({_str(e.left, 0)}, {_str(e.right, 0)})"
        p = _PREC[e.op]
        left = _str(e.left, p)
        right = _str(e.right, p + 1)
        s = f"{left} {_SYM[e.op]} {right}"
        return f"({s})" if p < parent_prec else s
    if isinstance(e, Pow):
        b = e.base
        # '-' base binds tighter than '^', so negated bases print bare too
        if isinstance(b, (Var, Const, Unary)) or isinstance(b, Binary) and b.op == "atan2":
            bs = _str(b, 0)
        else:
            bs = f"({_str(b, 0)})"
        return f"{bs}^{_fmt_exponent(e.exponent)}"
    if isinstance(e, Antiderivative):
        return f"Antiderivative[{to_string(e.integrand)} d{e.variable}]({_str(e.arg, 0)})"
    if isinstance(e, PathIntegral):
        return f"PathIntegral[{', '.join(to_string(g) for g in e.gradient)}; anchor={e.anchor}]"
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# evaluation


def _rpow_array(a, q: Fraction):
    if q.denominator == 1:
        n = q.numerator
        if n < 0 and np.any(a == 0):
            raise ZeroDivisionError
        return np.power(a, float(n)) if n < 0 else a ** n
    if q.denominator % 2 == 1:
        return np.sign(a) ** q.numerator * np.abs(a) ** float(q)
    if np.any(a < 0) or (q < 0 and np.any(a == 0)):
        raise ValueError("negative base for even-root exponent")
    return np.power(a, float(q))


def _rpow_scalar(a: float, q: Fraction) -> float:
    if q.denominator == 1:
        return a ** q.numerator
    if q.denominator % 2 == 1:
        return math.copysign(1.0, a) ** q.numerator * abs(a) ** float(q)
    if a < 0:
        raise ValueError("negative base for even-root exponent")
    return a ** float(q)


def _check(ok, msg, node, env):
    ok = np.asarray(ok)
    if ok.all():
        return
    i = int(np.flatnonzero(~ok.ravel())[0]) if ok.ndim else 0
    raise DomainError(f"{msg} in {to_string(node)!r} at {_point_repr(env, i)}", node, _point_at(env, i))


def _point_at(env, i):
    out = {}
    for k, v in env.items():
        v = np.asarray(v, dtype=float)
        out[k] = float(v.ravel()[i]) if v.size > 1 else float(v)
    return out


def _point_repr(env, i):
    return "(" + ", ".join(f"{k}={v:.17g}" for k, v in _point_at(env, i).items()) + ")"


def _walk(e, env, memo):
    """Checked tree-walking evaluation; identifies the failing node."""
    r = memo.get(e)
    if r is not None:
        return r
    if isinstance(e, Const):
        r = e.value
    elif isinstance(e, Var):
        if e.name not in env:
            raise KeyError(f"no value for variable {e.name!r}")
        r = env[e.name]
    elif isinstance(e, Unary):
        a = _walk(e.arg, env, memo)
        op = e.op
        if op == "neg":
            r = -a
        elif op == "sin":
            r = np.sin(a)
        elif op == "cos":
            r = np.cos(a)
        elif op == "exp":
            with np.errstate(over="ignore"):
                r = np.exp(a)
            _check(np.isfinite(r), "exp overflow", e, env)
        elif op == "log":
            _check(np.asarray(a) > 0, "log of non-positive value", e, env)
            r = np.log(a)
        elif op == "sqrt":
            _check(np.asarray(a) >= 0, "sqrt of negative value", e, env)
            r = np.sqrt(a)
        elif op == "atan":
            r = np.arctan(a)
    elif isinstance(e, Binary):
        a = _walk(e.left, env, memo)
        b = _walk(e.right, env, memo)
        op = e.op
        if op == "add":
            r = a + b
        elif op == "sub":
            r = a - b
        elif op == "mul":
            r = a * b
        elif op == "div":
            _check(np.asarray(b) != 0, "division by zero", e, env)
            r = a / b
        elif op == "atan2":
            _check((np.asarray(a) != 0) | (np.asarray(b) != 0), "atan2(0, 0)", e, env)
            r = np.arctan2(a, b)
    elif isinstance(e, Pow):
        a = np.asarray(_walk(e.base, env, memo), dtype=float)
        q = e.exponent
        if q < 0:
            _check(a != 0, "zero raised to a negative power", e, env)
        if q.denominator % 2 == 0:
            _check(a >= 0, "even root of negative value", e, env)
        r = _rpow_array(a, q)
    elif isinstance(e, Antiderivative):
        r = e.value(_walk(e.arg, env, memo))
    elif isinstance(e, PathIntegral):
        r = e.value(env["x"], env["y"], env["z"])
    else:
        raise TypeError(f"not an expression: {e!r}")
    if np.ndim(r) == 0:
        r = float(r)
    else:
        _check(np.isfinite(r), "non-finite value", e, env)
    memo[e] = r
    return r


def evaluate(e: Expr, env: Mapping[str, object]):
    """Evaluate with variable values from ``env`` (floats or numpy arrays).

    Raises :class:`DomainError` naming the offending node and point.
    """
    fn = compile_expr(e, tuple(sorted(env)), backend="numpy")
    try:
        with np.errstate(divide="raise", invalid="raise", over="raise", under="ignore"):
            out = fn(*(env[k] for k in sorted(env)))
        if np.all(np.isfinite(out)):
            return out
    except (FloatingPointError, ZeroDivisionError, ValueError, OverflowError):
        pass
    arrays = {k: np.asarray(v, dtype=float) for k, v in env.items()}
    out = _walk(e, arrays, {})
    # _walk only returns when every node was in-domain
    return out


def eval_point(e: Expr, p) -> float:
    """Evaluate at a single Cartesian point ``p = (x, y, z)``."""
    x, y, z = (float(c) for c in p)
    fn = compile_expr(e, CARTESIAN, backend="math")
    try:
        v = fn(x, y, z)
        if math.isfinite(v):
            return float(v)
    except (ValueError, ZeroDivisionError, OverflowError):
        pass
    return float(_walk(e, {"x": x, "y": y, "z": z}, {}))


# ---------------------------------------------------------------------------
# compilation (common subexpressions are shared through structural hashing)

_COMPILED: dict = {}

_NP_FUN = {"sin": "np.sin", "cos": "np.cos", "exp": "np.exp", "log": "np.log",
           "sqrt": "np.sqrt", "atan": "np.arctan", "atan2": "np.arctan2"}
_M_FUN = {"sin": "math.sin", "cos": "math.cos", "exp": "math.exp", "log": "math.log",
          "sqrt": "math.sqrt", "atan": "math.atan", "atan2": "math.atan2"}


def compile_expr(e: Expr, args=CARTESIAN, backend: str = "numpy") -> Callable:
    """Generate a fast Python function ``f(*args)`` evaluating ``e``.

    The compiled function does no domain checking; callers that need
    diagnostics use :func:`evaluate` / :func:`eval_point`.
    """
    key = (e, tuple(args), backend)
    fn = _COMPILED.get(key)
    if fn is not None:
        return fn
    fn = _codegen([e], tuple(args), backend, single=True)
    if len(_COMPILED) > 4096:
        _COMPILED.clear()
    _COMPILED[key] = fn
    return fn


def compile_many(exprs, args=CARTESIAN, backend: str = "numpy") -> Callable:
    """Like :func:`compile_expr` for several expressions sharing subtrees; returns a tuple."""
    key = (tuple(exprs), tuple(args), backend, "many")
    fn = _COMPILED.get(key)
    if fn is None:
        fn = _codegen(list(exprs), tuple(args), backend, single=False)
        _COMPILED[key] = fn
    return fn


def _codegen(exprs, args, backend, single):
    funs = _NP_FUN if backend == "numpy" else _M_FUN
    ns = {"np": np, "math": math, "Fraction": Fraction,
          "_rpow": _rpow_array if backend == "numpy" else _rpow_scalar}
    lines = []
    names: dict = {}
    counter = [0]

    def emit(node):
        hit = names.get(node)
        if hit is not None:
            return hit
        if isinstance(node, Const):
            return repr(node.value)
        if isinstance(node, Var):
            if node.name not in args:
                raise KeyError(f"no value for variable {node.name!r}")
            return "v_" + node.name
        if isinstance(node, Unary):
            a = emit(node.arg)
            code = f"-({a})" if node.op == "neg" else f"{funs[node.op]}({a})"
        elif isinstance(node, Binary):
            a, b = emit(node.left), emit(node.right)
            if node.op == "atan2":
                code = f"{funs['atan2']}({a}, {b})"
            else:
                code = f"({a}) {_SYM[node.op]} ({b})"
        elif isinstance(node, Pow):
            a = emit(node.base)
            q = node.exponent
            if q.denominator == 1 and q.numerator >= 0:
                code = f"({a}) ** {q.numerator}"
            elif q.denominator == 1 and backend == "math":
                code = f"1.0 / ({a}) ** {-q.numerator}"
            else:
                qn = f"_q{counter[0]}"
                counter[0] += 1
                ns[qn] = q
                code = f"_rpow({a}, {qn})"
        elif isinstance(node, Antiderivative):
            a = emit(node.arg)
            fn_name = f"_ad{counter[0]}"
            counter[0] += 1
            if backend == "numpy":
                ns[fn_name] = node.value
            else:
                ns[fn_name] = lambda s, _n=node: float(_n.value(s))
            code = f"{fn_name}({a})"
        elif isinstance(node, PathIntegral):
            fn_name = f"_pi{counter[0]}"
            counter[0] += 1
            if backend == "numpy":
                ns[fn_name] = node.value
            else:
                ns[fn_name] = lambda x, y, z, _n=node: float(_n.value(x, y, z))
            code = f"{fn_name}(v_x, v_y, v_z)"
        else:
            raise TypeError(f"not an expression: {node!r}")
        name = f"t{counter[0]}"
        counter[0] += 1
        lines.append(f"    {name} = {code}")
        names[node] = name
        return name

    results = [emit(x) for x in exprs]
    params = ", ".join("v_" + a for a in args)
    body = "\n".join(lines)
    if single:
        ret = results[0]
        if backend == "numpy":
            ret = f"{ret} + 0.0 * ({' + '.join('v_' + a for a in args)})" if args else ret
    else:
        if backend == "numpy" and args:
            bshape = " + ".join("0.0 * v_" + a for a in args)
            ret = "(" + ", ".join(f"{r} + {bshape}" for r in results) + ",)"
        else:
            ret = "(" + ", ".join(results) + ",)"
    src = f"def _f({params}):\n{body}\n    return {ret}\n"
    exec(compile(src, "<beltrami.expr>", "exec"), ns)
    return ns["_f"]


# ---------------------------------------------------------------------------
# simplification


def _is(e, value):
    return isinstance(e, Const) and e.value == value


def _is_neg(e):
    return isinstance(e, Unary) and e.op == "neg"


def _fold(fn, *vals):
    try:
        with np.errstate(all="raise"):
            out = float(fn(*vals))
    except (FloatingPointError, ValueError, ZeroDivisionError, OverflowError):
        return None
    return out if math.isfinite(out) else None


_UFOLD = {"neg": lambda t: -t, "sin": math.sin, "cos": math.cos, "exp": math.exp,
          "log": math.log, "sqrt": math.sqrt, "atan": math.atan}
_BFOLD = {"add": lambda s, t: s + t, "sub": lambda s, t: s - t, "mul": lambda s, t: s * t,
          "div": lambda s, t: s / t, "atan2": math.atan2}


def _un(op, a):
    if isinstance(a, Const):
        v = _fold(_UFOLD[op], a.value)
        if v is not None:
            return Const(v)
    if op == "neg" and _is_neg(a):
        return a.arg
    return Unary(op, a)


def _bin(op, a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        v = _fold(_BFOLD[op], a.value, b.value)
        if v is not None:
            return Const(v)
    if op == "add":
        if _is(a, 0.0):
            return b
        if _is(b, 0.0):
            return a
        if _is_neg(b):
            return Binary("sub", a, b.arg)
    elif op == "sub":
        if _is(b, 0.0):
            return a
        if _is(a, 0.0):
            return _un("neg", b)
        if _is_neg(b):
            return Binary("add", a, b.arg)
    elif op == "mul":
        if _is(a, 0.0) or _is(b, 0.0):
            return ZERO
        if _is(a, 1.0):
            return b
        if _is(b, 1.0):
            return a
        if _is(a, -1.0):
            return _un("neg", b)
        if _is(b, -1.0):
            return _un("neg", a)
        if _is_neg(a) and _is_neg(b):
            return Binary("mul", a.arg, b.arg)
        if _is_neg(a):
            return _un("neg", Binary("mul", a.arg, b))
        if _is_neg(b):
            return _un("neg", Binary("mul", a, b.arg))
    elif op == "div":
        if _is(a, 0.0):
            return ZERO
        if _is(b, 1.0):
            return a
        if _is_neg(a):
            return _un("neg", Binary("div", a.arg, b))
    return Binary(op, a, b)


def _pow(b, q):
    q = Fraction(q)
    if q == 1:
        return b
    if q == 0:
        return ONE
    if isinstance(b, Const):
        v = _fold(lambda t: _rpow_scalar(t, q), b.value)
        if v is not None:
            return Const(v)
    if isinstance(b, Pow) and q.denominator == 1 and b.exponent.denominator == 1:
        return _pow(b.base, b.exponent * q)
    return Pow(b, q)


def simplify(e: Expr) -> Expr:
    """Constant folding and identity elimination; pointwise value-preserving.

    >>> to_string(simplify(parse("0*sin(x)+y")))
    'y'
    """
    return _simp(e, {})


def _simp(e, memo):
    r = memo.get(e)
    if r is not None:
        return r
    if isinstance(e, (Const, Var, PathIntegral)):
        r = e
    elif isinstance(e, Unary):
        r = _un(e.op, _simp(e.arg, memo))
    elif isinstance(e, Binary):
        r = _bin(e.op, _simp(e.left, memo), _simp(e.right, memo))
    elif isinstance(e, Pow):
        r = _pow(_simp(e.base, memo), e.exponent)
    elif isinstance(e, Antiderivative):
        r = Antiderivative(e.integrand, e.variable, _simp(e.arg, memo), e.interval, e.offset, e.cells, e._table)
    else:
        raise TypeError(f"not an expression: {e!r}")
    memo[e] = r
    return r


# ---------------------------------------------------------------------------
# differentiation


def differentiate(e: Expr, v: str) -> Expr:
    """Exact partial derivative of ``e`` with respect to variable ``v`` (simplified).

    >>> to_string(differentiate(parse("sin(z)"), "z"))
    'cos(z)'
    """
    return _diff(simplify(e), v, {})


def _diff(e, v, memo):
    # ``e`` is already simplified; results are assembled with simplifying constructors.
    r = memo.get(e)
    if r is not None:
        return r
    if isinstance(e, Const):
        r = ZERO
    elif isinstance(e, Var):
        r = ONE if e.name == v else ZERO
    elif isinstance(e, Unary):
        u = e.arg
        du = _diff(u, v, memo)
        op = e.op
        if _is(du, 0.0):
            r = ZERO
        elif op == "neg":
            r = _un("neg", du)
        elif op == "sin":
            r = _bin("mul", _un("cos", u), du)
        elif op == "cos":
            r = _un("neg", _bin("mul", _un("sin", u), du))
        elif op == "exp":
            r = _bin("mul", e, du)
        elif op == "log":
            r = _bin("div", du, u)
        elif op == "sqrt":
            r = _bin("div", du, _bin("mul", Const(2.0), e))
        elif op == "atan":
            r = _bin("div", du, _bin("add", ONE, _pow(u, 2)))
    elif isinstance(e, Binary):
        a, b = e.left, e.right
        da, db = _diff(a, v, memo), _diff(b, v, memo)
        op = e.op
        if op == "add":
            r = _bin("add", da, db)
        elif op == "sub":
            r = _bin("sub", da, db)
        elif op == "mul":
            r = _bin("add", _bin("mul", da, b), _bin("mul", a, db))
        elif op == "div":
            if _is(db, 0.0):
                r = _bin("div", da, b)
            else:
                r = _bin("div", _bin("sub", _bin("mul", da, b), _bin("mul", a, db)), _pow(b, 2))
        elif op == "atan2":
            r = _bin("div", _bin("sub", _bin("mul", b, da), _bin("mul", a, db)),
                     _bin("add", _pow(a, 2), _pow(b, 2)))
    elif isinstance(e, Pow):
        q = e.exponent
        du = _diff(e.base, v, memo)
        r = _bin("mul", _bin("mul", Const(float(q)), _pow(e.base, q - 1)), du)
    elif isinstance(e, Antiderivative):
        g = simplify(substitute(e.integrand, {e.variable: e.arg}))
        r = _bin("mul", g, _diff(e.arg, v, memo))
    elif isinstance(e, PathIntegral):
        r = simplify(e.gradient[CARTESIAN.index(v)]) if v in CARTESIAN else ZERO
    else:
        raise TypeError(f"not an expression: {e!r}")
    memo[e] = r
    return r


# ---------------------------------------------------------------------------
# utilities


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions."""
    mapping = {k: _wrap(v) for k, v in mapping.items()}
    memo: dict = {}

    def sub(n):
        r = memo.get(n)
        if r is not None:
            return r
        if isinstance(n, Var):
            r = mapping.get(n.name, n)
        elif isinstance(n, Const):
            r = n
        elif isinstance(n, Unary):
            r = Unary(n.op, sub(n.arg))
        elif isinstance(n, Binary):
            r = Binary(n.op, sub(n.left), sub(n.right))
        elif isinstance(n, Pow):
            r = Pow(sub(n.base), n.exponent)
        elif isinstance(n, Antiderivative):
            r = Antiderivative(n.integrand, n.variable, sub(n.arg), n.interval, n.offset, n.cells, n._table)
        elif isinstance(n, PathIntegral):
            if any(k in CARTESIAN for k in mapping):
                raise ValueError("cannot substitute Cartesian variables into a path integral")
            r = n
        else:
            raise TypeError(f"not an expression: {n!r}")
        memo[n] = r
        return r

    return sub(e)


def free_variables(e: Expr) -> set:
    out = set()
    stack = [e]
    seen = set()
    while stack:
        n = stack.pop()
        if id(n) in seen:
            continue
        seen.add(id(n))
        if isinstance(n, Var):
            out.add(n.name)
        elif isinstance(n, Unary):
            stack.append(n.arg)
        elif isinstance(n, Binary):
            stack.extend((n.left, n.right))
        elif isinstance(n, Pow):
            stack.append(n.base)
        elif isinstance(n, Antiderivative):
            stack.append(n.arg)
        elif isinstance(n, PathIntegral):
            out.update(CARTESIAN)
    return out


def is_grammar_expr(e: Expr) -> bool:
    """True if ``e`` contains no quadrature-backed nodes (i.e. is printable/parsable)."""
    stack = [e]
    while stack:
        n = stack.pop()
        if isinstance(n, (Antiderivative, PathIntegral)):
            return False
        if isinstance(n, Unary):
            stack.append(n.arg)
        elif isinstance(n, Binary):
            stack.extend((n.left, n.right))
        elif isinstance(n, Pow):
            stack.append(n.base)
    return True
