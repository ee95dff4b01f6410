"""Closed-form expression DAGs over three chart coordinates.

Expressions are immutable nodes built with ordinary Python operators::

    >>> x1, x2, x3 = coords()
    >>> f = x1**2 + sin(x2)
    >>> to_sexpr(f)
    '(+ (^ x1 2) (sin x2))'

Evaluation goes through generated straight-line code (one temporary per DAG
node, so shared subexpressions are computed once). Two backends exist: a
numpy one for batches of points and a ``math`` one for single points inside
the ODE integrator. Both can propagate forward-mode dual parts (value plus
the three partial derivatives) alongside the value.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .errors import EvaluationError, ParseError

DIV_GUARD = 1e-14
# exp(-1/s) underflows to 0.0 in double precision once s < 1/745
BUMP_CUTOFF = 1.0 / 700.0

_UNARY = ("neg", "sin", "cos", "exp", "bump")
_BINARY = ("add", "sub", "mul", "div", "pow", "atan2")


class Expr:
    __slots__ = ("op", "args", "value", "__weakref__")

    def __init__(self, op: str, args: tuple = (), value=None):
        self.op = op
        self.args = args
        self.value = value

    # construction ---------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __pow__(self, other):
        return power(self, other)

    def __neg__(self):
        return neg(self)

    def __repr__(self):
        s = to_sexpr(self)
        if len(s) > 80:
            s = s[:77] + "..."
        return f"Expr({s})"

    @property
    def is_const(self) -> bool:
        return self.op == "const"

    def __call__(self, point) -> float:
        """Evaluate at a single point (convenience wrapper)."""
        return float(evaluate(self, [point])[0])


def const(v) -> Expr:
    return Expr("const", value=float(v))


def var(i: int) -> Expr:
    if i not in (0, 1, 2):
        raise ValueError("coordinate index must be 0, 1 or 2")
    return Expr("var", value=i)


def coords() -> tuple[Expr, Expr, Expr]:
    return var(0), var(1), var(2)


ZERO = const(0.0)
ONE = const(1.0)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, np.floating, np.integer)):
        return const(x)
    raise TypeError(f"cannot convert {type(x).__name__} to Expr")


def _is(e: Expr, v: float) -> bool:
    return e.op == "const" and e.value == v


def add(a, b) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if a.is_const and b.is_const:
        return const(a.value + b.value)
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    return Expr("add", (a, b))


def sub(a, b) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if a.is_const and b.is_const:
        return const(a.value - b.value)
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    return Expr("sub", (a, b))


def mul(a, b) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if a.is_const and b.is_const:
        return const(a.value * b.value)
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if _is(a, -1.0):
        return neg(b)
    if _is(b, -1.0):
        return neg(a)
    return Expr("mul", (a, b))


def div(a, b) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if _is(b, 0.0):
        raise EvaluationError("division by constant zero")
    if a.is_const and b.is_const:
        return const(a.value / b.value)
    if _is(a, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    return Expr("div", (a, b))


def power(a, p) -> Expr:
    a = as_expr(a)
    p = as_expr(p)
    if not p.is_const:
        raise TypeError("exponent must be a constant")
    if _is(p, 1.0):
        return a
    if _is(p, 0.0):
        return ONE
    if a.is_const:
        return const(a.value ** p.value)
    return Expr("pow", (a, p))


def neg(a) -> Expr:
    a = as_expr(a)
    if a.is_const:
        return const(-a.value)
    if a.op == "neg":
        return a.args[0]
    return Expr("neg", (a,))


def _unary(op, fn):
    def build(a) -> Expr:
        a = as_expr(a)
        if a.is_const:
            return const(fn(a.value))
        return Expr(op, (a,))

    build.__name__ = op
    return build


sin = _unary("sin", math.sin)
cos = _unary("cos", math.cos)
exp = _unary("exp", math.exp)


def _bump_value(s: float, k: int = 0) -> float:
    return math.exp(-1.0 / s) / s ** k if s > BUMP_CUTOFF else 0.0


def bump(a, k: int = 0) -> Expr:
    """exp(-1/s) / s^k for s > 0 and 0 otherwise; flat at s = 0.

    The orders k close the family under differentiation:
    d/ds bump_k = bump_{k+2} - k bump_{k+1}.
    """
    a = as_expr(a)
    k = int(k)
    if k < 0:
        raise ValueError("bump order must be non-negative")
    if a.is_const:
        return const(_bump_value(a.value, k))
    return Expr("bump", (a,), k)


def atan2(y, x) -> Expr:
    """Polar angle of (x, y) in (-pi, pi]; smooth away from the origin."""
    y, x = as_expr(y), as_expr(x)
    if y.is_const and x.is_const:
        return const(math.atan2(y.value, x.value))
    return Expr("atan2", (y, x))


def sqrt(a) -> Expr:
    return power(a, 0.5)


def smooth_step(t) -> Expr:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, flat at both ends."""
    t = as_expr(t)
    u, v = bump(t), bump(1.0 - t)
    return u / (u + v)


# traversal ------------------------------------------------------------------
def topo_order(roots: Iterable[Expr]) -> list[Expr]:
    seen: set[int] = set()
    order: list[Expr] = []
    stack = [(r, False) for r in roots]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for a in node.args:
            if id(a) not in seen:
                stack.append((a, False))
    return order


def depends_on(e: Expr) -> set[int]:
    return {n.value for n in topo_order([e]) if n.op == "var"}


def substitute(e: Expr, mapping: Sequence[Expr]) -> Expr:
    """Replace coordinates ``x1..x3`` by the given expressions (composition)."""
    memo: dict[int, Expr] = {}
    for n in topo_order([e]):
        if n.op == "const":
            memo[id(n)] = n
        elif n.op == "var":
            memo[id(n)] = as_expr(mapping[n.value])
        else:
            args = [memo[id(a)] for a in n.args]
            memo[id(n)] = bump(args[0], n.value) if n.op == "bump" else _REBUILD[n.op](*args)
    return memo[id(e)]


def diff(e: Expr, i: int) -> Expr:
    """Symbolic partial derivative. Used to build derived fields (e.g. Jacobians
    of compositions); numeric derivatives go through the dual backend."""
    memo: dict[int, Expr] = {}
    for n in topo_order([e]):
        op = n.op
        if op == "const":
            d = ZERO
        elif op == "var":
            d = ONE if n.value == i else ZERO
        else:
            da = [memo[id(a)] for a in n.args]
            a = n.args
            if op == "add":
                d = da[0] + da[1]
            elif op == "sub":
                d = da[0] - da[1]
            elif op == "mul":
                d = da[0] * a[1] + a[0] * da[1]
            elif op == "div":
                d = (da[0] * a[1] - a[0] * da[1]) / (a[1] * a[1])
            elif op == "pow":
                p = a[1].value
                d = p * power(a[0], p - 1.0) * da[0]
            elif op == "atan2":
                d = (a[1] * da[0] - a[0] * da[1]) / (a[0] * a[0] + a[1] * a[1])
            elif op == "neg":
                d = -da[0]
            elif op == "sin":
                d = cos(a[0]) * da[0]
            elif op == "cos":
                d = -sin(a[0]) * da[0]
            elif op == "exp":
                d = n * da[0]
            elif op == "bump":
                k = n.value
                if _is(da[0], 0.0):
                    d = ZERO
                else:
                    dk = bump(a[0], k + 2) - k * bump(a[0], k + 1) if k else bump(a[0], 2)
                    d = dk * da[0]
            else:  # pragma: no cover
                raise ValueError(op)
        memo[id(n)] = d
    return memo[id(e)]


_REBUILD = {
    "add": add, "sub": sub, "mul": mul, "div": div, "pow": power, "atan2": atan2,
    "neg": neg, "sin": sin, "cos": cos, "exp": exp, "bump": bump,
}

# s-expressions --------------------------------------------------------------
_SYM = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^", "atan2": "atan2",
        "neg": "neg", "sin": "sin", "cos": "cos", "exp": "exp", "bump": "bump"}
_FROM_SYM = {v: k for k, v in _SYM.items()}


def _fmt_const(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_sexpr(e: Expr) -> str:
    memo: dict[int, str] = {}
    for n in topo_order([e]):
        if n.op == "const":
            s = _fmt_const(n.value)
        elif n.op == "var":
            s = f"x{n.value + 1}"
        else:
            head = f"bump{n.value}" if n.op == "bump" and n.value else _SYM[n.op]
            s = "(" + " ".join([head] + [memo[id(a)] for a in n.args]) + ")"
        memo[id(n)] = s
    return memo[id(e)]


def _tokenize(text: str) -> list[str]:
    return text.replace("(", " ( ").replace(")", " ) ").split()


def parse_sexpr(text: str) -> Expr:
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty expression")
    pos = 0

    def atom(tok: str) -> Expr:
        if tok in ("x1", "x2", "x3"):
            return var(int(tok[1]) - 1)
        try:
            return const(float(tok))
        except ValueError:
            raise ParseError(f"unknown atom {tok!r}") from None

    def parse() -> Expr:
        nonlocal pos
        if pos >= len(tokens):
            raise ParseError("unexpected end of input")
        tok = tokens[pos]
        pos += 1
        if tok == ")":
            raise ParseError("unexpected ')'")
        if tok != "(":
            return atom(tok)
        if pos >= len(tokens):
            raise ParseError("unexpected end of input")
        head = tokens[pos]
        pos += 1
        args = []
        while pos < len(tokens) and tokens[pos] != ")":
            args.append(parse())
        if pos >= len(tokens):
            raise ParseError("missing ')'")
        pos += 1
        if head.startswith("bump") and head[4:].isdigit():
            if len(args) != 1:
                raise ParseError(f"{head} takes 1 argument(s), got {len(args)}")
            return bump(args[0], int(head[4:]))
        if head not in _FROM_SYM:
            raise ParseError(f"unknown operator {head!r}")
        op = _FROM_SYM[head]
        if op in ("add", "mul"):
            if len(args) < 2:
                raise ParseError(f"{head} needs at least two arguments")
            out = args[0]
            for a in args[1:]:
                out = _REBUILD[op](out, a)
            return out
        if op == "sub" and len(args) == 1:
            return neg(args[0])
        want = 2 if op in _BINARY else 1
        if len(args) != want:
            raise ParseError(f"{head} takes {want} argument(s), got {len(args)}")
        return _REBUILD[op](*args)

    e = parse()
    if pos != len(tokens):
        raise ParseError("trailing tokens")
    return e


# code generation ------------------------------------------------------------
class _Backend:
    def __init__(self, name, mod, sin, cos, exp):
        self.name, self.mod = name, mod
        self.sin, self.cos, self.exp = sin, cos, exp


_NP = _Backend("np", np, "np.sin", "np.cos", "np.exp")
_MATH = _Backend("math", math, "math.sin", "math.cos", "math.exp")


def _guard_div(d):
    raise EvaluationError("division by ~0 in expression evaluation")


def _bad_pow():
    raise EvaluationError("non-integer power of a non-positive number")


def _np_bump(s, k=0):
    pos = s > BUMP_CUTOFF
    safe = np.where(pos, s, 1.0)
    e = np.exp(-1.0 / safe)
    val = np.where(pos, e / safe ** k, 0.0)
    der = np.where(pos, e * (1.0 / safe ** (k + 2) - k / safe ** (k + 1)), 0.0)
    return val, der


def _math_bump(s, k=0):
    if s > BUMP_CUTOFF:
        e = math.exp(-1.0 / s)
        return e / s ** k, e * (1.0 / s ** (k + 2) - k / s ** (k + 1))
    return 0.0, 0.0


def _gen(roots: Sequence[Expr], backend: _Backend, dual: bool) -> str:
    order = topo_order(roots)
    names: dict[int, str] = {}
    lines = ["def _f(x0, x1, x2):"]
    vec = backend is _NP

    def nm(n):
        return names[id(n)]

    for k, n in enumerate(order):
        v = f"v{k}"
        names[id(n)] = v
        op = n.op
        if op == "const":
            lines.append(f"    {v} = {n.value!r}")
            if dual:
                lines.append(f"    {v}_0 = {v}_1 = {v}_2 = 0.0")
            continue
        if op == "var":
            lines.append(f"    {v} = x{n.value}")
            if dual:
                for j in range(3):
                    lines.append(f"    {v}_{j} = {1.0 if j == n.value else 0.0}")
            continue
        a = [nm(x) for x in n.args]
        if op == "add":
            lines.append(f"    {v} = {a[0]} + {a[1]}")
            dl = [f"{a[0]}_{j} + {a[1]}_{j}" for j in range(3)]
        elif op == "sub":
            lines.append(f"    {v} = {a[0]} - {a[1]}")
            dl = [f"{a[0]}_{j} - {a[1]}_{j}" for j in range(3)]
        elif op == "neg":
            lines.append(f"    {v} = -{a[0]}")
            dl = [f"-{a[0]}_{j}" for j in range(3)]
        elif op == "mul":
            lines.append(f"    {v} = {a[0]} * {a[1]}")
            dl = [f"{a[0]}_{j} * {a[1]} + {a[0]} * {a[1]}_{j}" for j in range(3)]
        elif op == "div":
            if vec:
                lines.append(f"    if np.any(np.abs({a[1]}) < {DIV_GUARD!r}): _guard_div({a[1]})")
            else:
                lines.append(f"    if abs({a[1]}) < {DIV_GUARD!r}: _guard_div({a[1]})")
            lines.append(f"    {v} = {a[0]} / {a[1]}")
            dl = [f"({a[0]}_{j} - {v} * {a[1]}_{j}) / {a[1]}" for j in range(3)]
        elif op == "pow":
            p = n.args[1].value
            if p == int(p):
                if p < 0:
                    if vec:
                        lines.append(f"    if np.any(np.abs({a[0]}) < {DIV_GUARD!r}): _guard_div({a[0]})")
                    else:
                        lines.append(f"    if abs({a[0]}) < {DIV_GUARD!r}: _guard_div({a[0]})")
                lines.append(f"    {v} = {a[0]} ** {int(p)}")
                dfac = f"({p!r} * {a[0]} ** {int(p) - 1})" if p != 1 else "1.0"
            else:
                if vec:
                    lines.append(f"    if np.any({a[0]} <= 0.0): _bad_pow()")
                else:
                    lines.append(f"    if {a[0]} <= 0.0: _bad_pow()")
                lines.append(f"    {v} = {a[0]} ** {p!r}")
                dfac = f"({p!r} * {v} / {a[0]})"
            dl = [f"{dfac} * {a[0]}_{j}" for j in range(3)]
        elif op == "atan2":
            fn = "np.arctan2" if vec else "math.atan2"
            lines.append(f"    {v} = {fn}({a[0]}, {a[1]})")
            if dual:
                if vec:
                    lines.append(f"    if np.any({a[0]} * {a[0]} + {a[1]} * {a[1]} < {DIV_GUARD!r}): _guard_div(0)")
                else:
                    lines.append(f"    if {a[0]} * {a[0]} + {a[1]} * {a[1]} < {DIV_GUARD!r}: _guard_div(0)")
                lines.append(f"    {v}_q = {a[0]} * {a[0]} + {a[1]} * {a[1]}")
            dl = [f"({a[1]} * {a[0]}_{j} - {a[0]} * {a[1]}_{j}) / {v}_q" for j in range(3)]
        elif op == "sin":
            lines.append(f"    {v} = {backend.sin}({a[0]})")
            if dual:
                lines.append(f"    {v}_c = {backend.cos}({a[0]})")
            dl = [f"{v}_c * {a[0]}_{j}" for j in range(3)]
        elif op == "cos":
            lines.append(f"    {v} = {backend.cos}({a[0]})")
            if dual:
                lines.append(f"    {v}_s = -{backend.sin}({a[0]})")
            dl = [f"{v}_s * {a[0]}_{j}" for j in range(3)]
        elif op == "exp":
            lines.append(f"    {v} = {backend.exp}({a[0]})")
            dl = [f"{v} * {a[0]}_{j}" for j in range(3)]
        elif op == "bump":
            fn = "_np_bump" if vec else "_math_bump"
            lines.append(f"    {v}, {v}_d = {fn}({a[0]}, {n.value or 0})")
            dl = [f"{v}_d * {a[0]}_{j}" for j in range(3)]
        else:  # pragma: no cover
            raise ValueError(op)
        if dual:
            for j in range(3):
                lines.append(f"    {v}_{j} = {dl[j]}")
    outs = [nm(r) for r in roots]
    if dual:
        grads = ", ".join(f"({o}_0, {o}_1, {o}_2)" for o in outs)
        lines.append(f"    return ({', '.join(outs)},), ({grads},)")
    else:
        lines.append(f"    return ({', '.join(outs)},)")
    return "\n".join(lines)


def _build(roots, backend, dual):
    src = _gen(roots, backend, dual)
    ns = {"np": np, "math": math, "_guard_div": _guard_div, "_bad_pow": _bad_pow,
          "_np_bump": _np_bump, "_math_bump": _math_bump}
    exec(compile(src, "<tgfol-expr>", "exec"), ns)
    return ns["_f"]


def compile_exprs(exprs: Sequence[Expr]):
    """Vectorized value evaluator: ``f(x0, x1, x2) -> tuple of arrays``."""
    raw = _build(list(exprs), _NP, False)

    def f(x0, x1, x2):
        shape = np.broadcast(x0, x1, x2).shape
        with np.errstate(over="ignore", invalid="ignore"):
            out = raw(x0, x1, x2)
        return tuple(np.broadcast_to(np.asarray(o, dtype=float), shape) for o in out)

    return f


def compile_dual(exprs: Sequence[Expr]):
    """Vectorized forward-mode evaluator returning values and gradients.

    ``f(x0, x1, x2) -> (values, grads)`` where ``values`` has shape ``(m, N)``
    and ``grads`` shape ``(m, 3, N)``.
    """
    raw = _build(list(exprs), _NP, True)

    def f(x0, x1, x2):
        shape = np.broadcast(x0, x1, x2).shape
        with np.errstate(over="ignore", invalid="ignore"):
            vals, grads = raw(x0, x1, x2)
        V = np.stack([np.broadcast_to(np.asarray(v, dtype=float), shape) for v in vals])
        G = np.stack([np.stack([np.broadcast_to(np.asarray(d, dtype=float), shape) for d in g])
                      for g in grads])
        return V, G

    return f


def compile_dual_scalar(exprs: Sequence[Expr]):
    """Single-point forward-mode evaluator built on :mod:`math` (fast for ODEs).

    ``f(x0, x1, x2) -> (values tuple, grads tuple of 3-tuples)``
    """
    return _build(list(exprs), _MATH, True)


def evaluate(e: Expr, points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return compile_exprs([e])(pts[:, 0], pts[:, 1], pts[:, 2])[0]
