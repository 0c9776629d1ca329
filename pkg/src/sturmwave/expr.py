"""Small expression language for coefficients, data and forcing.

Accepted: numbers, ``x``, ``t``, ``pi``, ``e``, ``+ - * / **``, unary minus,
and the functions ``sin``, ``cos``, ``exp``, ``sqrt`` and ``H`` (Heaviside,
right-continuous).  Arguments of ``H`` must be affine in ``x``; each one
contributes a breakpoint.  Named presets are also understood:

    zero, const:a, sin:k (= sin(k pi x)), bump, heaviside:x0:h, kink (= min(x, 1-x))
"""

from __future__ import annotations

import ast
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import sympy as sp

from .coefficients import PiecewiseSmoothFn, merge_points
from .errors import ConfigError

X, T = sp.symbols("x t", real=True)
_H = sp.Function("H")

_FUNCS = {"sin": sp.sin, "cos": sp.cos, "exp": sp.exp, "sqrt": sp.sqrt, "H": _H}
_NAMES = {"x": X, "t": T, "pi": sp.pi, "e": sp.E}
_BINOPS = {ast.Add: lambda a, b: a + b, ast.Sub: lambda a, b: a - b, ast.Mult: lambda a, b: a * b,
           ast.Div: lambda a, b: a / b, ast.Pow: lambda a, b: a**b}

PRESETS = ("zero", "const", "sin", "bump", "heaviside", "kink")


def _to_sympy(node: ast.AST, text: str) -> sp.Expr:
    if isinstance(node, ast.Expression):
        return _to_sympy(node.body, text)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return sp.nsimplify(node.value) if isinstance(node.value, int) else sp.Float(node.value, 17)
    if isinstance(node, ast.Name):
        if node.id not in _NAMES:
            raise ConfigError(f"unknown name {node.id!r} in expression {text!r}")
        return _NAMES[node.id]
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_to_sympy(node.left, text), _to_sympy(node.right, text))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _to_sympy(node.operand, text)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        name = node.func.id
        if name not in _FUNCS or len(node.args) != 1:
            raise ConfigError(f"unsupported call {name}(...) in expression {text!r}")
        return _FUNCS[name](_to_sympy(node.args[0], text))
    raise ConfigError(f"unsupported syntax in expression {text!r}")


def parse_expression(text: str) -> sp.Expr:
    try:
        tree = ast.parse(text.strip().replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from None
    return _to_sympy(tree, text)


def _heaviside_breaks(expr: sp.Expr) -> list[float]:
    out = []
    for h in expr.atoms(_H):
        arg = sp.expand(h.args[0])
        if arg.has(T):
            raise ConfigError(f"H argument {arg} must not depend on t")
        poly = sp.Poly(arg, X) if arg.has(X) else None
        if poly is None or poly.degree() != 1:
            raise ConfigError(f"H argument {arg} must be affine in x")
        a, b = (float(c) for c in poly.all_coeffs())
        loc = -b / a
        if 0.0 < loc < 1.0:
            out.append(loc)
    return list(merge_points(out))


def _resolve_heaviside(expr: sp.Expr, x_mid: float) -> sp.Expr:
    reps = {}
    for h in expr.atoms(_H):
        v = float(h.args[0].subs(X, x_mid))
        reps[h] = sp.Integer(1) if v >= 0 else sp.Integer(0)
    return expr.xreplace(reps)


def _lambdify(expr: sp.Expr, args) -> Callable:
    return sp.lambdify(args, expr, modules="numpy")


@dataclass(frozen=True)
class CompiledExpr:
    text: str
    expr: sp.Expr
    breakpoints: tuple[float, ...]

    @property
    def depends_on_t(self) -> bool:
        return self.expr.has(T)

    def _pieces(self) -> list[sp.Expr]:
        edges = (0.0, *self.breakpoints, 1.0)
        return [_resolve_heaviside(self.expr, 0.5 * (a + b)) for a, b in zip(edges[:-1], edges[1:])]

    def to_psf(self) -> PiecewiseSmoothFn:
        if self.depends_on_t:
            raise ConfigError(f"expression {self.text!r} depends on t where a function of x is required")
        pieces = []
        for e in self._pieces():
            f = _lambdify(e, (X,))
            df = _lambdify(sp.diff(e, X), (X,))
            pieces.append((f, df))
        zero = self.expr == 0
        return PiecewiseSmoothFn(self.breakpoints, pieces, zero=bool(zero))

    def to_tx(self) -> Callable[[float, np.ndarray], np.ndarray]:
        pieces = [_lambdify(e, (T, X)) for e in self._pieces()]
        bps = np.asarray(self.breakpoints)

        def f(t, x):
            x = np.asarray(x, dtype=float)
            if len(pieces) == 1:
                return np.broadcast_to(np.asarray(pieces[0](t, x), dtype=float), x.shape)
            idx = np.searchsorted(bps, x, side="right")
            out = np.empty(x.shape)
            for k, pf in enumerate(pieces):
                mask = idx == k
                if mask.any():
                    out[mask] = np.broadcast_to(np.asarray(pf(t, x[mask]), dtype=float), x[mask].shape)
            return out

        return f


def _bump_psf() -> PiecewiseSmoothFn:
    def f(x):
        x = np.asarray(x, dtype=float)
        s = 4.0 * (x - 0.5)
        out = np.zeros(x.shape)
        inside = np.abs(s) < 1.0
        si = s[inside]
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - si * si))
        return out

    def df(x):
        x = np.asarray(x, dtype=float)
        s = 4.0 * (x - 0.5)
        out = np.zeros(x.shape)
        inside = np.abs(s) < 1.0
        si = s[inside]
        u = 1.0 - si * si
        out[inside] = np.exp(1.0 - 1.0 / u) * (-2.0 * si / (u * u)) * 4.0
        return out

    return PiecewiseSmoothFn.smooth(f, df)


def preset_expression(text: str) -> str | None:
    """Expression equivalent of a preset (``None`` for ``bump`` and for non-presets)."""
    text = str(text).strip()
    head, *rest = text.split(":")
    try:
        if head == "zero" and not rest:
            return "0"
        if head == "const" and len(rest) == 1:
            return repr(float(rest[0]))
        if head == "sin" and len(rest) == 1:
            return f"sin({float(rest[0])!r}*pi*x)"
        if head == "heaviside" and len(rest) == 2:
            x0, h = float(rest[0]), float(rest[1])
            if not 0.0 < x0 < 1.0:
                raise ConfigError(f"heaviside location must lie in (0, 1): {text!r}")
            return f"{h!r}*H(x - {x0!r})"
        if head == "kink" and not rest:
            return "x + (1 - 2*x)*H(x - 0.5)"
    except ValueError:
        raise ConfigError(f"malformed preset {text!r}") from None
    if (head in PRESETS and ":" in text) or text in ("const", "sin", "heaviside"):
        raise ConfigError(f"malformed preset {text!r}")
    return None


def compile_spec(text: str) -> CompiledExpr | PiecewiseSmoothFn:
    """A preset or expression; ``bump`` is returned directly as a function of x."""
    text = str(text).strip()
    if text == "bump":
        return _bump_psf()
    if text == "zero":
        return PiecewiseSmoothFn.constant(0.0)
    expr = preset_expression(text)
    compiled = compile_expression(expr if expr is not None else text)
    return CompiledExpr(text, compiled.expr, compiled.breakpoints)


def compile_expression(text: str) -> CompiledExpr:
    expr = parse_expression(text)
    return CompiledExpr(text, expr, tuple(_heaviside_breaks(expr)))


def as_function_of_x(text: str) -> PiecewiseSmoothFn:
    obj = compile_spec(text)
    return obj if isinstance(obj, PiecewiseSmoothFn) else obj.to_psf()


def as_function_of_tx(text: str) -> Callable[[float, np.ndarray], np.ndarray]:
    obj = compile_spec(text)
    if isinstance(obj, PiecewiseSmoothFn):
        return lambda t, x: obj(x)
    return obj.to_tx()


def is_zero_spec(text: str) -> bool:
    obj = compile_spec(text)
    if isinstance(obj, PiecewiseSmoothFn):
        return obj.is_zero
    return bool(obj.expr == 0)


def sample_with_derivatives(text: str, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Samples of a function of x and its first two derivatives (right-continuous at breakpoints)."""
    obj = compile_spec(text)
    x = np.asarray(x, dtype=float)
    if isinstance(obj, PiecewiseSmoothFn):
        step = 1e-5
        d2 = (obj.derivative(x + step) - obj.derivative(x - step)) / (2 * step)
        return obj(x), obj.derivative(x), d2
    if obj.depends_on_t:
        raise ConfigError(f"expression {text!r} depends on t where a function of x is required")
    pieces = obj._pieces()
    second = PiecewiseSmoothFn(obj.breakpoints, [(_lambdify(sp.diff(e, X, 2), (X,)), None) for e in pieces])
    fn = obj.to_psf()
    return fn(x), fn.derivative(x), second(x)
