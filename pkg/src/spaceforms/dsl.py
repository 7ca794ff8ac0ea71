"""Expression language for Kahler potentials plus the built-in metric catalog.

Grammar (hand-written recursive descent, single token lookahead):

    expr   := term  (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' atom)*          # left associative
    atom   := NUMBER | z<k> | FUNC '(' expr ')' | '(' expr ')'

Tokens: NUMBER (unsigned decimal, optional exponent), variables ``z1..zn``,
function names ``log exp abs2 re im conj``, operators ``+ - * / ^`` and
parentheses.  Precedence is ``^`` over unary minus over ``* /`` over ``+ -``.

Expressions are typed: ``abs2``, ``re``, ``im`` produce reals, variables are
complex, ``log``/``exp`` and non-integer powers require real arguments (this
keeps branch cuts out of potentials; cone potentials only need real powers
of |z_j|^2).  A top-level potential must type-check to real.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dual
from .engine import (
    DivisorPuncture,
    Domain,
    MetricField,
)
from .errors import EvaluationError, ExprTypeError, ParseError

FUNCTIONS = ("log", "exp", "abs2", "re", "im", "conj")
_REAL_FUNCS = {"abs2", "re", "im"}


# -- syntax tree ---------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float
    pos: tuple = (0, 0)


@dataclass(frozen=True)
class Var:
    index: int  # 1-based, as written
    pos: tuple = (0, 0)


@dataclass(frozen=True)
class Neg:
    arg: object
    pos: tuple = (0, 0)


@dataclass(frozen=True)
class Bin:
    op: str
    left: object
    right: object
    pos: tuple = (0, 0)


@dataclass(frozen=True)
class Call:
    fn: str
    arg: object
    pos: tuple = (0, 0)


def same_tree(a, b) -> bool:
    """Structural equality ignoring source positions."""
    if type(a) is not type(b):
        return False
    if isinstance(a, Num):
        return a.value == b.value
    if isinstance(a, Var):
        return a.index == b.index
    if isinstance(a, Neg):
        return same_tree(a.arg, b.arg)
    if isinstance(a, Bin):
        return a.op == b.op and same_tree(a.left, b.left) and same_tree(a.right, b.right)
    if isinstance(a, Call):
        return a.fn == b.fn and same_tree(a.arg, b.arg)
    return False


# -- tokenizer -----------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    kind: str  # NUMBER IDENT OP LPAREN RPAREN EOF
    text: str
    line: int
    column: int


def tokenize(text: str):
    tokens = []
    line, col = 1, 1
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            col += 1
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < len(text) and text[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < len(text) and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                seen_dot = seen_dot or text[j] == "."
                j += 1
            if j < len(text) and text[j] in "eE":
                k = j + 1
                if k < len(text) and text[k] in "+-":
                    k += 1
                if k < len(text) and text[k].isdigit():
                    j = k
                    while j < len(text) and text[j].isdigit():
                        j += 1
            tokens.append(Token("NUMBER", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(Token("IDENT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch in "+-*/^":
            tokens.append(Token("OP", ch, line, col))
        elif ch == "(":
            tokens.append(Token("LPAREN", ch, line, col))
        elif ch == ")":
            tokens.append(Token("RPAREN", ch, line, col))
        else:
            raise ParseError(f"unexpected character {ch!r}", line, col,
                             expected=("NUMBER", "IDENT", "operator"))
        col += 1
        i += 1
    tokens.append(Token("EOF", "", line, col))
    return tokens


# -- parser --------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.k = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.k]

    def advance(self) -> Token:
        t = self.tok
        self.k += 1
        return t

    def fail(self, expected):
        t = self.tok
        what = "end of input" if t.kind == "EOF" else repr(t.text)
        raise ParseError(f"unexpected {what}", t.line, t.column, expected=expected)

    def expect(self, kind, text=None):
        t = self.tok
        if t.kind != kind or (text is not None and t.text != text):
            self.fail([text or kind])
        return self.advance()

    def parse_expr(self):
        node = self.parse_term()
        while self.tok.kind == "OP" and self.tok.text in "+-":
            op = self.advance()
            rhs = self.parse_term()
            node = Bin(op.text, node, rhs, (op.line, op.column))
        return node

    def parse_term(self):
        node = self.parse_unary()
        while self.tok.kind == "OP" and self.tok.text in "*/":
            op = self.advance()
            rhs = self.parse_unary()
            node = Bin(op.text, node, rhs, (op.line, op.column))
        return node

    def parse_unary(self):
        if self.tok.kind == "OP" and self.tok.text == "-":
            op = self.advance()
            return Neg(self.parse_unary(), (op.line, op.column))
        return self.parse_power()

    def parse_power(self):
        node = self.parse_atom()
        while self.tok.kind == "OP" and self.tok.text == "^":
            op = self.advance()
            rhs = self.parse_atom()
            node = Bin("^", node, rhs, (op.line, op.column))
        return node

    def parse_atom(self):
        t = self.tok
        if t.kind == "NUMBER":
            self.advance()
            return Num(float(t.text), (t.line, t.column))
        if t.kind == "IDENT":
            self.advance()
            if t.text in FUNCTIONS:
                self.expect("LPAREN")
                arg = self.parse_expr()
                self.expect("RPAREN")
                return Call(t.text, arg, (t.line, t.column))
            if t.text.startswith("z") and t.text[1:].isdigit():
                idx = int(t.text[1:])
                if idx < 1:
                    raise ParseError(f"variable index must be >= 1: {t.text}",
                                     t.line, t.column)
                return Var(idx, (t.line, t.column))
            raise ParseError(f"unknown identifier {t.text!r}", t.line, t.column,
                             expected=FUNCTIONS + ("z<k>",))
        if t.kind == "LPAREN":
            self.advance()
            node = self.parse_expr()
            self.expect("RPAREN")
            return node
        self.fail(["NUMBER", "z<k>", "function", "("])


def parse(text: str):
    """Parse an expression; raises :class:`ParseError` with line/column."""
    if not text or not text.strip():
        raise ParseError("empty expression", 1, 1, expected=["expression"])
    p = _Parser(tokenize(text))
    node = p.parse_expr()
    if p.tok.kind != "EOF":
        p.fail(["end of input", "operator"])
    return node


# -- printer -------------------------------------------------------------------

_LEVEL = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def to_string(expr) -> str:
    return _print(expr, 0)


def _print(node, need):
    if isinstance(node, Num):
        s = repr(node.value)
        if s.endswith(".0"):
            s = s[:-2]
        return s
    if isinstance(node, Var):
        return f"z{node.index}"
    if isinstance(node, Neg):
        body = f"-{_print(node.arg, _LEVEL['neg'])}"
        return f"({body})" if _LEVEL["neg"] < need else body
    if isinstance(node, Call):
        return f"{node.fn}({_print(node.arg, 0)})"
    lvl = _LEVEL[node.op]
    left = _print(node.left, lvl)
    right = _print(node.right, lvl + 1)
    body = f"{left} {node.op} {right}" if node.op in "+-*/" else f"{left}^{right}"
    return f"({body})" if lvl < need else body


# -- typing --------------------------------------------------------------------


def _const_value(node):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Neg):
        inner = _const_value(node.arg)
        return None if inner is None else -inner
    return None


def expr_type(node) -> str:
    """Returns 'real' or 'complex'; raises :class:`ExprTypeError`."""
    if isinstance(node, Num):
        return "real"
    if isinstance(node, Var):
        return "complex"
    if isinstance(node, Neg):
        return expr_type(node.arg)
    if isinstance(node, Call):
        t = expr_type(node.arg)
        if node.fn in _REAL_FUNCS:
            return "real"
        if node.fn == "conj":
            return t
        # log, exp: real-only, keeps branch cuts out of potentials
        if t != "real":
            raise ExprTypeError(
                f"{node.fn} requires a real argument", position=node.pos)
        return "real"
    if node.op in "+-*/":
        tl = expr_type(node.left)
        tr = expr_type(node.right)
        return "real" if tl == tr == "real" else "complex"
    # power
    p = _const_value(node.right)
    if p is None:
        raise ExprTypeError("exponents must be constant numbers",
                            position=node.pos)
    base = expr_type(node.left)
    if float(p).is_integer():
        return base
    if base != "real":
        raise ExprTypeError(
            "non-integer powers require a real base (use abs2)",
            position=node.pos)
    return "real"


def max_var_index(node) -> int:
    if isinstance(node, Num):
        return 0
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Neg):
        return max_var_index(node.arg)
    if isinstance(node, Call):
        return max_var_index(node.arg)
    return max(max_var_index(node.left), max_var_index(node.right))


# -- evaluation ----------------------------------------------------------------

_FN = {"log": dual.wlog, "exp": dual.wexp, "abs2": dual.wabs2,
       "re": dual.wre, "im": dual.wim, "conj": dual.wconj}


def _eval(node, zvals):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return zvals[node.index - 1]
    if isinstance(node, Neg):
        return -_eval(node.arg, zvals)
    if isinstance(node, Call):
        return _FN[node.fn](_eval(node.arg, zvals))
    a = _eval(node.left, zvals)
    if node.op == "^":
        p = _const_value(node.right)
        if isinstance(p, float) and p.is_integer():
            p = int(p)
        if isinstance(p, int):
            return a ** p
        if isinstance(a, dual.WirtingerDual):
            return a ** p
        av = complex(a)
        if abs(av.imag) > 1e-8 * (1 + abs(av.real)) or av.real <= 0:
            raise EvaluationError(f"non-integer power of non-positive value {av}")
        return av.real ** p
    b = _eval(node.right, zvals)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if isinstance(b, dual.WirtingerDual):
        if dual.wvalue(b) == 0:
            raise EvaluationError("division by zero")
    elif b == 0:
        raise EvaluationError("division by zero")
    return a / b


def eval_expr(expr, z, gradient: bool = False):
    """Evaluate at coordinates ``z``; real-typed results come back as floats.

    With ``gradient=True``, also returns the Wirtinger gradients
    (dF/dz_i and dF/dz_conj_i) computed in forward dual mode.
    """
    z = list(z)
    need = max_var_index(expr)
    if need > len(z):
        raise EvaluationError(
            f"expression uses z{need} but only {len(z)} coordinates given")
    is_real = expr_type(expr) == "real"

    def finish(v):
        v = complex(v)
        return v.real if is_real else v

    try:
        if not gradient:
            return finish(_eval(expr, [complex(w) for w in z]))
        n = len(z)
        gz = np.empty(n, dtype=complex)
        gzb = np.empty(n, dtype=complex)
        value = None
        for i in range(n):
            out = _eval(expr, dual.lift_variables(z, [("z", i)]))
            if isinstance(out, dual.WirtingerDual):
                value, gz[i], gzb[i] = out.val, out.d, out.dc
            else:  # expression did not touch the variables
                value, gz[i], gzb[i] = out, 0.0, 0.0
        return finish(value), gz, gzb
    except EvaluationError as exc:
        if exc.point is None:
            raise EvaluationError(f"{exc} at z = {z}", point=np.asarray(z)) from None
        raise


def make_potential(expr, n: int):
    """Wrap a real-typed expression as a potential callable for MetricField."""
    if isinstance(expr, str):
        expr = parse(expr)
    if expr_type(expr) != "real":
        raise ExprTypeError("a potential must evaluate to a real scalar")
    used = max_var_index(expr)
    if used > n:
        raise ExprTypeError(f"potential uses z{used} but n = {n}")
    return lambda zs: _eval(expr, zs)


# -- catalog -------------------------------------------------------------------


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    kind: str  # "metric" or "map"
    doc: str
    builder: object


def _flat_field(n=2, radius=1.0):
    eye = np.eye(n, dtype=complex)
    zero3 = np.zeros((n, n, n), dtype=complex)
    zero4 = np.zeros((n, n, n, n), dtype=complex)
    return MetricField(
        dim=n,
        domain=Domain(radius=radius),
        potential=lambda zs: sum(dual.wabs2(w) for w in zs),
        metric_fn=lambda z: eye.copy(),
        dmetric_fn=lambda z: zero3,
        d2metric_fn=lambda z: zero4,
        label="flat",
    )


def _bergman_field(n=2, c=-4.0, radius=1.0):
    if c >= 0:
        raise ValueError("the ball metric needs c < 0")
    s = 4.0 / abs(c)

    def pot(zs):
        return -s * dual.wlog(1 - sum(dual.wabs2(w) for w in zs))

    def H(z):
        rho = 1.0 - float(np.vdot(z, z).real)
        return s * (np.eye(n) / rho + np.outer(z, np.conj(z)) / rho**2)

    def dH(z):
        rho = 1.0 - float(np.vdot(z, z).real)
        zc = np.conj(z)
        out = np.empty((n, n, n), dtype=complex)
        for i in range(n):
            out[i] = (np.eye(n) * zc[i] / rho**2
                      + np.outer(np.eye(n)[i], zc) / rho**2
                      + 2.0 * np.outer(z, zc) * zc[i] / rho**3)
        return s * out

    return MetricField(dim=n, domain=Domain(radius=radius), potential=pot,
                       metric_fn=H, dmetric_fn=dH, label="bergman")


def _fubini_study_field(n=2, c=4.0, radius=1.0):
    if c <= 0:
        raise ValueError("the projective metric needs c > 0")
    s = 4.0 / c

    def pot(zs):
        return s * dual.wlog(1 + sum(dual.wabs2(w) for w in zs))

    def H(z):
        sig = 1.0 + float(np.vdot(z, z).real)
        return s * (np.eye(n) / sig - np.outer(z, np.conj(z)) / sig**2)

    def dH(z):
        sig = 1.0 + float(np.vdot(z, z).real)
        zc = np.conj(z)
        out = np.empty((n, n, n), dtype=complex)
        for i in range(n):
            out[i] = (-np.eye(n) * zc[i] / sig**2
                      - np.outer(np.eye(n)[i], zc) / sig**2
                      + 2.0 * np.outer(z, zc) * zc[i] / sig**3)
        return s * out

    return MetricField(dim=n, domain=Domain(radius=radius), potential=pot,
                       metric_fn=H, dmetric_fn=dH, label="fubini-study")


def _check_beta(beta):
    beta = tuple(float(b) for b in beta)
    if any(b <= 0 for b in beta):
        raise ValueError(f"cone exponents must be positive, got {beta}")
    return beta


def _cone_punctures(beta):
    return tuple(DivisorPuncture(axis=j) for j, b in enumerate(beta) if b != 1.0)


def _cone_flat_field(beta=(0.5, 0.5), radius=1.0):
    beta = _check_beta(beta)
    n = len(beta)

    def pot(zs):
        return sum(dual.wabs2(w) ** b if b != 1.0 else dual.wabs2(w)
                   for w, b in zip(zs, beta))

    def H(z):
        m = [b * b * abs(z[j]) ** (2 * (b - 1)) if b != 1.0 else 1.0
             for j, b in enumerate(beta)]
        return np.diag(m).astype(complex)

    def dH(z):
        out = np.zeros((n, n, n), dtype=complex)
        for j, b in enumerate(beta):
            if b != 1.0:
                out[j, j, j] = b * b * (b - 1) * np.conj(z[j]) * abs(z[j]) ** (2 * (b - 2))
        return out

    return MetricField(dim=n, domain=Domain(radius=radius, punctures=_cone_punctures(beta)),
                       potential=pot, metric_fn=H, dmetric_fn=dH,
                       label=f"cone-flat{beta}")


def _cone_log_field(beta=(0.5, 1.0), c=-4.0, radius=1.0):
    beta = _check_beta(beta)
    if c >= 0:
        raise ValueError("cone-log needs c < 0")
    n = len(beta)
    s = 4.0 / abs(c)

    def pot(zs):
        acc = 0.0
        for w, b in zip(zs, beta):
            acc = acc + (dual.wabs2(w) ** b if b != 1.0 else dual.wabs2(w))
        return -s * dual.wlog(1 - acc)

    return MetricField(dim=n, domain=Domain(radius=radius, punctures=_cone_punctures(beta)),
                       potential=pot, label=f"cone-log{beta}")


def _identity_map(n=2):
    return lambda z: np.asarray(z, dtype=complex)


def _conjugate_probe_map(n=2):
    def f(z):
        out = np.asarray(z, dtype=complex).copy()
        out[0] = np.conj(out[0])
        return out
    return f


_CATALOG = {
    "flat": CatalogEntry("flat", "metric",
                         "complex Euclidean metric (HSC 0)", _flat_field),
    "bergman": CatalogEntry("bergman", "metric",
                            "unit-ball metric of constant negative HSC", _bergman_field),
    "fubini-study": CatalogEntry("fubini-study", "metric",
                                 "projective-space chart metric of constant positive HSC",
                                 _fubini_study_field),
    "cone-flat": CatalogEntry("cone-flat", "metric",
                              "flat metric with cone singularities along coordinate divisors",
                              _cone_flat_field),
    "cone-log": CatalogEntry("cone-log", "metric",
                             "negatively curved metric with cone singularities",
                             _cone_log_field),
    "identity": CatalogEntry("identity", "map", "identity test map", _identity_map),
    "conjugate-probe": CatalogEntry("conjugate-probe", "map",
                                    "antiholomorphic test map (conjugates z1)",
                                    _conjugate_probe_map),
}


def catalog_names():
    return sorted(_CATALOG)


def catalog(name: str, **params):
    """Construct a named metric field or test map."""
    if name not in _CATALOG:
        raise KeyError(f"unknown catalog entry {name!r}; "
                       f"available: {', '.join(catalog_names())}")
    return _CATALOG[name].builder(**params)
