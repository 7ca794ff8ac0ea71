"""Forward-mode automatic differentiation with Wirtinger dual numbers.

A Kahler potential is a real-valued, non-holomorphic function of the
underlying 2n real coordinates.  Curvature formulas want its mixed complex
derivatives d/dz_i and d/dz_conj_j, which are fixed linear combinations of
the real partials.  Instead of differentiating along real axes and
recombining, each dual number here carries two tangents for one seeded
first-order operator L = sum(p_i d/dz_i + q_i d/dz_conj_i):

    ``d``  = L(w)
    ``dc`` = Lbar(w)   (the conjugate operator)

Tracking the pair makes conjugation exact: L(conj w) = conj(Lbar w).
Nesting duals to depth k yields k-th order mixed Wirtinger derivatives in a
single evaluation pass.  Arithmetic works over plain Python complex scalars;
potentials are evaluated with the ``w*`` function family below so the same
code path runs on numbers and on duals.
"""

from __future__ import annotations

import cmath
import math

from .errors import EvaluationError

#: relative imaginary contamination allowed in arguments of log and real powers
_REAL_SLACK = 1e-8


class WirtingerDual:
    __slots__ = ("val", "d", "dc")

    def __init__(self, val, d, dc):
        self.val = val
        self.d = d
        self.dc = dc

    def __repr__(self):
        return f"WirtingerDual({self.val!r}, {self.d!r}, {self.dc!r})"

    # -- ring operations ---------------------------------------------------

    def __add__(self, other):
        if isinstance(other, WirtingerDual):
            return WirtingerDual(self.val + other.val, self.d + other.d,
                                 self.dc + other.dc)
        return WirtingerDual(self.val + other, self.d, self.dc)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, WirtingerDual):
            return WirtingerDual(self.val - other.val, self.d - other.d,
                                 self.dc - other.dc)
        return WirtingerDual(self.val - other, self.d, self.dc)

    def __rsub__(self, other):
        return WirtingerDual(other - self.val, -self.d, -self.dc)

    def __neg__(self):
        return WirtingerDual(-self.val, -self.d, -self.dc)

    def __mul__(self, other):
        if isinstance(other, WirtingerDual):
            return WirtingerDual(
                self.val * other.val,
                self.d * other.val + self.val * other.d,
                self.dc * other.val + self.val * other.dc,
            )
        return WirtingerDual(self.val * other, self.d * other, self.dc * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, WirtingerDual):
            return self * _winv(other)
        inv = 1.0 / other
        return WirtingerDual(self.val * inv, self.d * inv, self.dc * inv)

    def __rtruediv__(self, other):
        return _winv(self) * other

    def __pow__(self, p):
        if isinstance(p, WirtingerDual):
            raise EvaluationError("exponents must be constants")
        if isinstance(p, float) and p.is_integer():
            p = int(p)
        if isinstance(p, int):
            if p == 0:
                return WirtingerDual(_one_like(self.val), 0.0, 0.0)
            if p == 1:
                return self
            base = self.val ** (p - 1)
            scale = p * base
            return WirtingerDual(base * self.val, scale * self.d, scale * self.dc)
        # non-integer power: restricted to positive real arguments
        bottom = wvalue(self)
        _require_positive_real(bottom, "non-integer power")
        base = self.val ** (p - 1.0)
        scale = p * base
        return WirtingerDual(base * self.val, scale * self.d, scale * self.dc)


def _one_like(v):
    return 1.0


def _winv(x):
    if isinstance(x, WirtingerDual):
        iv = _winv(x.val)
        iv2 = iv * iv
        return WirtingerDual(iv, -x.d * iv2, -x.dc * iv2)
    return 1.0 / x


def wvalue(x):
    """Descend to the bottom scalar value of a (possibly nested) dual."""
    while isinstance(x, WirtingerDual):
        x = x.val
    return x


def _require_positive_real(v, what):
    v = complex(v)
    if abs(v.imag) > _REAL_SLACK * (1.0 + abs(v.real)):
        raise EvaluationError(f"{what} of a complex value {v}")
    if v.real <= 0.0:
        raise EvaluationError(f"{what} of nonpositive real {v.real}")


def wconj(x):
    """Conjugation; swaps the two Wirtinger tangents."""
    if isinstance(x, WirtingerDual):
        return WirtingerDual(wconj(x.val), wconj(x.dc), wconj(x.d))
    return x.conjugate() if isinstance(x, complex) else x


def wlog(x):
    if isinstance(x, WirtingerDual):
        _require_positive_real(wvalue(x), "log")
        lv = wlog(x.val)
        return WirtingerDual(lv, x.d / x.val, x.dc / x.val)
    _require_positive_real(x, "log")
    return math.log(complex(x).real)


def wexp(x):
    if isinstance(x, WirtingerDual):
        e = wexp(x.val)
        return WirtingerDual(e, x.d * e, x.dc * e)
    return cmath.exp(x) if isinstance(x, complex) else math.exp(x)


def wabs2(x):
    """|x|^2 as x * conj(x); real-valued up to roundoff."""
    return x * wconj(x)


def wre(x):
    return (x + wconj(x)) * 0.5


def wim(x):
    return (x - wconj(x)) * (-0.5j)


def wsqrt(x):
    return x ** 0.5


# -- derivative extraction -------------------------------------------------


def lift_variables(z, ops):
    """Lift coordinates ``z`` to nested duals seeded for ``ops``.

    ``ops`` is a sequence of ``('z', i)`` or ``('zb', i)`` entries, one per
    nesting level, naming the Wirtinger operator differentiated at that
    level.  Because mixed partials commute the order is immaterial.
    """
    vars_ = [complex(w) for w in z]
    for kind, idx in ops:
        lifted = []
        for m, w in enumerate(vars_):
            if kind == "z":
                t = 1.0 if m == idx else 0.0
                s = 0.0
            else:
                t = 0.0
                s = 1.0 if m == idx else 0.0
            lifted.append(WirtingerDual(w, t, s))
        vars_ = lifted
    return vars_


def _peel(x):
    return x.d if isinstance(x, WirtingerDual) else 0.0


def wirtinger_derivative(f, z, holo=(), anti=()):
    """Mixed Wirtinger derivative of ``f`` at ``z``.

    ``holo`` lists indices differentiated by d/dz, ``anti`` by d/dz_conj.
    ``f`` receives the list of lifted coordinates and must be written with
    the ``w*`` arithmetic helpers.
    """
    ops = [("z", i) for i in holo] + [("zb", j) for j in anti]
    out = f(lift_variables(z, ops))
    for _ in ops:
        out = _peel(out)
    return complex(out)
