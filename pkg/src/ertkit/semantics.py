"""Evaluation of expressions, distributions, and run-time expressions.

State lookups go through an optional binding environment first, which is how
summation indices and the iteration parameter `n` are scoped; program
variables never shadow them because `n` is reserved and summation indices are
checked at parse time.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Mapping, Optional, Tuple, Union

from .kernel import (
    INF, ONE, ZERO, IndexOutOfBounds, KernelError, KindMismatch, State, Value,
    XReal, value_kind, x_add, x_max, x_min, x_mul,
)
from .syntax import (
    And, ArrayLit, BinOp, BoolLit, CellRef, Cmp, Dirac, DistExpr, Expr,
    FiniteSum, GeoSeries, Harmonic, Indicator, IntLit, Not, OmegaParam, Or,
    RAdd, RCell, RDiv, RInf, RLit, RMax, RMin, RMonus, RMul, RPow, RVar,
    RtExpr, RwCoef, Uniform, VarRef, WeightedList,
)


class EvalError(KernelError):
    pass


class UnboundVariable(EvalError):
    pass


class EmptyUniformRange(EvalError):
    pass


class DivByZero(EvalError):
    pass


class MonusOfInfinities(EvalError):
    pass


Bindings = Mapping[str, int]


# ---------------------------------------------------------------------------
# integer/boolean expressions


def eval_expr(e: Expr, sigma: State, bind: Optional[Bindings] = None) -> Value:
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, BoolLit):
        return e.value
    if isinstance(e, VarRef):
        if bind is not None and e.name in bind:
            return bind[e.name]
        try:
            return sigma.get(e.name)
        except KeyError:
            raise UnboundVariable("undefined variable %r" % e.name)
    if isinstance(e, CellRef):
        idx = _as_int(eval_expr(e.index, sigma, bind), "array index")
        try:
            return sigma.get_cell(e.name, idx)
        except KeyError:
            raise UnboundVariable("undefined array %r" % e.name)
    if isinstance(e, BinOp):
        a = _as_int(eval_expr(e.left, sigma, bind), "arithmetic operand")
        b = _as_int(eval_expr(e.right, sigma, bind), "arithmetic operand")
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        raise EvalError("unknown operator %r" % e.op)
    if isinstance(e, Cmp):
        a = eval_expr(e.left, sigma, bind)
        b = eval_expr(e.right, sigma, bind)
        if e.op in ("=", "!="):
            if value_kind(a) != value_kind(b):
                raise KindMismatch(
                    "cannot compare %s with %s" % (value_kind(a), value_kind(b))
                )
            return (a == b) if e.op == "=" else (a != b)
        a = _as_int(a, "comparison operand")
        b = _as_int(b, "comparison operand")
        if e.op == "<":
            return a < b
        if e.op == "<=":
            return a <= b
        if e.op == ">":
            return a > b
        if e.op == ">=":
            return a >= b
        raise EvalError("unknown comparison %r" % e.op)
    if isinstance(e, And):
        return _as_bool(eval_expr(e.left, sigma, bind)) and _as_bool(
            eval_expr(e.right, sigma, bind)
        )
    if isinstance(e, Or):
        return _as_bool(eval_expr(e.left, sigma, bind)) or _as_bool(
            eval_expr(e.right, sigma, bind)
        )
    if isinstance(e, Not):
        return not _as_bool(eval_expr(e.arg, sigma, bind))
    raise TypeError(e)


def _as_int(v: Value, what: str) -> int:
    if value_kind(v) != "int":
        raise KindMismatch("%s must be an integer, got %r" % (what, v))
    return v


def _as_bool(v: Value) -> bool:
    if value_kind(v) != "bool":
        raise KindMismatch("expected a boolean, got %r" % v)
    return v


# ---------------------------------------------------------------------------
# distributions

# a sampled value is a scalar or, for whole-array installation, a tuple
Sampled = Union[int, bool, Tuple[int, ...]]


def eval_dist(
    d: DistExpr, sigma: State, bind: Optional[Bindings] = None
) -> List[Tuple[Fraction, Sampled]]:
    """Finite support with merged duplicates; probabilities sum to one.

    Zero-weight entries are dropped before their value expression is
    evaluated, matching the convention that impossible branches contribute
    nothing.
    """
    if isinstance(d, Dirac):
        if isinstance(d.value, ArrayLit):
            vals = tuple(
                _as_int(eval_expr(item, sigma, bind), "array element")
                for item in d.value.items
            )
            return [(Fraction(1), vals)]
        return [(Fraction(1), eval_expr(d.value, sigma, bind))]
    if isinstance(d, Uniform):
        lo = _as_int(eval_expr(d.lo, sigma, bind), "uniform bound")
        hi = _as_int(eval_expr(d.hi, sigma, bind), "uniform bound")
        if lo > hi:
            raise EmptyUniformRange("unif[%d .. %d] is empty" % (lo, hi))
        p = Fraction(1, hi - lo + 1)
        return [(p, v) for v in range(lo, hi + 1)]
    if isinstance(d, WeightedList):
        acc: Dict[Sampled, Fraction] = {}
        for p, expr in d.entries:
            if p == 0:
                continue
            v = eval_expr(expr, sigma, bind)
            acc[v] = acc.get(v, Fraction(0)) + p
        return [(p, v) for v, p in acc.items()]
    raise TypeError(d)


def eval_guard(
    g: DistExpr, sigma: State, bind: Optional[Bindings] = None
) -> Fraction:
    """Probability that the guard evaluates to true."""
    p_true = Fraction(0)
    for p, v in eval_dist(g, sigma, bind):
        if value_kind(v) != "bool":
            raise KindMismatch("guard produced non-boolean value %r" % (v,))
        if v:
            p_true += p
    return p_true


# ---------------------------------------------------------------------------
# run-time expressions


def eval_rt(
    f: RtExpr, sigma: State, bind: Optional[Bindings] = None
) -> XReal:
    if isinstance(f, RLit):
        return XReal(f.value)
    if isinstance(f, RInf):
        return INF
    if isinstance(f, RVar):
        return _nonneg(eval_expr(VarRef(f.name), sigma, bind), f.name)
    if isinstance(f, RCell):
        return _nonneg(eval_expr(CellRef(f.name, f.index), sigma, bind), f.name)
    if isinstance(f, OmegaParam):
        if bind is None or "n" not in bind:
            raise UnboundVariable("iteration parameter n is unbound here")
        return XReal(bind["n"])
    if isinstance(f, Indicator):
        return ONE if _as_bool(eval_expr(f.cond, sigma, bind)) else ZERO
    if isinstance(f, RAdd):
        return x_add(eval_rt(f.left, sigma, bind), eval_rt(f.right, sigma, bind))
    if isinstance(f, RMonus):
        a = eval_rt(f.left, sigma, bind)
        b = eval_rt(f.right, sigma, bind)
        if a.is_infinite and b.is_infinite:
            raise MonusOfInfinities("inf - inf is undefined")
        if a.is_infinite:
            return INF
        if b.is_infinite:
            return ZERO
        return XReal(max(Fraction(0), a.q - b.q))
    if isinstance(f, RMul):
        # short-circuit zeros so guarded factors like [x > 0] * x stay total
        a = eval_rt(f.left, sigma, bind)
        if a == ZERO:
            return ZERO
        b = eval_rt(f.right, sigma, bind)
        return x_mul(a, b)
    if isinstance(f, RDiv):
        b = eval_rt(f.right, sigma, bind)
        if b == ZERO:
            raise DivByZero("division by zero")
        if b.is_infinite:
            raise EvalError("division by infinity")
        a = eval_rt(f.left, sigma, bind)
        return INF if a.is_infinite else XReal(a.q / b.q)
    if isinstance(f, RPow):
        k = _nat(eval_rt(f.exponent, sigma, bind), "exponent")
        base = eval_rt(f.base, sigma, bind)
        if base.is_infinite:
            return ONE if k == 0 else INF
        return XReal(base.q ** k)
    if isinstance(f, RMin):
        return x_min(eval_rt(f.left, sigma, bind), eval_rt(f.right, sigma, bind))
    if isinstance(f, RMax):
        return x_max(eval_rt(f.left, sigma, bind), eval_rt(f.right, sigma, bind))
    if isinstance(f, FiniteSum):
        lo = _int_arg(eval_rt(f.lo, sigma, bind), "summation bound")
        hi = _int_arg(eval_rt(f.hi, sigma, bind), "summation bound")
        total = ZERO
        inner: Dict[str, int] = dict(bind) if bind else {}
        for k in range(lo, hi + 1):
            inner[f.var] = k
            total = x_add(total, eval_rt(f.body, sigma, inner))
        return total
    if isinstance(f, GeoSeries):
        r = eval_rt(f.ratio, sigma, bind)
        if r.is_infinite or r.q >= 1:
            return INF
        return XReal(1 / (1 - r.q))
    if isinstance(f, Harmonic):
        m = _nat(eval_rt(f.arg, sigma, bind), "harmonic argument")
        return XReal(harmonic_number(m))
    if isinstance(f, RwCoef):
        nn = _nat(eval_rt(f.n, sigma, bind), "coefficient row")
        kk = _nat(eval_rt(f.k, sigma, bind), "coefficient column")
        return XReal(rw_coefficient(nn, kk))
    raise TypeError(f)


def _nonneg(v: Value, name: str) -> XReal:
    if value_kind(v) != "int":
        raise KindMismatch(
            "%r is boolean; wrap it in an indicator to use it as a run-time" % name
        )
    if v < 0:
        raise EvalError(
            "%r is %d; run-times are non-negative (guard it with an indicator)"
            % (name, v)
        )
    return XReal(v)


def _nat(x: XReal, what: str) -> int:
    if x.is_infinite:
        raise EvalError("%s must be finite" % what)
    if x.q.denominator != 1 or x.q < 0:
        raise EvalError("%s must be a natural number, got %s" % (what, x.q))
    return int(x.q)


def _int_arg(x: XReal, what: str) -> int:
    if x.is_infinite or x.q.denominator != 1:
        raise EvalError("%s must be an integer, got %s" % (what, x))
    return int(x.q)


@lru_cache(maxsize=None)
def harmonic_number(m: int) -> Fraction:
    if m <= 0:
        return Fraction(0)
    return harmonic_number(m - 1) + Fraction(1, m)


@lru_cache(maxsize=None)
def rw_coefficient(n: int, k: int) -> Fraction:
    """Closed form for the symmetric-walk expansion coefficients.

    Row n, column k of the family defined by a(0,0) = 1,
    a(n+1,0) = 2 + (a(n,0) + a(n,1))/2, a(n+1,k) = (a(n,k-1) + a(n,k+1))/2
    for 1 <= k <= n+1, and a(n,k) = 0 for k > n.
    """
    if k > n or n < 0 or k < 0:
        return Fraction(0)

    def c(a: int, b: int) -> int:
        if b < 0 or b > a:
            return 0
        return math.comb(a, b)

    total = -c(n, (n - k) // 2)
    for i in range(n - k + 1):
        total += 2 * (2 ** i) * c(n - i, (n - i - k) // 2)
    return Fraction(total, 2 ** n)
