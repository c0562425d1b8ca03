"""Extended non-negative rationals, program values, and program states.

These are the semantic ground types: run-times live in the non-negative
rationals extended with infinity (XReal), programs manipulate integer and
boolean values (Value), and a State maps scalar variables and fixed-length
arrays to values.  Everything here is immutable and total.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Optional, Tuple, Union

RationalLike = Union[int, Fraction]


class KernelError(Exception):
    pass


class KindMismatch(KernelError):
    pass


class IndexOutOfBounds(KernelError):
    pass


class XReal:
    """A non-negative exact rational or infinity.

    The order is total: finite values compare by magnitude and infinity
    dominates everything.  Multiplication uses the convention 0 * inf = 0,
    which makes indicator-weighted sums with infinite branches well defined.
    """

    __slots__ = ("q",)

    def __init__(self, q: Optional[RationalLike]):
        # q is None for infinity
        if q is not None:
            q = Fraction(q)
            if q < 0:
                raise ValueError("XReal must be non-negative, got %s" % q)
        object.__setattr__(self, "q", q)

    @property
    def is_infinite(self) -> bool:
        return self.q is None

    @property
    def is_finite(self) -> bool:
        return self.q is not None

    def __add__(self, other: "XReal") -> "XReal":
        other = _coerce(other)
        if self.q is None or other.q is None:
            return INF
        return XReal(self.q + other.q)

    __radd__ = __add__

    def __mul__(self, other: "XReal") -> "XReal":
        other = _coerce(other)
        if self.q is None:
            return ZERO if other.q == 0 else INF
        if other.q is None:
            return ZERO if self.q == 0 else INF
        return XReal(self.q * other.q)

    __rmul__ = __mul__

    def __le__(self, other: "XReal") -> bool:
        other = _coerce(other)
        if other.q is None:
            return True
        if self.q is None:
            return False
        return self.q <= other.q

    def __lt__(self, other: "XReal") -> bool:
        other = _coerce(other)
        return self <= other and self != other

    def __ge__(self, other: "XReal") -> bool:
        return _coerce(other) <= self

    def __gt__(self, other: "XReal") -> bool:
        return _coerce(other) < self

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            other = XReal(other)
        if not isinstance(other, XReal):
            return NotImplemented
        return self.q == other.q

    def __hash__(self) -> int:
        return hash(("XReal", self.q))

    def __float__(self) -> float:
        return float("inf") if self.q is None else float(self.q)

    def __repr__(self) -> str:
        return "XReal(inf)" if self.q is None else "XReal(%s)" % self.q

    def __str__(self) -> str:
        return "inf" if self.q is None else str(self.q)


def _coerce(x: Union[XReal, RationalLike]) -> XReal:
    if isinstance(x, XReal):
        return x
    return XReal(x)


ZERO = XReal(0)
ONE = XReal(1)
INF = XReal(None)


def x_add(a: XReal, b: XReal) -> XReal:
    return _coerce(a) + _coerce(b)


def x_mul(a: XReal, b: XReal) -> XReal:
    return _coerce(a) * _coerce(b)


def x_leq(a: XReal, b: XReal) -> bool:
    return _coerce(a) <= _coerce(b)


def x_min(a: XReal, b: XReal) -> XReal:
    a, b = _coerce(a), _coerce(b)
    return a if a <= b else b


def x_max(a: XReal, b: XReal) -> XReal:
    a, b = _coerce(a), _coerce(b)
    return b if a <= b else a


# Values are plain Python: bool for truth values, int for integers.  bool is a
# subclass of int, so kind checks test bool first throughout.
Value = Union[int, bool]


def value_kind(v: Value) -> str:
    return "bool" if isinstance(v, bool) else "int"


class State:
    """Immutable valuation of scalar variables and fixed-length arrays.

    Arrays keep their length forever; updates return fresh states.
    """

    __slots__ = ("scalars", "arrays", "_hash")

    def __init__(
        self,
        scalars: Mapping[str, Value] = (),
        arrays: Mapping[str, Iterable[Value]] = (),
    ):
        sc = dict(scalars)
        ar = {name: tuple(vals) for name, vals in dict(arrays).items()}
        object.__setattr__(self, "scalars", sc)
        object.__setattr__(self, "arrays", ar)
        object.__setattr__(self, "_hash", None)

    def key(self) -> Tuple:
        return (
            tuple(sorted(self.scalars.items())),
            tuple(sorted(self.arrays.items())),
        )

    def __hash__(self) -> int:
        h = self._hash
        if h is None:
            h = hash(self.key())
            object.__setattr__(self, "_hash", h)
        return h

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, State):
            return NotImplemented
        return self.scalars == other.scalars and self.arrays == other.arrays

    def get(self, name: str) -> Value:
        try:
            return self.scalars[name]
        except KeyError:
            raise KeyError(name)

    def get_cell(self, name: str, index: int) -> Value:
        arr = self.arrays.get(name)
        if arr is None:
            raise KeyError(name)
        if not 1 <= index <= len(arr):
            raise IndexOutOfBounds(
                "%s[%d] out of bounds (length %d, indices are 1-based)"
                % (name, index, len(arr))
            )
        return arr[index - 1]

    def set(self, name: str, v: Value) -> "State":
        old = self.scalars.get(name)
        if old is not None and value_kind(old) != value_kind(v):
            raise KindMismatch(
                "cannot assign %s value to %s variable %r"
                % (value_kind(v), value_kind(old), name)
            )
        sc = dict(self.scalars)
        sc[name] = v
        return State(sc, self.arrays)

    def set_cell(self, name: str, index: int, v: Value) -> "State":
        arr = self.arrays.get(name)
        if arr is None:
            raise KeyError(name)
        if not 1 <= index <= len(arr):
            raise IndexOutOfBounds(
                "%s[%d] out of bounds (length %d, indices are 1-based)"
                % (name, index, len(arr))
            )
        if value_kind(arr[index - 1]) != value_kind(v):
            raise KindMismatch("cannot assign %s value to cell %s[%d]" % (value_kind(v), name, index))
        ar = dict(self.arrays)
        ar[name] = arr[: index - 1] + (v,) + arr[index:]
        return State(self.scalars, ar)

    def set_array(self, name: str, values: Iterable[Value]) -> "State":
        values = tuple(values)
        old = self.arrays.get(name)
        if old is not None and len(old) != len(values):
            raise KindMismatch(
                "array %r has fixed length %d, cannot assign %d values"
                % (name, len(old), len(values))
            )
        ar = dict(self.arrays)
        ar[name] = values
        return State(self.scalars, ar)

    def __repr__(self) -> str:
        parts = ["%s=%s" % (k, v) for k, v in sorted(self.scalars.items())]
        parts += [
            "%s=[%s]" % (k, ",".join(str(x) for x in vs))
            for k, vs in sorted(self.arrays.items())
        ]
        return "{%s}" % ", ".join(parts)


def state_update(sigma: State, target, v: Value) -> State:
    """Update a scalar (target: str) or array cell (target: (name, index))."""
    if isinstance(target, str):
        return sigma.set(target, v)
    name, index = target
    return sigma.set_cell(name, index, v)
