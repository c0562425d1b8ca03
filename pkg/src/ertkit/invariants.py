"""Loop bound certification: upper invariants, omega-invariants with limits,
and iterative refinement, checked pointwise over finite state domains.

A verdict here is a statement about the declared domain only.  The proof
rules quantify over all states, so Holds on a finite domain is evidence, not
a proof, unless the domain covers every state the loop can reach; the
checkers are exact on the points they do check.

Soundness under cutoffs: the transformer reports lower bounds when a nested
loop is cut off.  A computed value that already violates an upper condition,
or already satisfies a lower condition, is conclusive regardless; the
remaining cases are reported as Inconclusive rather than guessed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .kernel import INF, KernelError, State, XReal, x_leq
from .semantics import EvalError, eval_rt, rw_coefficient
from .syntax import Annotated, RT_ZERO, RtExpr, While
from .transformer import ErtConfig, FnCont, RtCont, char_functional


class PreconditionFailed(KernelError):
    def __init__(self, state: State, round_index: int, message: str):
        super().__init__(message)
        self.state = state
        self.round_index = round_index


# ---------------------------------------------------------------------------
# domains and specs


@dataclass(frozen=True)
class StateDomain:
    states: Tuple[State, ...]

    def __post_init__(self):
        if not self.states:
            raise ValueError("a state domain must be nonempty")

    def __iter__(self):
        return iter(self.states)

    def __len__(self):
        return len(self.states)

    @staticmethod
    def explicit(states: Iterable[State]) -> "StateDomain":
        return StateDomain(tuple(states))

    @staticmethod
    def product(ranges: Mapping[str, Sequence[int]]) -> "StateDomain":
        """All combinations of the given scalar ranges, last name fastest."""
        names = list(ranges)
        out: List[State] = []

        def rec(i: int, acc: Dict[str, int]):
            if i == len(names):
                out.append(State(dict(acc)))
                return
            for v in ranges[names[i]]:
                acc[names[i]] = v
                rec(i + 1, acc)

        rec(0, {})
        return StateDomain(tuple(out))


@dataclass(frozen=True)
class UpperInvariantSpec:
    invariant: RtExpr  # must not mention the iteration parameter


@dataclass(frozen=True)
class OmegaInvariantSpec:
    invariant_n: RtExpr  # may mention the iteration parameter n
    direction: str  # "lower" | "upper"
    limit: Optional[RtExpr] = None  # n-free, may be infinite-valued

    def __post_init__(self):
        if self.direction not in ("lower", "upper"):
            raise ValueError("direction must be 'lower' or 'upper'")


@dataclass(frozen=True)
class Verdict:
    status: str  # "Holds" | "Fails" | "Inconclusive"
    witness: Optional[State] = None
    n: Optional[int] = None
    lhs: Optional[XReal] = None
    rhs: Optional[XReal] = None
    reason: Optional[str] = None

    @property
    def holds(self) -> bool:
        return self.status == "Holds"


def _attach_state(err: Exception, sigma: State):
    raise type(err)("%s (at state %s)" % (err, sigma)) from err


def _rt_at(expr: RtExpr, sigma: State, n: Optional[int] = None) -> XReal:
    try:
        return eval_rt(expr, sigma, {"n": n} if n is not None else None)
    except EvalError as e:
        _attach_state(e, sigma)


# ---------------------------------------------------------------------------
# point comparison under possibly cut-off evaluation
#
# computed is exact when untainted, otherwise a lower bound of the true value


def _point(direction: str, computed: XReal, tainted: bool, bound: XReal) -> str:
    if direction == "upper":
        if not x_leq(computed, bound):
            return "Fails"  # true value >= computed > bound
        return "ok" if not tainted else "Inconclusive"
    if x_leq(bound, computed):
        return "ok"  # true value >= computed >= bound
    return "Inconclusive" if tainted else "Fails"


# ---------------------------------------------------------------------------
# checks


def check_upper_invariant(
    W: Union[While, Annotated],
    f: RtExpr,
    spec: UpperInvariantSpec,
    D: StateDomain,
    cfg: Optional[ErtConfig] = None,
) -> Verdict:
    """Park's rule: F_f(I) pointwise at most I certifies ert at most I."""
    apply_F = char_functional(W, f, cfg)
    I = RtCont(spec.invariant)
    inconclusive: Optional[str] = None
    for sigma in D:
        try:
            lhs, tainted = apply_F(I, sigma)
        except EvalError as e:
            _attach_state(e, sigma)
        rhs = _rt_at(spec.invariant, sigma)
        res = _point("upper", lhs, tainted, rhs)
        if res == "Fails":
            return Verdict("Fails", witness=sigma, lhs=lhs, rhs=rhs)
        if res == "Inconclusive" and inconclusive is None:
            inconclusive = (
                "a loop inside the body was cut off at %s; "
                "annotate it or raise the unroll depth" % sigma
            )
    if inconclusive:
        return Verdict("Inconclusive", reason=inconclusive)
    return Verdict("Holds")


def check_omega_invariant(
    W: Union[While, Annotated],
    f: RtExpr,
    spec: OmegaInvariantSpec,
    n_max: int = 50,
    D: Optional[StateDomain] = None,
    cfg: Optional[ErtConfig] = None,
) -> Verdict:
    """Base and step conditions of the omega-invariant rule.

    Lower direction: F_f(0) at least I_0 and F_f(I_n) at least I_{n+1};
    the upper direction is the same with the orders flipped.
    """
    if D is None:
        raise ValueError("a state domain is required")
    apply_F = char_functional(W, f, cfg)
    direction = spec.direction
    inconclusive: Optional[str] = None

    def run_point(n_label, X, rhs_n, sigma):
        nonlocal inconclusive
        try:
            lhs, tainted = apply_F(X, sigma)
        except EvalError as e:
            _attach_state(e, sigma)
        rhs = _rt_at(spec.invariant_n, sigma, rhs_n)
        res = _point(direction, lhs, tainted, rhs)
        if res == "Fails":
            return Verdict("Fails", witness=sigma, n=n_label, lhs=lhs, rhs=rhs)
        if res == "Inconclusive" and inconclusive is None:
            inconclusive = "body loop cut off at %s (n=%s)" % (sigma, n_label)
        return None

    zero = RtCont(RT_ZERO)
    for sigma in D:
        out = run_point(0, zero, 0, sigma)
        if out:
            return out
    for n in range(n_max):
        X = RtCont(spec.invariant_n, {"n": n})
        for sigma in D:
            out = run_point(n, X, n + 1, sigma)
            if out:
                return out
    if inconclusive:
        return Verdict("Inconclusive", reason=inconclusive)
    return Verdict("Holds")


def check_limit(
    spec: OmegaInvariantSpec,
    D: StateDomain,
    n_probe: int = 60,
    tol: Fraction = Fraction(1, 10 ** 12),
    big: Fraction = Fraction(10 ** 6),
) -> Verdict:
    """Numeric evidence that I_n tends to the declared limit on the domain.

    Never returns Holds: agreement at finitely many probe indices cannot
    establish a limit.  A finite declared limit must be approached within
    tol at the last probe with nonincreasing deviations; an infinite one
    must be exceeded in the sense of I at the last probe reaching `big`.
    """
    if spec.limit is None:
        return Verdict("Inconclusive", reason="no limit declared")
    probes = sorted({max(1, n_probe // 4), max(1, n_probe // 2), n_probe})
    for sigma in D:
        limit = _rt_at(spec.limit, sigma)
        vals = [_rt_at(spec.invariant_n, sigma, n) for n in probes]
        if limit.is_infinite:
            if vals[-1].is_finite and vals[-1].q < big:
                return Verdict(
                    "Fails", witness=sigma, n=n_probe,
                    lhs=vals[-1], rhs=XReal(big),
                )
            continue
        devs = []
        for v in vals:
            if v.is_infinite:
                devs.append(INF)
            else:
                devs.append(XReal(abs(v.q - limit.q)))
        bad = (
            not x_leq(devs[-1], XReal(tol))
            or any(not x_leq(devs[i + 1], devs[i]) for i in range(len(devs) - 1))
        )
        if bad:
            return Verdict(
                "Fails", witness=sigma, n=n_probe, lhs=vals[-1], rhs=limit
            )
    return Verdict(
        "Inconclusive",
        reason="consistent with the declared limit on the checked domain "
        "(numeric evidence, not a proof)",
    )


def refine(
    W: Union[While, Annotated],
    f: RtExpr,
    I: Union[RtExpr, Mapping[State, XReal]],
    D: StateDomain,
    rounds: int = 1,
    cfg: Optional[ErtConfig] = None,
    direction: str = "upper",
) -> Dict[State, XReal]:
    """Apply the characteristic functional `rounds` times, tightening a bound.

    Each round first re-checks that the current table still lies on the
    correct side of its image, which is what licenses another application;
    PreconditionFailed aborts the refinement otherwise.  With more than one
    round the domain must be closed under body steps, since intermediate
    bounds exist only as tables on D.
    """
    if direction not in ("upper", "lower"):
        raise ValueError("direction must be 'upper' or 'lower'")
    apply_F = char_functional(W, f, cfg)
    if isinstance(I, Mapping):
        table: Dict[State, XReal] = dict(I)
        cont = FnCont(lambda q: table[q])
    else:
        table = {sigma: _rt_at(I, sigma) for sigma in D}
        cont = RtCont(I)
    for r in range(rounds):
        nxt: Dict[State, XReal] = {}
        for sigma in D:
            try:
                lhs, tainted = apply_F(cont, sigma)
            except EvalError as e:
                _attach_state(e, sigma)
            res = _point(direction, lhs, tainted, table[sigma])
            if res != "ok":
                raise PreconditionFailed(
                    sigma, r,
                    "round %d: F(I) is not %s I at %s (%s vs %s)"
                    % (
                        r,
                        "below" if direction == "upper" else "above",
                        sigma, lhs, table[sigma],
                    ),
                )
            nxt[sigma] = lhs
        table = nxt
        snapshot = table
        cont = FnCont(lambda q, _t=snapshot: _t[q])
    return table


# ---------------------------------------------------------------------------
# walk coefficients


@lru_cache(maxsize=None)
def _rw_row(n: int) -> Tuple[Fraction, ...]:
    # row n holds a(n, 0..n) by the defining recurrence
    if n == 0:
        return (Fraction(1),)
    prev = _rw_row(n - 1)

    def at(k: int) -> Fraction:
        return prev[k] if k < len(prev) else Fraction(0)

    row = [Fraction(2) + (at(0) + at(1)) / 2]
    for k in range(1, n + 1):
        row.append((at(k - 1) + at(k + 1)) / 2)
    return tuple(row)


def rw_coefficients(n: int, k: int) -> Fraction:
    """Walk expansion coefficient a(n, k) from the defining recurrence."""
    if k > n or n < 0 or k < 0:
        return Fraction(0)
    return _rw_row(n)[k]


def rw_coefficients_closed(n: int, k: int) -> Fraction:
    """The same coefficient from the binomial closed form."""
    return rw_coefficient(n, k)
