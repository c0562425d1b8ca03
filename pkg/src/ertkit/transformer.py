"""Expected run-time transformer.

The transformer is evaluated pointwise: `expected_runtime` computes the
expected number of ticks of a program from one initial state, applied to a
post-run-time `f`.  Compound statements are handled with continuations, so a
sequence is literally the transformer of its head applied to the transformer
of its tail.

Unbounded loops are approximated from below by depth-bounded unrollings with
a doubling schedule.  An evaluation that never reaches a synthesized cutoff
is exact, because every further unrolling computes the same value; one that
does reach a cutoff is reported as a lower bound, which is always sound since
bounded unrollings approximate the fixed point from below.

A loop carrying a lower-bound annotation may be replaced by its certified
bound when it is applied to the continuation the bound was certified against.
All contexts of the transformer are monotone, so the result then remains a
lower bound for the whole program.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Tuple, Union

from .kernel import INF, ONE, ZERO, KernelError, State, XReal, x_add, x_max, x_mul
from .semantics import Bindings, EvalError, eval_dist, eval_expr, eval_guard, eval_rt
from .syntax import (
    Annotated, ArrayLit, CellTarget, Dirac, Empty, Halt, If, NdChoice,
    ProbAssign, Program, RLit, RtExpr, RT_ZERO, Seq, Skip, VarTarget, While,
    WhileBounded, rt_to_text,
)


class FuelExhausted(KernelError):
    pass


class NotDeterministic(KernelError):
    pass


class BudgetExceeded(KernelError):
    pass


@dataclass
class ErtConfig:
    """Knobs for the transformer.

    tick_mutation exists for the mutation test in the property suite; the
    only recognized value, "drop-if-tick", suppresses the tick charged by
    conditionals (including the conditionals arising from loop unrolling).
    """

    max_unroll_depth: int = 64
    use_annotations: bool = True
    tick_mutation: Optional[str] = None
    max_cache_entries: Optional[int] = None


@dataclass(frozen=True)
class ErtResult:
    kind: str  # "exact" | "lower"
    value: XReal
    annotations_used: Tuple[str, ...] = ()

    @property
    def is_exact(self) -> bool:
        return self.kind == "exact"


# ---------------------------------------------------------------------------
# continuations
#
# A continuation stands for the run-time function applied after a program
# fragment.  Continuations are compared by identity in the memo table; the
# engine canonicalizes sequence continuations so identical tails share one
# object.


class RtCont:
    """A literal run-time expression, optionally with extra bindings."""

    __slots__ = ("expr", "bind")

    def __init__(self, expr: RtExpr, bind: Optional[Bindings] = None):
        self.expr = expr
        self.bind = dict(bind) if bind else None

    def eval(self, sigma: State) -> Tuple[XReal, bool]:
        return eval_rt(self.expr, sigma, self.bind), False


class FnCont:
    """An opaque state-indexed table or function, e.g. a fixed-point iterate."""

    __slots__ = ("fn",)

    def __init__(self, fn: Callable[[State], XReal]):
        self.fn = fn

    def eval(self, sigma: State) -> Tuple[XReal, bool]:
        return self.fn(sigma), False


class _SeqCont:
    """Run a program, then the next continuation."""

    __slots__ = ("program", "after", "engine")

    def __init__(self, program: Program, after, engine: "_Engine"):
        self.program = program
        self.after = after
        self.engine = engine

    def eval(self, sigma: State) -> Tuple[XReal, bool]:
        return self.engine.eval(self.program, sigma, self.after)


ZERO_CONT = RtCont(RT_ZERO)


# ---------------------------------------------------------------------------
# engine


class _Engine:
    def __init__(self, config: ErtConfig):
        self.config = config
        self.memo: Dict[tuple, Tuple[XReal, bool]] = {}
        self.seq_conts: Dict[tuple, _SeqCont] = {}
        self.bounded_conts: Dict[tuple, "_BoundedCont"] = {}
        self.annotations_used: List[str] = []
        self._if_tick = ZERO if config.tick_mutation == "drop-if-tick" else ONE

    # continuations ------------------------------------------------------
    #
    # memo keys use continuation identity, so every continuation the engine
    # creates is interned for the engine's lifetime; ids never get recycled

    def seq_cont(self, program: Program, after) -> _SeqCont:
        key = (id(program), id(after))
        c = self.seq_conts.get(key)
        if c is None:
            c = _SeqCont(program, after, self)
            self.seq_conts[key] = c
        return c

    def bounded_cont(self, loop_key, guard, body, depth, after, synthesized) -> "_BoundedCont":
        key = (loop_key, depth, id(after), synthesized)
        c = self.bounded_conts.get(key)
        if c is None:
            c = _BoundedCont(self, loop_key, guard, body, depth, after, synthesized)
            self.bounded_conts[key] = c
        return c

    # evaluation ---------------------------------------------------------

    def eval(self, p: Program, sigma: State, cont) -> Tuple[XReal, bool]:
        key = (id(p), sigma, id(cont))
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        out = self._eval(p, sigma, cont)
        self._store(key, out)
        return out

    def _store(self, key, out):
        cap = self.config.max_cache_entries
        if cap is not None and len(self.memo) >= cap:
            raise BudgetExceeded(
                "evaluation cache exceeded %d entries" % cap
            )
        self.memo[key] = out

    def _eval(self, p: Program, sigma: State, cont) -> Tuple[XReal, bool]:
        if isinstance(p, Empty):
            return cont.eval(sigma)
        if isinstance(p, Skip):
            v, t = cont.eval(sigma)
            return x_add(ONE, v), t
        if isinstance(p, Halt):
            return ZERO, False
        if isinstance(p, ProbAssign):
            return self._assign(p, sigma, cont)
        if isinstance(p, Seq):
            return self.eval(p.first, sigma, self.seq_cont(p.second, cont))
        if isinstance(p, NdChoice):
            lv, lt = self.eval(p.left, sigma, cont)
            rv, rt_ = self.eval(p.right, sigma, cont)
            return x_max(lv, rv), lt or rt_
        if isinstance(p, If):
            return self._branch(p.guard, p.then, p.orelse, sigma, cont)
        if isinstance(p, While):
            return self._while(p, sigma, cont)
        if isinstance(p, WhileBounded):
            return self._bounded(("xwb", id(p)), p.guard, p.body, p.bound, sigma, cont, synthesized=False)
        if isinstance(p, Annotated):
            return self._annotated(p, sigma, cont)
        raise TypeError(p)

    def _assign(self, p: ProbAssign, sigma: State, cont) -> Tuple[XReal, bool]:
        total, tainted = ONE, False
        for prob, v in eval_dist(p.dist, sigma):
            if isinstance(p.target, VarTarget):
                if isinstance(v, tuple):
                    nxt = sigma.set_array(p.target.name, v)
                else:
                    nxt = sigma.set(p.target.name, v)
            else:
                idx = eval_expr(p.target.index, sigma)
                nxt = sigma.set_cell(p.target.name, idx, v)
            sub, t = cont.eval(nxt)
            total = x_add(total, x_mul(XReal(prob), sub))
            tainted = tainted or t
        return total, tainted

    def _branch(self, guard, then, orelse, sigma: State, cont) -> Tuple[XReal, bool]:
        p_true = eval_guard(guard, sigma)
        total, tainted = self._if_tick, False
        if p_true > 0:
            v, t = self.eval(then, sigma, cont)
            total = x_add(total, x_mul(XReal(p_true), v))
            tainted = tainted or t
        if p_true < 1:
            v, t = self.eval(orelse, sigma, cont)
            total = x_add(total, x_mul(XReal(1 - p_true), v))
            tainted = tainted or t
        return total, tainted

    def _bounded(
        self, loop_key, guard, body, depth: int, sigma: State, cont,
        synthesized: bool,
    ) -> Tuple[XReal, bool]:
        """Lazy evaluation of a depth-bounded loop.

        Depth zero behaves like halt.  Reaching depth zero of a synthesized
        bound means the fixed point may not have been reached, which taints
        the result; an explicit bound is just the program's own semantics.
        """
        key = (loop_key, depth, sigma, id(cont))
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        if depth <= 0:
            out: Tuple[XReal, bool] = (ZERO, synthesized)
        else:
            p_true = eval_guard(guard, sigma)
            total, tainted = self._if_tick, False
            if p_true > 0:
                rest = self.bounded_cont(loop_key, guard, body, depth - 1, cont, synthesized)
                v, t = self.eval(body, sigma, rest)
                total = x_add(total, x_mul(XReal(p_true), v))
                tainted = tainted or t
            if p_true < 1:
                v, t = cont.eval(sigma)
                total = x_add(total, x_mul(XReal(1 - p_true), v))
                tainted = tainted or t
            out = (total, tainted)
        self._store(key, out)
        return out

    def _while(self, p: While, sigma: State, cont) -> Tuple[XReal, bool]:
        loop_key = ("wb", id(p))
        depth = 1
        value, tainted = ZERO, True
        while True:
            value, tainted = self._bounded(
                loop_key, p.guard, p.body, depth, sigma, cont, synthesized=True
            )
            if not tainted or value.is_infinite:
                return value, tainted
            if depth >= self.config.max_unroll_depth:
                return value, True
            depth = min(depth * 2, self.config.max_unroll_depth)

    def _annotated(self, p: Annotated, sigma: State, cont) -> Tuple[XReal, bool]:
        ann = p.annotation
        if (
            self.config.use_annotations
            and ann.direction == "lower"
            and isinstance(cont, RtCont)
            and not cont.bind
            and cont.expr == ann.continuation
        ):
            self.annotations_used.append(rt_to_text(ann.bound))
            return eval_rt(ann.bound, sigma), True
        return self._while(p.loop, sigma, cont)


class _BoundedCont:
    """Continuation that resumes a bounded loop at one less depth."""

    __slots__ = ("engine", "loop_key", "guard", "body", "depth", "after", "synthesized")

    def __init__(self, engine, loop_key, guard, body, depth, after, synthesized):
        self.engine = engine
        self.loop_key = loop_key
        self.guard = guard
        self.body = body
        self.depth = depth
        self.after = after
        self.synthesized = synthesized

    def eval(self, sigma: State) -> Tuple[XReal, bool]:
        return self.engine._bounded(
            self.loop_key, self.guard, self.body, self.depth, sigma,
            self.after, self.synthesized,
        )


def _ensure_stack():
    if sys.getrecursionlimit() < 1_000_000:
        sys.setrecursionlimit(1_000_000)


def _as_cont(f) -> Union[RtCont, FnCont]:
    if f is None:
        return ZERO_CONT
    if isinstance(f, (RtCont, FnCont)):
        return f
    if callable(f):
        return FnCont(f)
    return RtCont(f)


# ---------------------------------------------------------------------------
# public entry points


def expected_runtime(
    program: Program,
    f: Union[RtExpr, RtCont, FnCont, Callable, None] = None,
    sigma: Optional[State] = None,
    config: Optional[ErtConfig] = None,
) -> ErtResult:
    """Expected run-time of `program` applied to `f`, from state `sigma`.

    The result is exact unless a loop had to be cut off or a lower-bound
    annotation was substituted, in which case it is a lower bound.  An
    infinite lower bound is promoted back to exact, since nothing exceeds it.
    """
    _ensure_stack()
    cfg = config or ErtConfig()
    engine = _Engine(cfg)
    value, tainted = engine.eval(program, sigma or State(), _as_cont(f))
    if value.is_infinite:
        tainted = False
    # one entry per distinct bound, not one per substitution site
    return ErtResult(
        kind="lower" if tainted else "exact",
        value=value,
        annotations_used=tuple(dict.fromkeys(engine.annotations_used)),
    )


def expected_runtime_value(program, f=None, sigma=None, config=None) -> XReal:
    return expected_runtime(program, f, sigma, config).value


def bounded_unroll(loop: Union[While, Annotated], depth: int) -> Program:
    """The depth-bounded unrolling of a loop as an explicit program tree."""
    if isinstance(loop, Annotated):
        loop = loop.loop
    out: Program = Halt()
    for _ in range(depth):
        out = If(loop.guard, Seq(loop.body, out), Empty())
    return out


def char_functional(
    loop: Union[While, Annotated],
    f: Union[RtExpr, RtCont],
    config: Optional[ErtConfig] = None,
):
    """The characteristic functional F of a loop with respect to `f`.

    Returns apply(X, sigma) -> (value, tainted) computing

        F(X)(sigma) = tick + Pr[guard false] * f(sigma)
                           + Pr[guard true] * ert[body](X)(sigma)

    where X is a continuation, a callable, or a run-time expression.  The
    tainted flag is set when the body itself contained a loop that was cut
    off, in which case the value is only a lower bound on F(X)(sigma).
    """
    if isinstance(loop, Annotated):
        loop = loop.loop
    _ensure_stack()
    cfg = config or ErtConfig()
    f_cont = _as_cont(f)

    def apply(X, sigma: State) -> Tuple[XReal, bool]:
        engine = _Engine(cfg)
        x_cont = _as_cont(X)
        p_true = eval_guard(loop.guard, sigma)
        total, tainted = ONE, False
        if p_true < 1:
            v, t = f_cont.eval(sigma)
            total = x_add(total, x_mul(XReal(1 - p_true), v))
            tainted = tainted or t
        if p_true > 0:
            v, t = engine.eval(loop.body, sigma, x_cont)
            total = x_add(total, x_mul(XReal(p_true), v))
            tainted = tainted or t
        return total, tainted

    return apply


def kleene_iterates(
    loop: Union[While, Annotated],
    f: Union[RtExpr, RtCont],
    states: List[State],
    config: Optional[ErtConfig] = None,
):
    """Yield the fixed-point iterates of a loop as state tables.

    The first yielded table is the zero run-time; each following table
    applies the characteristic functional once.  States missing from the
    table read as zero, the same base the iteration starts from, so every
    entry is a sound approximation from below; an entry is exact whenever
    its dependence cone across the computed iterates stays inside the table.
    """
    if isinstance(loop, Annotated):
        loop = loop.loop
    _ensure_stack()
    cfg = config or ErtConfig()
    f_cont = _as_cont(f)
    table: Dict[State, XReal] = {s: ZERO for s in states}
    yield dict(table)
    while True:
        snapshot = table
        engine = _Engine(cfg)
        x_cont = FnCont(lambda q: snapshot.get(q, ZERO))
        nxt: Dict[State, XReal] = {}
        for s in states:
            p_true = eval_guard(loop.guard, s)
            total = ONE
            if p_true < 1:
                total = x_add(total, x_mul(XReal(1 - p_true), f_cont.eval(s)[0]))
            if p_true > 0:
                v, _ = engine.eval(loop.body, s, x_cont)
                total = x_add(total, x_mul(XReal(p_true), v))
            nxt[s] = total
        table = nxt
        yield dict(table)


def det_step_count(
    program: Program, sigma: Optional[State] = None, fuel: int = 10_000_000
) -> Tuple[XReal, State]:
    """Run a deterministic program, counting ticks.

    Equals the transformer applied to the zero run-time on programs where
    every distribution is a point mass and no nondeterministic choice
    occurs.  Returns the tick count and the final state; a halt statement
    stops the run keeping the count accumulated so far.
    """
    sigma = sigma or State()
    ticks = 0
    stack: List[Program] = [program]
    while stack:
        if fuel <= 0:
            raise FuelExhausted("step budget exhausted; the run may diverge")
        fuel -= 1
        node = stack.pop()
        if isinstance(node, Empty):
            continue
        if isinstance(node, Skip):
            ticks += 1
            continue
        if isinstance(node, Halt):
            break
        if isinstance(node, ProbAssign):
            support = _det_support(node.dist, sigma)
            ticks += 1
            if isinstance(node.target, VarTarget):
                if isinstance(support, tuple):
                    sigma = sigma.set_array(node.target.name, support)
                else:
                    sigma = sigma.set(node.target.name, support)
            else:
                idx = eval_expr(node.target.index, sigma)
                sigma = sigma.set_cell(node.target.name, idx, support)
            continue
        if isinstance(node, Seq):
            stack.append(node.second)
            stack.append(node.first)
            continue
        if isinstance(node, NdChoice):
            raise NotDeterministic("nondeterministic choice in a deterministic run")
        if isinstance(node, If):
            ticks += 1
            taken = node.then if _det_guard(node.guard, sigma) else node.orelse
            stack.append(taken)
            continue
        if isinstance(node, While):
            ticks += 1
            if _det_guard(node.guard, sigma):
                stack.append(node)
                stack.append(node.body)
            continue
        if isinstance(node, WhileBounded):
            ticks += 1
            if node.bound <= 0:
                # depth exhausted: behaves like halt, and the guard tick
                # above was never charged by the bounded semantics
                ticks -= 1
                break
            if _det_guard(node.guard, sigma):
                stack.append(WhileBounded(node.bound - 1, node.guard, node.body))
                stack.append(node.body)
            continue
        if isinstance(node, Annotated):
            stack.append(node.loop)
            continue
        raise TypeError(node)
    return XReal(ticks), sigma


def _det_support(dist, sigma):
    entries = eval_dist(dist, sigma)
    if len(entries) != 1:
        raise NotDeterministic("random assignment in a deterministic run")
    return entries[0][1]


def _det_guard(guard, sigma) -> bool:
    p = eval_guard(guard, sigma)
    if p == 1:
        return True
    if p == 0:
        return False
    raise NotDeterministic("probabilistic guard in a deterministic run")
