"""Operational model: the reachable reward decision process of a program.

Built independently of the transformer, from small-step rules over
configuration nodes: a running program with a state, a terminated marker
(which collects the post-run-time as reward), a terminated-then-continue
marker for sequencing, and an absorbing sink.  Halting steps straight to the
sink, so the post-run-time is not collected on halted runs.

The expected total reward to the sink, maximized over schedulers, is the
quantity the transformer computes; `cross_check` compares the two.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .kernel import INF, ZERO, KernelError, State, XReal
from .semantics import eval_dist, eval_expr, eval_guard, eval_rt
from .syntax import (
    Annotated, Dirac, Empty, Halt, If, NdChoice, ProbAssign, Program, RtExpr,
    RT_ZERO, Seq, Skip, VarTarget, While, WhileBounded, program_to_text,
)


class NodeCapExceeded(KernelError):
    def __init__(self, cap: int):
        super().__init__("reachable node count exceeded the cap of %d" % cap)
        self.cap = cap


class SingularSystem(KernelError):
    pass


# ---------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class MdpNode:
    kind: str  # "exec" | "term" | "termseq" | "sink"
    program: Optional[Program] = None
    state: Optional[State] = None


@dataclass
class Mdp:
    nodes: List[MdpNode]
    # per node: action -> list of (probability, successor index)
    transitions: List[Dict[str, List[Tuple[Fraction, int]]]]
    rewards: List[XReal]
    initial: int
    sink: int
    f: RtExpr

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def is_markov_chain(self) -> bool:
        return all(len(t) == 1 for t in self.transitions)


@dataclass(frozen=True)
class Qualitative:
    kind: str  # "AllSchedulersReachSink" | "SomeSchedulerAvoids"
    witness: Optional[Tuple[Tuple[int, str], ...]] = None  # (node, action)


@dataclass(frozen=True)
class RewardAnalysis:
    qualitative: Qualitative
    value: XReal
    method: str  # "ExactLinearSolve" | "SchedulerEnumeration" | "ValueIteration" | "Qualitative" | "InfiniteReward"
    schedulers: Optional[int] = None
    iterations: Optional[int] = None
    residual: Optional[float] = None


@dataclass
class MdpConfig:
    node_cap: int = 200_000
    scheduler_cap: int = 4096
    vi_tol: float = 1e-9
    vi_max_iters: int = 1_000_000


# ---------------------------------------------------------------------------
# canonical program form: bounded loops expanded, annotations dropped


def _canonical(p: Program, memo: Dict[int, Program]) -> Program:
    hit = memo.get(id(p))
    if hit is not None:
        return hit
    if isinstance(p, Seq):
        out: Program = Seq(_canonical(p.first, memo), _canonical(p.second, memo))
    elif isinstance(p, NdChoice):
        out = NdChoice(_canonical(p.left, memo), _canonical(p.right, memo))
    elif isinstance(p, If):
        out = If(p.guard, _canonical(p.then, memo), _canonical(p.orelse, memo))
    elif isinstance(p, While):
        out = While(p.guard, _canonical(p.body, memo))
    elif isinstance(p, WhileBounded):
        body = _canonical(p.body, memo)
        out = Halt()
        for _ in range(p.bound):
            out = If(p.guard, Seq(body, out), Empty())
    elif isinstance(p, Annotated):
        out = _canonical(p.loop, memo)
    else:
        out = p
    memo[id(p)] = out
    return out


# ---------------------------------------------------------------------------
# construction


class _Builder:
    def __init__(self, f: RtExpr, cap: int):
        self.f = f
        self.cap = cap
        self.nodes: List[MdpNode] = []
        self.transitions: List[Dict[str, List[Tuple[Fraction, int]]]] = []
        self.rewards: List[XReal] = []
        self.index: Dict[tuple, int] = {}
        self.seq_cache: Dict[Tuple[int, int], Seq] = {}
        self.unfold_cache: Dict[int, If] = {}
        self.sink = self._intern(MdpNode("sink"), ("sink",))

    def _intern(self, node: MdpNode, key: tuple) -> int:
        i = self.index.get(key)
        if i is not None:
            return i
        if len(self.nodes) >= self.cap:
            raise NodeCapExceeded(self.cap)
        i = len(self.nodes)
        self.index[key] = i
        self.nodes.append(node)
        self.transitions.append({})
        self.rewards.append(ZERO)
        return i

    def exec_node(self, p: Program, sigma: State) -> int:
        return self._intern(MdpNode("exec", p, sigma), ("exec", id(p), sigma))

    def term_node(self, sigma: State) -> int:
        return self._intern(MdpNode("term", None, sigma), ("term", sigma))

    def termseq_node(self, p: Program, sigma: State) -> int:
        return self._intern(MdpNode("termseq", p, sigma), ("termseq", id(p), sigma))

    def compose(self, first: Program, second: Program) -> Seq:
        key = (id(first), id(second))
        c = self.seq_cache.get(key)
        if c is None:
            c = Seq(first, second)
            self.seq_cache[key] = c
        return c

    def unfold(self, w: While) -> If:
        c = self.unfold_cache.get(id(w))
        if c is None:
            c = If(w.guard, self.compose(w.body, w), Empty())
            self.unfold_cache[id(w)] = c
        return c

    # successor descriptors: ("exec", p, σ) | ("term", σ) | ("termseq", p, σ) | ("sink",)

    def step(self, p: Program, sigma: State) -> Dict[str, List[Tuple[Fraction, tuple]]]:
        if isinstance(p, (Empty, Skip)):
            return {"t": [(Fraction(1), ("term", sigma))]}
        if isinstance(p, Halt):
            return {"t": [(Fraction(1), ("sink",))]}
        if isinstance(p, ProbAssign):
            acc: Dict[tuple, Fraction] = {}
            for prob, v in eval_dist(p.dist, sigma):
                if isinstance(p.target, VarTarget):
                    if isinstance(v, tuple):
                        nxt = sigma.set_array(p.target.name, v)
                    else:
                        nxt = sigma.set(p.target.name, v)
                else:
                    idx = eval_expr(p.target.index, sigma)
                    nxt = sigma.set_cell(p.target.name, idx, v)
                d = ("term", nxt)
                acc[d] = acc.get(d, Fraction(0)) + prob
            return {"t": [(prob, d) for d, prob in acc.items()]}
        if isinstance(p, NdChoice):
            return {
                "L": [(Fraction(1), ("exec", p.left, sigma))],
                "R": [(Fraction(1), ("exec", p.right, sigma))],
            }
        if isinstance(p, If):
            p_true = eval_guard(p.guard, sigma)
            if p_true == 1 or p.then is p.orelse:
                return {"t": [(Fraction(1), ("exec", p.then, sigma))]}
            if p_true == 0:
                return {"t": [(Fraction(1), ("exec", p.orelse, sigma))]}
            return {"t": [
                (p_true, ("exec", p.then, sigma)),
                (1 - p_true, ("exec", p.orelse, sigma)),
            ]}
        if isinstance(p, While):
            return {"t": [(Fraction(1), ("exec", self.unfold(p), sigma))]}
        if isinstance(p, Seq):
            inner = self.step(p.first, sigma)
            out: Dict[str, List[Tuple[Fraction, tuple]]] = {}
            for action, rows in inner.items():
                lifted = []
                for prob, d in rows:
                    if d[0] == "term":
                        lifted.append((prob, ("termseq", p.second, d[1])))
                    elif d[0] == "termseq":
                        lifted.append(
                            (prob, ("termseq", self.compose(d[1], p.second), d[2]))
                        )
                    elif d[0] == "exec":
                        lifted.append(
                            (prob, ("exec", self.compose(d[1], p.second), d[2]))
                        )
                    else:
                        lifted.append((prob, d))
                out[action] = lifted
            return out
        raise TypeError(p)

    def resolve(self, d: tuple) -> int:
        if d[0] == "sink":
            return self.sink
        if d[0] == "term":
            return self.term_node(d[1])
        if d[0] == "termseq":
            return self.termseq_node(d[1], d[2])
        return self.exec_node(d[1], d[2])


def head_reward(p: Program) -> XReal:
    """Reward of a running node, by the head statement.

    Guard evaluations and assignments consume one unit of time; structural
    steps are free; a sequence inherits the charge of its first component.
    """
    if isinstance(p, (Skip, ProbAssign, If)):
        return XReal(1)
    if isinstance(p, Seq):
        return head_reward(p.first)
    return ZERO


def node_reward(node: MdpNode, f: RtExpr) -> XReal:
    if node.kind == "term":
        return eval_rt(f, node.state)
    if node.kind == "exec":
        return head_reward(node.program)
    return ZERO


def build_mdp(
    C: Program, sigma0: State, f: RtExpr = RT_ZERO, node_cap: int = 200_000
) -> Mdp:
    """Breadth-first closure of the step rules from the initial configuration."""
    b = _Builder(f, node_cap)
    b.transitions[b.sink]["t"] = [(Fraction(1), b.sink)]
    root = _canonical(C, {})
    initial = b.exec_node(root, sigma0)
    frontier = [initial]
    seen = {b.sink, initial}
    while frontier:
        nxt: List[int] = []
        for i in frontier:
            node = b.nodes[i]
            if node.kind == "term":
                b.rewards[i] = eval_rt(f, node.state)
                rows = {"t": [(Fraction(1), b.sink)]}
                b.transitions[i] = rows
                continue
            if node.kind == "termseq":
                j = b.exec_node(node.program, node.state)
                b.transitions[i] = {"t": [(Fraction(1), j)]}
                if j not in seen:
                    seen.add(j)
                    nxt.append(j)
                continue
            # exec
            b.rewards[i] = head_reward(node.program)
            out: Dict[str, List[Tuple[Fraction, int]]] = {}
            for action, rows in b.step(node.program, node.state).items():
                resolved = []
                for prob, d in rows:
                    j = b.resolve(d)
                    resolved.append((prob, j))
                    if j not in seen:
                        seen.add(j)
                        nxt.append(j)
                out[action] = resolved
            b.transitions[i] = out
        frontier = nxt
    return Mdp(b.nodes, b.transitions, b.rewards, initial, b.sink, f)


def recompute_rewards(m: Mdp) -> List[XReal]:
    """Independent second pass over the reward table, for auditing."""
    return [node_reward(node, m.f) for node in m.nodes]


# ---------------------------------------------------------------------------
# qualitative analysis: maximal end components


def _sccs(vertices: Sequence[int], succ: Dict[int, List[int]]) -> List[List[int]]:
    # iterative Tarjan
    index: Dict[int, int] = {}
    low: Dict[int, int] = {}
    on: set = set()
    stack: List[int] = []
    out: List[List[int]] = []
    counter = 0
    for root in vertices:
        if root in index:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on.add(v)
            recurse = False
            edges = succ.get(v, [])
            while pi < len(edges):
                w = edges[pi]
                pi += 1
                if w not in index:
                    work[-1] = (v, pi)
                    work.append((w, 0))
                    recurse = True
                    break
                if w in on:
                    low[v] = min(low[v], index[w])
            if recurse:
                continue
            work.pop()
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                out.append(comp)
            if work:
                u, _ = work[-1]
                low[u] = min(low[u], low[v])
    return out


def maximal_end_components(m: Mdp) -> List[Tuple[List[int], Dict[int, List[str]]]]:
    """Sub-MDPs a scheduler can keep forever: components with, per node, at
    least one action whose whole support stays inside, strongly connected
    through those actions."""
    component: Dict[int, int] = {i: 0 for i in range(m.node_count)}
    groups: List[List[int]] = [list(range(m.node_count))]
    changed = True
    while changed:
        changed = False
        new_groups: List[List[int]] = []
        for grp in groups:
            inside = set(grp)
            succ: Dict[int, List[int]] = {}
            keep: Dict[int, List[str]] = {}
            for v in grp:
                outs = []
                acts = []
                for action, rows in m.transitions[v].items():
                    if all(j in inside for _, j in rows):
                        acts.append(action)
                        outs.extend(j for _, j in rows)
                if acts:
                    succ[v] = outs
                    keep[v] = acts
            vertices = [v for v in grp if v in keep]
            comps = _sccs(vertices, succ)
            for comp in comps:
                cs = set(comp)
                if len(comp) == 1:
                    v = comp[0]
                    if not any(
                        all(j in cs for _, j in m.transitions[v][a])
                        for a in keep.get(v, [])
                    ):
                        changed = True
                        continue  # trivial component, drop the state
                if len(cs) != len(inside):
                    changed = True
                new_groups.append(comp)
            if len(vertices) != len(grp):
                changed = True
        groups = new_groups
    out = []
    for grp in groups:
        cs = set(grp)
        choices: Dict[int, List[str]] = {}
        for v in grp:
            acts = [
                a
                for a, rows in m.transitions[v].items()
                if all(j in cs for _, j in rows)
            ]
            if acts:
                choices[v] = acts
        if len(choices) == len(grp):
            out.append((grp, choices))
    return out


def qualitative_check(m: Mdp) -> Qualitative:
    """Whether every scheduler reaches the sink almost surely.

    A scheduler can avoid the sink with positive probability exactly when
    some end component without the sink is reachable; every node in the
    model is reachable by construction.
    """
    for comp, choices in maximal_end_components(m):
        if m.sink not in comp:
            witness = tuple(sorted((v, choices[v][0]) for v in comp))
            return Qualitative("SomeSchedulerAvoids", witness)
    return Qualitative("AllSchedulersReachSink")


# ---------------------------------------------------------------------------
# expected total reward


def _solve_chain(
    m: Mdp, pick: Optional[Dict[int, str]] = None
) -> List[Fraction]:
    """Exact expected reward-to-sink for a chain (or a scheduler's chain).

    Condenses strongly connected components and solves them in reverse
    topological order, each by Gaussian elimination over rationals.
    """
    n = m.node_count
    row_of: List[List[Tuple[Fraction, int]]] = []
    for i in range(n):
        t = m.transitions[i]
        if pick is not None and i in pick:
            row_of.append(t[pick[i]])
        else:
            row_of.append(next(iter(t.values())))
    succ = {i: [j for _, j in row_of[i]] for i in range(n)}
    comps = _sccs(list(range(n)), succ)  # reverse topological order
    x: List[Optional[Fraction]] = [None] * n
    x[m.sink] = Fraction(0)
    for comp in comps:
        if comp == [m.sink]:
            continue
        if len(comp) == 1 and comp[0] not in succ.get(comp[0], []):
            i = comp[0]
            rew = m.rewards[i]
            acc = rew.q if rew.is_finite else None
            if acc is None:
                raise SingularSystem("infinite reward in finite solve")
            total = acc
            for prob, j in row_of[i]:
                total += prob * x[j]
            x[i] = total
            continue
        # general component: Gaussian elimination on the local unknowns
        local = {v: k for k, v in enumerate(comp)}
        size = len(comp)
        A = [[Fraction(0)] * (size + 1) for _ in range(size)]
        for v in comp:
            r = local[v]
            A[r][r] += 1
            rew = m.rewards[v]
            if not rew.is_finite:
                raise SingularSystem("infinite reward in finite solve")
            A[r][size] += rew.q
            for prob, j in row_of[v]:
                if j in local:
                    A[r][local[j]] -= prob
                else:
                    A[r][size] += prob * x[j]
        for col in range(size):
            piv = next(
                (r for r in range(col, size) if A[r][col] != 0), None
            )
            if piv is None:
                raise SingularSystem(
                    "no unique solution; a diverging component slipped past "
                    "the qualitative check"
                )
            A[col], A[piv] = A[piv], A[col]
            inv = A[col][col]
            A[col] = [a / inv for a in A[col]]
            for r in range(size):
                if r != col and A[r][col] != 0:
                    factor = A[r][col]
                    A[r] = [a - factor * b for a, b in zip(A[r], A[col])]
        for v in comp:
            x[v] = A[local[v]][size]
    return [q if q is not None else Fraction(0) for q in x]


def _nd_nodes(m: Mdp) -> List[int]:
    return [i for i in range(m.node_count) if len(m.transitions[i]) > 1]


def _value_iteration(m: Mdp, cfg: MdpConfig) -> Tuple[List[float], int, float]:
    n = m.node_count
    rew = [
        (math.inf if not r.is_finite else float(r.q)) for r in m.rewards
    ]
    x = [0.0] * n
    residual = math.inf
    for it in range(1, cfg.vi_max_iters + 1):
        residual = 0.0
        nxt = [0.0] * n
        for i in range(n):
            if i == m.sink:
                continue
            best = None
            for rows in m.transitions[i].values():
                acc = rew[i]
                for prob, j in rows:
                    acc += float(prob) * x[j]
                if best is None or acc > best:
                    best = acc
            nxt[i] = best if best is not None else 0.0
            residual = max(residual, abs(nxt[i] - x[i]))
        x = nxt
        if residual <= cfg.vi_tol:
            return x, it, residual
    return x, cfg.vi_max_iters, residual


def expected_reward(m: Mdp, cfg: Optional[MdpConfig] = None) -> RewardAnalysis:
    """Supremum over schedulers of the expected total reward to the sink."""
    cfg = cfg or MdpConfig()
    qual = qualitative_check(m)
    if qual.kind == "SomeSchedulerAvoids":
        return RewardAnalysis(qual, INF, "Qualitative")
    if any(not r.is_finite for r in m.rewards):
        # an infinite reward sits on a reachable node, and every node is
        # reached with positive probability by construction
        return RewardAnalysis(qual, INF, "InfiniteReward")
    nd = _nd_nodes(m)
    if not nd:
        vals = _solve_chain(m)
        return RewardAnalysis(qual, XReal(vals[m.initial]), "ExactLinearSolve")
    combos = 1
    for i in nd:
        combos *= len(m.transitions[i])
        if combos > cfg.scheduler_cap:
            break
    if combos <= cfg.scheduler_cap:
        best: Optional[Fraction] = None
        picks: List[Dict[int, str]] = [{}]
        for i in nd:
            grown = []
            for p in picks:
                for a in sorted(m.transitions[i]):
                    q = dict(p)
                    q[i] = a
                    grown.append(q)
            picks = grown
        for pick in picks:
            v = _solve_chain(m, pick)[m.initial]
            if best is None or v > best:
                best = v
        return RewardAnalysis(
            qual, XReal(best), "SchedulerEnumeration", schedulers=len(picks)
        )
    vals, iters, residual = _value_iteration(m, cfg)
    v = vals[m.initial]
    return RewardAnalysis(
        qual,
        INF if math.isinf(v) else XReal(Fraction(v)),
        "ValueIteration",
        iterations=iters,
        residual=residual,
    )


# ---------------------------------------------------------------------------
# cross-checking against the transformer


@dataclass(frozen=True)
class CrossCheckReport:
    status: str  # "pass" | "fail"
    ert_kind: str
    ert_value: XReal
    mdp_value: XReal
    method: str
    node_count: int
    bounded_at: Optional[int] = None
    detail: str = ""


def cross_check(
    C: Program,
    f: RtExpr = RT_ZERO,
    sigma: Optional[State] = None,
    cfg: Optional[MdpConfig] = None,
    ert_config=None,
    fallback_unroll: int = 64,
    tol: float = 1e-9,
) -> CrossCheckReport:
    """Compute the transformer and the operational value and compare.

    Programs whose reachable model does not fit the node cap are compared on
    their depth-bounded form instead: both sides are exact on that program,
    so the comparison is an exact equality, at the price of speaking about
    the bounded program only.
    """
    from .syntax import replace_whiles
    from .transformer import ErtConfig, expected_runtime

    sigma = sigma or State()
    cfg = cfg or MdpConfig()
    bounded_at = None
    program = C
    try:
        m = build_mdp(program, sigma, f, cfg.node_cap)
    except NodeCapExceeded:
        bounded_at = fallback_unroll
        program = replace_whiles(C, fallback_unroll)
        m = build_mdp(program, sigma, f, cfg.node_cap)
    analysis = expected_reward(m, cfg)
    e_cfg = ert_config or ErtConfig()
    ert = expected_runtime(program, f, sigma, e_cfg)

    exact_backend = analysis.method in (
        "ExactLinearSolve", "SchedulerEnumeration", "Qualitative", "InfiniteReward",
    )
    ev, mv = ert.value, analysis.value
    if ert.is_exact:
        if exact_backend:
            ok = ev == mv
            detail = "exact equality" if ok else "values differ"
        else:
            ok = _close(ev, mv, tol)
            detail = "within tolerance" if ok else "outside tolerance"
    else:
        if exact_backend:
            ok = ev <= mv
        else:
            ok = (not mv.is_finite) or (
                ev.is_finite and float(ev.q) <= float(mv.q) + tol
            )
        detail = (
            "lower bound consistent" if ok else "lower bound exceeds the value"
        )
    return CrossCheckReport(
        status="pass" if ok else "fail",
        ert_kind=ert.kind,
        ert_value=ev,
        mdp_value=mv,
        method=analysis.method,
        node_count=m.node_count,
        bounded_at=bounded_at,
        detail=detail,
    )


def _close(a: XReal, b: XReal, tol: float) -> bool:
    if a.is_finite != b.is_finite:
        return False
    if not a.is_finite:
        return True
    return abs(float(a.q) - float(b.q)) <= tol


# ---------------------------------------------------------------------------
# exports


def _node_label(node: MdpNode) -> str:
    if node.kind == "sink":
        return "sink"
    if node.kind == "term":
        return "[down] %s" % node.state
    head = program_to_text(node.program).split("\n")[0].strip()
    if len(head) > 40:
        head = head[:37] + "..."
    if node.kind == "termseq":
        return "[down; %s] %s" % (head, node.state)
    return "%s %s" % (head, node.state)


def mdp_to_dot(m: Mdp) -> str:
    lines = ["digraph mdp {", '  rankdir=TB;', '  node [shape=box, fontsize=10];']
    for i, node in enumerate(m.nodes):
        rew = m.rewards[i]
        extra = "" if rew == ZERO else '\\nreward %s' % rew
        shape = ', shape=doublecircle' if node.kind == "sink" else ""
        lines.append(
            '  n%d [label="%s%s", fontcolor=black, color=gray40%s];'
            % (i, _escape(_node_label(node)), extra, shape)
        )
    for i, trans in enumerate(m.transitions):
        for action, rows in sorted(trans.items()):
            for prob, j in rows:
                label = "" if prob == 1 else str(prob)
                if action != "t":
                    label = ("%s %s" % (action, label)).strip()
                attr = ' [label="%s", fontcolor=gray30]' % _escape(label) if label else ""
                lines.append("  n%d -> n%d%s;" % (i, j, attr))
    lines.append("}")
    return "\n".join(lines)


def _escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def analysis_to_json(analysis: RewardAnalysis) -> str:
    doc = {
        "qualitative": analysis.qualitative.kind,
        "value": str(analysis.value),
        "method": analysis.method,
    }
    if analysis.schedulers is not None:
        doc["schedulers"] = analysis.schedulers
    if analysis.iterations is not None:
        doc["iterations"] = analysis.iterations
        doc["residual"] = analysis.residual
    if analysis.qualitative.witness:
        doc["witness"] = [
            {"node": v, "action": a} for v, a in analysis.qualitative.witness
        ]
    return json.dumps(doc, indent=2, sort_keys=True)
