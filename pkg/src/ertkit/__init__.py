"""Expected run-time analysis for discrete probabilistic programs.

The package computes expected run times by a backward transformer over
extended non-negative rationals, checks user-supplied loop invariants,
and cross-validates results against an independently built operational
model with expected total reward semantics.
"""

__version__ = "0.1.0"

from .kernel import INF, State, XReal, ZERO
from .syntax import (
    Annotated,
    Dirac,
    Empty,
    Halt,
    If,
    InvariantAnnotation,
    NdChoice,
    ProbAssign,
    Program,
    RtExpr,
    RT_ZERO,
    Seq,
    Skip,
    Uniform,
    WeightedList,
    While,
    WhileBounded,
    expand_bounded_once,
    program_to_text,
    replace_whiles,
    rt_to_text,
    while_loops,
)
from .parser import ParseError, parse_program, parse_rt
from .semantics import EvalError, eval_rt, harmonic_number
from .transformer import (
    ErtConfig,
    ErtResult,
    bounded_unroll,
    char_functional,
    det_step_count,
    expected_runtime,
    kleene_iterates,
)
from .invariants import (
    OmegaInvariantSpec,
    PreconditionFailed,
    StateDomain,
    UpperInvariantSpec,
    Verdict,
    check_limit,
    check_omega_invariant,
    check_upper_invariant,
    refine,
    rw_coefficients,
    rw_coefficients_closed,
)
from .mdp import (
    CrossCheckReport,
    Mdp,
    MdpConfig,
    NodeCapExceeded,
    build_mdp,
    cross_check,
    expected_reward,
    mdp_to_dot,
)
from .generator import GenProfile, PROFILES, random_program, random_runtime, random_state
from .props import run_det_sweep, run_property_suite, run_soundness_sweep
from .corpus import ENTRIES, CorpusEntry, coupon_closed_form
from .specfile import InvariantSpecFile, SpecError, load_spec, parse_domain, parse_spec

__all__ = [
    "__version__",
    "INF",
    "ZERO",
    "State",
    "XReal",
    "Annotated",
    "Dirac",
    "Empty",
    "Halt",
    "If",
    "InvariantAnnotation",
    "NdChoice",
    "ProbAssign",
    "Program",
    "RtExpr",
    "RT_ZERO",
    "Seq",
    "Skip",
    "Uniform",
    "WeightedList",
    "While",
    "WhileBounded",
    "expand_bounded_once",
    "program_to_text",
    "replace_whiles",
    "rt_to_text",
    "while_loops",
    "ParseError",
    "parse_program",
    "parse_rt",
    "EvalError",
    "eval_rt",
    "harmonic_number",
    "ErtConfig",
    "ErtResult",
    "bounded_unroll",
    "char_functional",
    "det_step_count",
    "expected_runtime",
    "kleene_iterates",
    "OmegaInvariantSpec",
    "PreconditionFailed",
    "StateDomain",
    "UpperInvariantSpec",
    "Verdict",
    "check_limit",
    "check_omega_invariant",
    "check_upper_invariant",
    "refine",
    "rw_coefficients",
    "rw_coefficients_closed",
    "CrossCheckReport",
    "Mdp",
    "MdpConfig",
    "NodeCapExceeded",
    "build_mdp",
    "cross_check",
    "expected_reward",
    "mdp_to_dot",
    "GenProfile",
    "PROFILES",
    "random_program",
    "random_runtime",
    "random_state",
    "run_det_sweep",
    "run_property_suite",
    "run_soundness_sweep",
    "ENTRIES",
    "CorpusEntry",
    "coupon_closed_form",
    "InvariantSpecFile",
    "SpecError",
    "load_spec",
    "parse_domain",
    "parse_spec",
]
