from fractions import Fraction

import pytest

from ertkit.kernel import State
from ertkit.specfile import SpecError, parse_domain, parse_spec
from ertkit.syntax import While


GOOD = """\
// a loose bound on the geometric loop
check: upper
corpus: geo
invariant: 1 + [c = 1] * 6
domain: c in {0, 1}
"""


def test_parse_spec_happy_path():
    spec = parse_spec(GOOD)
    assert spec.check == "upper"
    assert isinstance(spec.loop, While)
    assert len(spec.domain) == 2
    assert spec.rounds == 1


def test_inline_program_with_continuation_lines():
    spec = parse_spec(
        "check: upper\n"
        "program: x := 2;\n"
        "  while (x > 0) {\n"
        "    x := x - 1\n"
        "  }\n"
        "invariant: 1 + [x > 0] * 2 * x\n"
        "domain: x in 0 .. 3\n"
    )
    assert "while" in spec.program_source
    assert isinstance(spec.loop, While)


def test_loop_index_selects_and_validates():
    src = (
        "check: upper\n"
        "program: while (x > 0) { x := x - 1 }; while (y > 0) { y := y - 1 }\n"
        "loop: 1\n"
        "invariant: 1 + [y > 0] * 2 * y\n"
        "domain: y in 0 .. 3\n"
    )
    spec = parse_spec(src)
    assert "y" in str(spec.loop.guard)
    with pytest.raises(SpecError):
        parse_spec(src.replace("loop: 1", "loop: 5"))


def test_omega_defaults_and_overrides():
    spec = parse_spec(
        "check: omega\n"
        "corpus: geo\n"
        "invariant_n: 1 + [c = 1] * (4 - 3 * (1/2)^n)\n"
        "domain: c in {0, 1}\n"
    )
    assert spec.direction == "lower"
    assert spec.n_max == 50
    assert spec.probe == 60
    assert spec.tol == Fraction(1, 10**12)
    spec = parse_spec(
        "check: omega\n"
        "corpus: geo\n"
        "invariant_n: 1 + [c = 1] * (4 - 3 * (1/2)^n)\n"
        "direction: both\n"
        "domain: c in {0, 1}\n"
        "nmax: 12\n"
        "probe: 99\n"
        "tol: 0.001\n"
        "big: 500\n"
    )
    assert spec.direction == "both"
    assert spec.n_max == 12
    assert spec.probe == 99
    assert spec.tol == Fraction(1, 1000)
    assert spec.big == 500


def test_error_cases():
    with pytest.raises(SpecError):
        parse_spec("corpus: geo\ninvariant: 1\ndomain: c in {0, 1}\n")  # no check
    with pytest.raises(SpecError):
        parse_spec(GOOD + "check: upper\n")  # duplicate
    with pytest.raises(SpecError):
        parse_spec(GOOD.replace("corpus: geo", "corpus: geo\nprogram: skip"))
    with pytest.raises(SpecError):
        parse_spec(GOOD.replace("invariant:", "invarant:"))  # unknown key
    with pytest.raises(SpecError):
        parse_spec(GOOD.replace("corpus: geo", "corpus: nosuch"))
    with pytest.raises(SpecError):
        parse_spec(
            "check: omega\ncorpus: geo\ninvariant_n: 1\n"
            "direction: sideways\ndomain: c in {0, 1}\n"
        )
    with pytest.raises(SpecError):
        parse_spec("check: upper\ncorpus: geo\ninvariant: 1\n")  # no domain
    with pytest.raises(SpecError):
        parse_spec(GOOD.replace("1 + [c = 1] * 6", "1 + + 2"))


def test_parse_domain_forms():
    dom = parse_domain("c in {0, 1}; x in 2 .. 4")
    assert len(dom) == 6
    assert State({"c": 0, "x": 2}) in list(dom)
    with pytest.raises(SpecError):
        parse_domain("c in {}")
    with pytest.raises(SpecError):
        parse_domain("c in {0}; c in {1}")
    with pytest.raises(SpecError):
        parse_domain("c in 5 .. 2")
    with pytest.raises(SpecError):
        parse_domain("just words")


def test_error_lines_are_reported():
    with pytest.raises(SpecError) as exc:
        parse_spec("check: upper\ncorpus: geo\nbogus: 1\n")
    assert exc.value.line == 3
