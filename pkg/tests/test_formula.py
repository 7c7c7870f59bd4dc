import pytest

from creepdb import models
from creepdb.errors import CreepDbError, ParseError, UnboundSymbol
from creepdb.formula import (
    Equation,
    SymbolBinding,
    binding,
    check_homogeneity,
    parse_equation,
)

# same-dimension substitutes used to probe unit invariance
_ALTERNATES = {
    "MPa": "ksi",
    "s": "h",
    "K": "degC",
    "1": "%",
    "J/mol": "kJ/mol",
    "J/(mol*K)": "cal/(mol*K)",
    "1/s": "1/min",
    "1/s^2": "1/min^2",
    "rad/s": "1/h",
}


def test_parse_equation():
    eq = parse_equation(
        "eps = sigma/E",
        (
            binding("eps", "strain", "1"),
            binding("sigma", "stress", "MPa"),
            binding("E", "parameter", "MPa"),
        ),
    )
    assert check_homogeneity(eq).passed


def test_parse_equation_requires_single_equals():
    with pytest.raises(ParseError):
        parse_equation("a = b = c", (binding("a", "other", "1"), binding("b", "other", "1"), binding("c", "other", "1")))
    with pytest.raises(ParseError):
        parse_equation("a + b", (binding("a", "other", "1"), binding("b", "other", "1")))


def test_equation_rejects_duplicate_bindings():
    with pytest.raises(CreepDbError):
        Equation(
            lhs=parse_equation("a = a", (binding("a", "other", "1"),)).lhs,
            rhs=parse_equation("a = a", (binding("a", "other", "1"),)).rhs,
            bindings=(binding("a", "other", "1"), binding("a", "other", "s")),
        )


def test_equation_rejects_unbound_symbols():
    with pytest.raises(UnboundSymbol):
        parse_equation("eps = k*t", (binding("eps", "strain", "1"), binding("t", "time", "s")))


def _rebound(eq: Equation) -> Equation:
    new = tuple(
        SymbolBinding(b.symbol, b.role, _ALTERNATES.get(b.unit, b.unit), b.value)
        for b in eq.bindings
    )
    return Equation(eq.lhs, eq.rhs, new)


def test_homogeneity_verdict_invariant_under_unit_substitution():
    # swapping every binding for a same-dimension unit never flips a verdict
    for name, model in models.catalog().items():
        original = check_homogeneity(model.equation).passed
        substituted = check_homogeneity(_rebound(model.equation)).passed
        assert substituted == original, name


def test_failing_verdict_also_invariant():
    bad = parse_equation(
        "eps = sigma*t",
        (
            binding("eps", "strain", "1"),
            binding("sigma", "stress", "MPa"),
            binding("t", "time", "s"),
        ),
    )
    assert not check_homogeneity(bad).passed
    assert not check_homogeneity(_rebound(bad)).passed


def test_report_is_truthy_on_pass():
    eq = models.make_logarithmic().equation
    report = check_homogeneity(eq)
    assert report
    assert report.lhs_dim == report.rhs_dim


def test_binding_invariants():
    with pytest.raises(CreepDbError):
        binding("", "strain", "1")
    with pytest.raises(CreepDbError):
        binding("x", "not_a_role", "1")
    b = binding("Q", "activation_energy", "kJ/mol", value=300)
    assert b.standardized_value() == pytest.approx(0.3)
