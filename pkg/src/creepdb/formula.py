"""Equations with unit-bound symbols and the dimensional-homogeneity check.

An extracted constitutive law is stored as lhs/rhs expression trees plus
one binding per symbol (physical role, unit tag, optional known numeric
value).  `check_homogeneity` verifies that both sides carry the same
dimension and that every sub-expression is dimensionally legal; verdicts
never depend on which unit system the bindings happen to use, only on
their dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import expr as ex
from .errors import CreepDbError, DimensionError, UnboundSymbol
from .units import Dimension, parse_unit, standardize

ROLES = (
    "strain",
    "strain_rate",
    "stress",
    "time",
    "temperature",
    "activation_energy",
    "gas_constant",
    "parameter",
    "other",
)


@dataclass(frozen=True)
class SymbolBinding:
    symbol: str
    role: str
    unit: str
    value: float | None = None
    dimension: Dimension = field(init=False)

    def __post_init__(self):
        if not self.symbol:
            raise CreepDbError("binding needs a symbol name")
        if self.role not in ROLES:
            raise CreepDbError(f"unknown role {self.role!r}")
        object.__setattr__(self, "dimension", parse_unit(self.unit).dimension)

    def standardized_value(self) -> float | None:
        return None if self.value is None else standardize(self.value, self.unit)


def binding(symbol: str, role: str, unit: str, value: float | None = None) -> SymbolBinding:
    return SymbolBinding(symbol, role, unit, value)


@dataclass(frozen=True)
class Equation:
    lhs: ex.Expr
    rhs: ex.Expr
    bindings: tuple[SymbolBinding, ...]

    def __post_init__(self):
        seen = set()
        for b in self.bindings:
            if b.symbol in seen:
                raise CreepDbError(f"symbol {b.symbol!r} bound twice")
            seen.add(b.symbol)
        unbound = (ex.free_symbols(self.lhs) | ex.free_symbols(self.rhs)) - seen
        if unbound:
            raise UnboundSymbol(sorted(unbound)[0])

    @property
    def binding_map(self) -> dict[str, SymbolBinding]:
        return {b.symbol: b for b in self.bindings}

    def render(self) -> str:
        return f"{ex.render(self.lhs)} = {ex.render(self.rhs)}"


def parse_equation(text: str, bindings: list[SymbolBinding] | tuple[SymbolBinding, ...]) -> Equation:
    """Parse `lhs = rhs` with exactly one equals sign."""
    parts = text.split("=")
    if len(parts) != 2:
        raise ex.ParseError("equation needs exactly one '='", text.find("=") if "=" in text else 0)
    lhs = ex.parse_expression(parts[0])
    rhs = ex.parse_expression(parts[1])
    return Equation(lhs, rhs, tuple(bindings))


@dataclass(frozen=True)
class HomogeneityReport:
    passed: bool
    lhs_dim: Dimension | None
    rhs_dim: Dimension | None
    failures: tuple[str, ...]

    def __bool__(self) -> bool:
        return self.passed


def check_homogeneity(eq: Equation) -> HomogeneityReport:
    """Pass iff dim(lhs) == dim(rhs) and no sub-expression is ill-formed."""
    bindings = eq.binding_map
    failures: list[str] = []
    lhs_dim = rhs_dim = None
    try:
        lhs_dim = ex.infer_dimension(eq.lhs, bindings)
    except (DimensionError, UnboundSymbol) as err:
        failures.append(f"lhs: {err}")
    try:
        rhs_dim = ex.infer_dimension(eq.rhs, bindings)
    except (DimensionError, UnboundSymbol) as err:
        failures.append(f"rhs: {err}")
    if lhs_dim is not None and rhs_dim is not None and lhs_dim != rhs_dim:
        failures.append(f"sides differ: lhs {lhs_dim} vs rhs {rhs_dim}")
    return HomogeneityReport(not failures, lhs_dim, rhs_dim, tuple(failures))
