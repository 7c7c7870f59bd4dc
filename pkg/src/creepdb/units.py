"""Physical units: dimension vectors, a unit-tag table, and standardization.

Dimensions are rational-exponent vectors over five base quantities
(length, mass, time, temperature, amount).  Every recognized unit tag maps
to a dimension plus a conversion into the *canonical system*:

    time          -> s
    temperature   -> K          (offset units like degC accepted standalone)
    stress        -> MPa
    strain        -> dimensionless fraction (percent divided out)

The canonical system is the SI-coherent system rescaled so that MPa is the
coherent pressure unit (mass base scaled by 1e6).  Standardizing *all*
quantities into this single system keeps mixed formulas such as
exp(-Q/(R*T)) numerically consistent: Q and R pick up the same 1e-6 mass
factor and the ratio is unchanged.

Compound tags are parsed with `*`, `/`, `^` and parentheses, e.g.
"J/(mol*K)" or "MPa^-5*s^-1".  Exponents may be integers, decimals, or
fractions `a/b`; resulting dimension exponents must have denominator <= 6.
Offset units (degC, degF) are only legal as a bare tag.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import DimensionError, UnknownUnit

# base order: length, mass, time, temperature, amount
_NBASE = 5
_BASE_NAMES = ("length", "mass", "time", "temperature", "amount")

MAX_DENOMINATOR = 6


@dataclass(frozen=True)
class Dimension:
    exponents: tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.exponents) != _NBASE:
            raise DimensionError(f"dimension needs {_NBASE} exponents")
        for e in self.exponents:
            if e.denominator > MAX_DENOMINATOR:
                raise DimensionError(
                    f"exponent {e} has denominator > {MAX_DENOMINATOR}"
                )

    @staticmethod
    def base(index: int) -> "Dimension":
        return Dimension(tuple(Fraction(1 if i == index else 0) for i in range(_NBASE)))

    @staticmethod
    def dimensionless() -> "Dimension":
        return Dimension(tuple(Fraction(0) for _ in range(_NBASE)))

    @property
    def is_dimensionless(self) -> bool:
        return all(e == 0 for e in self.exponents)

    def __mul__(self, other: "Dimension") -> "Dimension":
        return Dimension(tuple(a + b for a, b in zip(self.exponents, other.exponents)))

    def __truediv__(self, other: "Dimension") -> "Dimension":
        return Dimension(tuple(a - b for a, b in zip(self.exponents, other.exponents)))

    def __pow__(self, k) -> "Dimension":
        k = Fraction(k).limit_denominator(10**6)
        return Dimension(tuple(e * k for e in self.exponents))

    def __str__(self) -> str:
        if self.is_dimensionless:
            return "1"
        parts = []
        for name, e in zip(_BASE_NAMES, self.exponents):
            if e != 0:
                parts.append(name if e == 1 else f"{name}^{e}")
        return "*".join(parts)


DIMENSIONLESS = Dimension.dimensionless()
LENGTH = Dimension.base(0)
MASS = Dimension.base(1)
TIME = Dimension.base(2)
TEMPERATURE = Dimension.base(3)
AMOUNT = Dimension.base(4)

STRESS = MASS / (LENGTH * TIME**2)
FORCE = MASS * LENGTH / TIME**2
ENERGY = FORCE * LENGTH
MOLAR_ENERGY = ENERGY / AMOUNT
STRAIN_RATE = DIMENSIONLESS / TIME


@dataclass(frozen=True)
class UnitDef:
    tag: str
    dimension: Dimension
    si_factor: float  # value_in_SI = value * si_factor + si_offset
    si_offset: float = 0.0


def _u(tag, dim, factor, offset=0.0):
    return UnitDef(tag, dim, factor, offset)


_ATOMS: dict[str, UnitDef] = {}


def _register(defn: UnitDef, *aliases: str):
    for name in (defn.tag, *aliases):
        _ATOMS[name] = defn


_register(_u("1", DIMENSIONLESS, 1.0), "")
_register(_u("strain", DIMENSIONLESS, 1.0))
_register(_u("%", DIMENSIONLESS, 0.01), "percent", "%strain")
_register(_u("rad", DIMENSIONLESS, 1.0))

_register(_u("s", TIME, 1.0), "sec", "second", "seconds")
_register(_u("ms", TIME, 1e-3))
_register(_u("min", TIME, 60.0))
_register(_u("h", TIME, 3600.0), "hr", "hour", "hours")
_register(_u("day", TIME, 86400.0), "days")

_register(_u("m", LENGTH, 1.0))
_register(_u("mm", LENGTH, 1e-3))
_register(_u("cm", LENGTH, 1e-2))
_register(_u("um", LENGTH, 1e-6))
_register(_u("in", LENGTH, 0.0254))

_register(_u("kg", MASS, 1.0))
_register(_u("g", MASS, 1e-3))

_register(_u("K", TEMPERATURE, 1.0), "kelvin")
_register(_u("degC", TEMPERATURE, 1.0, 273.15), "C", "°C", "celsius")
_register(_u("degF", TEMPERATURE, 5.0 / 9.0, 459.67 * 5.0 / 9.0), "F", "°F")

_register(_u("N", FORCE, 1.0))
_register(_u("kN", FORCE, 1e3))
_register(_u("lbf", FORCE, 4.4482216152605))

_register(_u("Pa", STRESS, 1.0))
_register(_u("kPa", STRESS, 1e3))
_register(_u("MPa", STRESS, 1e6))
_register(_u("GPa", STRESS, 1e9))
_register(_u("bar", STRESS, 1e5))
_register(_u("psi", STRESS, 6894.757293168361))
_register(_u("ksi", STRESS, 6.894757293168361e6))

_register(_u("J", ENERGY, 1.0))
_register(_u("kJ", ENERGY, 1e3))
_register(_u("cal", ENERGY, 4.184))
_register(_u("kcal", ENERGY, 4184.0))

_register(_u("mol", AMOUNT, 1.0))
_register(_u("kmol", AMOUNT, 1e3))

# Mass base scale of the canonical system relative to SI (kg): chosen so
# the coherent pressure unit is MPa rather than Pa.
_MASS_SCALE = 1e6


@dataclass(frozen=True)
class Unit:
    """A resolved (possibly compound) unit expression."""

    tag: str
    dimension: Dimension
    si_factor: float
    si_offset: float = 0.0

    @property
    def has_offset(self) -> bool:
        return self.si_offset != 0.0


class _UnitParser:
    """Grammar: unit := factor (('*'|'/') factor)*; factor := atom ('^' num)?."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, msg):
        raise UnknownUnit(f"cannot parse unit {self.text!r}: {msg}")

    def peek(self):
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def parse(self) -> Unit:
        u = self.parse_term()
        if self.pos != len(self.text):
            self.error(f"unexpected {self.text[self.pos:]!r}")
        return u

    def parse_term(self) -> Unit:
        u = self.parse_factor()
        while self.peek() in ("*", "/", "·"):
            op = self.peek()
            self.pos += 1
            rhs = self.parse_factor()
            if u.has_offset or rhs.has_offset:
                self.error("offset units cannot be combined")
            if op == "/":
                u = Unit(self.text, u.dimension / rhs.dimension, u.si_factor / rhs.si_factor)
            else:
                u = Unit(self.text, u.dimension * rhs.dimension, u.si_factor * rhs.si_factor)
        return u

    def parse_factor(self) -> Unit:
        u = self.parse_atom()
        if self.peek() == "^":
            self.pos += 1
            k = self.parse_number()
            if u.has_offset and k != 1:
                self.error("offset units cannot be raised to a power")
            return Unit(self.text, u.dimension**k, u.si_factor ** float(k))
        return u

    def parse_atom(self) -> Unit:
        if self.peek() == "(":
            self.pos += 1
            u = self.parse_term()
            if self.peek() != ")":
                self.error("missing ')'")
            self.pos += 1
            return u
        start = self.pos
        while self.peek() and (self.peek().isalnum() or self.peek() in "%°_"):
            self.pos += 1
        name = self.text[start : self.pos]
        if not name:
            self.error("expected unit tag")
        if name not in _ATOMS:
            raise UnknownUnit(f"unknown unit tag {name!r}")
        a = _ATOMS[name]
        return Unit(name, a.dimension, a.si_factor, a.si_offset)

    def parse_number(self) -> Fraction:
        start = self.pos
        if self.peek() in "+-":
            self.pos += 1
        while self.peek() and (self.peek().isdigit() or self.peek() in "./"):
            self.pos += 1
        token = self.text[start : self.pos]
        try:
            if "/" in token:
                num, den = token.split("/")
                return Fraction(int(num), int(den))
            return Fraction(token)
        except (ValueError, ZeroDivisionError):
            self.error(f"bad exponent {token!r}")


def parse_unit(tag: str) -> Unit:
    """Resolve a unit tag (atomic or compound) to dimension + conversion."""
    tag = tag.strip()
    if tag in _ATOMS:
        a = _ATOMS[tag]
        return Unit(tag, a.dimension, a.si_factor, a.si_offset)
    return _UnitParser(tag).parse()


def canonical_scale(dim: Dimension) -> float:
    """Size of the canonical-system unit for `dim`, measured in SI units."""
    return _MASS_SCALE ** float(dim.exponents[1])


def standardize(value: float, tag: str) -> float:
    """Convert a value to the canonical system (K / MPa / s / fraction)."""
    u = parse_unit(tag)
    si = value * u.si_factor + u.si_offset
    return si / canonical_scale(u.dimension)


def canonical_tag(dim: Dimension) -> str:
    """Human-readable tag of the canonical unit for a dimension."""
    named = {
        str(DIMENSIONLESS): "1",
        str(TIME): "s",
        str(TEMPERATURE): "K",
        str(STRESS): "MPa",
        str(MOLAR_ENERGY): "MJ/mol",
        str(STRAIN_RATE): "1/s",
    }
    return named.get(str(dim), f"<canonical {dim}>")


def unit_table() -> list[dict]:
    """The published vocabulary: one row per atomic tag."""
    rows = []
    seen = set()
    for name, a in sorted(_ATOMS.items()):
        if a.tag in seen or name != a.tag:
            continue
        seen.add(a.tag)
        rows.append(
            {
                "tag": a.tag,
                "dimension": [str(e) for e in a.dimension.exponents],
                "si_factor": a.si_factor,
                "si_offset": a.si_offset,
            }
        )
    return rows


UNIT_TABLE_VERSION = 1
