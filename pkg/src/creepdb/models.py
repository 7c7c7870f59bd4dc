"""Constitutive-model catalog and numeric engine.

A model couples a symbolic equation (used for unit/homogeneity checks)
with an executable form: either a closed-form strain expression or a
first-order ODE system integrated by fixed-step RK4.  Parameter fitting
is damped Gauss-Newton (Levenberg-Marquardt) with analytic Jacobians
where the model supports them (symbolic derivatives for closed forms,
forward sensitivity equations for ODE systems) and central finite
differences otherwise.

Shipped catalog: Norton power law, Norton-Bailey time hardening, theta
projection, logarithmic creep, and a driven Duffing oscillator whose
coordinate maps to deformation through a linear scale/offset pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import expr as ex
from . import kernels
from .errors import (
    DegenerateObservations,
    DimensionError,
    NumericalOverflow,
    PreconditionError,
    SingularJacobian,
    UnboundSymbol,
)
from .formula import Equation, binding, parse_equation

GAS_CONSTANT_J_PER_MOL_K = 8.314462618

KIND_CLOSED = "closed_form"
KIND_ODE = "ode"

ODE_MIN_STEPS = 2000


@dataclass(frozen=True)
class ConstitutiveModel:
    name: str
    equation: Equation
    kind: str
    parameters: tuple[str, ...]
    conditions: tuple[str, ...]
    param_units: dict[str, str]
    time_symbol: str = "t"
    strain_expr: ex.Expr | None = None
    state: tuple[str, ...] = ()
    rhs: tuple[ex.Expr, ...] = ()
    observable: ex.Expr | None = None
    initial_conditions: tuple = ()  # float or parameter-name entries
    default_bounds: dict[str, tuple[float | None, float | None]] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in (KIND_CLOSED, KIND_ODE):
            raise ValueError(f"bad model kind {self.kind!r}")
        if self.kind == KIND_CLOSED and self.strain_expr is None:
            raise ValueError("closed-form model needs a strain expression")
        if self.kind == KIND_ODE:
            if not self.state or len(self.rhs) != len(self.state):
                raise ValueError("ODE model needs one right-hand side per state symbol")
            allowed = set(self.state) | set(self.parameters) | set(self.conditions)
            allowed |= {self.time_symbol} | self._constant_symbols()
            for r in self.rhs:
                extra = ex.free_symbols(r) - allowed
                if extra:
                    raise ValueError(f"ODE right-hand side references unknown {sorted(extra)}")

    def _constant_symbols(self) -> set[str]:
        return {
            b.symbol
            for b in self.equation.bindings
            if b.value is not None and b.symbol not in self.parameters
        }

    def constant_values(self) -> dict[str, float]:
        out = {}
        for b in self.equation.bindings:
            if b.value is not None and b.symbol not in self.parameters:
                out[b.symbol] = b.standardized_value()
        return out


def _resolve_values(model: ConstitutiveModel, params: dict, conditions: dict) -> dict[str, float]:
    values = dict(model.constant_values())
    values.update({k: float(v) for k, v in conditions.items()})
    values.update({k: float(v) for k, v in params.items()})
    for p in model.parameters:
        if p not in values:
            raise UnboundSymbol(p)
    for c in model.conditions:
        if c not in values:
            raise UnboundSymbol(c)
    return values


def _check_times(times) -> np.ndarray:
    t = np.asarray(times, dtype=np.float64)
    if t.ndim != 1 or t.size == 0:
        raise PreconditionError("times must be a non-empty 1-d sequence")
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise PreconditionError("times must be strictly increasing")
    return t


def _ode_grid(times: np.ndarray) -> tuple[float, float, int]:
    t_start = min(0.0, float(times[0]))
    t_end = float(times[-1])
    span = t_end - t_start
    span_req = float(times[-1] - times[0])
    if span <= 0.0:
        return t_start, t_end, 0
    if span_req > 0.0:
        n_steps = max(ODE_MIN_STEPS, int(math.ceil(span / span_req * ODE_MIN_STEPS)))
    else:
        n_steps = ODE_MIN_STEPS
    return t_start, t_end, n_steps


def _initial_state(model: ConstitutiveModel, values: dict[str, float]) -> np.ndarray:
    y0 = []
    for entry in model.initial_conditions or tuple(0.0 for _ in model.state):
        if isinstance(entry, str):
            if entry not in values:
                raise UnboundSymbol(entry)
            y0.append(values[entry])
        else:
            y0.append(float(entry))
    return np.asarray(y0, dtype=np.float64)


def _integrate(model, rhs_exprs, state_names, values, times, impl):
    """RK4 trajectory of an ODE system at internal nodes."""
    const_names = sorted(
        set().union(*(ex.free_symbols(r) for r in rhs_exprs))
        - set(state_names)
        - {model.time_symbol}
    )
    var_order = [model.time_symbol, *state_names, *const_names]
    progs = [ex.compile_program(r, var_order) for r in rhs_exprs]
    const_slots = [values[c] for c in const_names]
    t_start, t_end, n_steps = _ode_grid(times)
    y0 = _initial_state(model, values)[: len(state_names)]
    if n_steps == 0:
        nodes = np.asarray([t_start])
        traj = y0[None, :].copy()
    else:
        nodes, traj = kernels.rk4(progs, y0, const_slots, t_start, t_end, n_steps, impl=impl)
    return nodes, traj


def _observable_series(model, values, nodes, traj, extra_state=None, impl=None):
    obs = model.observable if model.observable is not None else ex.Sym(model.state[0])
    names = list(ex.free_symbols(obs))
    table = {}
    for name in names:
        if name in model.state:
            table[name] = traj[:, model.state.index(name)]
        elif extra_state and name in extra_state:
            table[name] = extra_state[name]
        elif name == model.time_symbol:
            table[name] = nodes
        else:
            if name not in values:
                raise UnboundSymbol(name)
            table[name] = values[name]
    prog = ex.compile_program(obs, names)
    return kernels.eval_over(prog, table, len(nodes), impl=impl)


def evaluate(model: ConstitutiveModel, params: dict, conditions: dict, times, *, impl=None) -> np.ndarray:
    """Strain (or deformation observable) at the requested times.

    All values are expected in canonical units.  Closed forms are
    evaluated directly; ODE systems are integrated with fixed-step RK4
    (step <= requested span / 2000) and sampled by linear interpolation.
    """
    t = _check_times(times)
    values = _resolve_values(model, params, conditions)

    if model.kind == KIND_CLOSED:
        names = sorted(ex.free_symbols(model.strain_expr))
        table = {}
        for name in names:
            if name == model.time_symbol:
                table[name] = t
            elif name in values:
                table[name] = values[name]
            else:
                raise UnboundSymbol(name)
        prog = ex.compile_program(model.strain_expr, names)
        out = kernels.eval_over(prog, table, t.size, impl=impl)
    else:
        nodes, traj = _integrate(model, model.rhs, model.state, values, t, impl)
        obs_nodes = _observable_series(model, values, nodes, traj, impl=impl)
        out = np.interp(t, nodes, obs_nodes)

    if not np.all(np.isfinite(out)):
        raise NumericalOverflow(f"model {model.name} produced non-finite values")
    return out


# ---------------------------------------------------------------------------
# goodness of fit
# ---------------------------------------------------------------------------


def r_squared(observed, predicted) -> float:
    """Coefficient of determination, 1 - SS_res/SS_tot (<= 1, may be < 0)."""
    obs = np.asarray(observed, dtype=np.float64)
    pred = np.asarray(predicted, dtype=np.float64)
    if obs.shape != pred.shape or obs.ndim != 1:
        raise PreconditionError("observed and predicted must be 1-d and equal length")
    if obs.size < 3:
        raise PreconditionError("need at least 3 observations")
    ss_tot = float(np.sum((obs - obs.mean()) ** 2))
    if ss_tot == 0.0:
        raise DegenerateObservations("observations have zero variance")
    ss_res = float(np.sum((obs - pred) ** 2))
    return 1.0 - ss_res / ss_tot


# ---------------------------------------------------------------------------
# Jacobians
# ---------------------------------------------------------------------------


def _closed_form_jacobian(model, free, values, t, impl):
    cols = []
    for p in free:
        d = ex.differentiate(model.strain_expr, p)
        names = sorted(ex.free_symbols(d)) or [model.time_symbol]
        table = {n: (t if n == model.time_symbol else values[n]) for n in names}
        prog = ex.compile_program(d, names)
        cols.append(kernels.eval_over(prog, table, t.size, impl=impl))
    return np.column_stack(cols)


def _ode_jacobian(model, free, values, t, impl):
    """Forward sensitivity equations integrated alongside the state."""
    state = list(model.state)
    k = len(state)
    sens = [[f"_s_{i}_{j}" for j in range(len(free))] for i in range(k)]
    dfdx = [[ex.differentiate(model.rhs[i], state[m]) for m in range(k)] for i in range(k)]
    dfdp = [[ex.differentiate(model.rhs[i], p) for p in free] for i in range(k)]

    aug_state = state + [sens[i][j] for i in range(k) for j in range(len(free))]
    aug_rhs = list(model.rhs)
    for i in range(k):
        for j in range(len(free)):
            acc: ex.Expr = dfdp[i][j]
            for m in range(k):
                term = ex.Mul(dfdx[i][m], ex.Sym(sens[m][j]))
                acc = term if acc == ex.Const(0.0) else ex.Add(acc, term)
            aug_rhs.append(acc)

    ics = list(model.initial_conditions or [0.0] * k)
    sens_ic = []
    for i in range(k):
        for j, p in enumerate(free):
            sens_ic.append(1.0 if ics[i] == p else 0.0)

    base_y0 = _initial_state(model, values)

    class _Aug:
        time_symbol = model.time_symbol
        state = tuple(aug_state)
        initial_conditions = tuple(list(base_y0) + sens_ic)

    nodes, traj = _integrate(_Aug, aug_rhs, aug_state, values, t, impl)

    obs = model.observable if model.observable is not None else ex.Sym(state[0])
    cols = []
    for j, p in enumerate(free):
        dobs: ex.Expr = ex.differentiate(obs, p)
        for i in range(k):
            term = ex.Mul(ex.differentiate(obs, state[i]), ex.Sym(sens[i][j]))
            dobs = term if dobs == ex.Const(0.0) else ex.Add(dobs, term)
        names = list(ex.free_symbols(dobs)) or [model.time_symbol]
        table = {}
        for name in names:
            if name in aug_state:
                table[name] = traj[:, aug_state.index(name)]
            elif name == model.time_symbol:
                table[name] = nodes
            else:
                table[name] = values[name]
        prog = ex.compile_program(dobs, names)
        col_nodes = kernels.eval_over(prog, table, len(nodes), impl=impl)
        cols.append(np.interp(t, nodes, col_nodes))
    return np.column_stack(cols)


def param_jacobian(model, params, conditions, times, free=None, *, mode="auto", impl=None):
    """d(prediction)/d(parameter) matrix, analytic where supported."""
    t = _check_times(times)
    free = list(free if free is not None else model.parameters)
    if mode not in ("auto", "analytic", "fd"):
        raise ValueError(f"bad jacobian mode {mode!r}")
    if mode in ("auto", "analytic"):
        values = _resolve_values(model, params, conditions)
        if model.kind == KIND_CLOSED:
            return _closed_form_jacobian(model, free, values, t, impl)
        return _ode_jacobian(model, free, values, t, impl)
    # central finite differences; step ~ eps^(1/3) balances truncation/roundoff
    cols = []
    for p in free:
        base = float(params[p])
        h = 1e-5 * max(abs(base), 1.0)
        hi = dict(params)
        lo = dict(params)
        hi[p] = base + h
        lo[p] = base - h
        f_hi = evaluate(model, hi, conditions, t, impl=impl)
        f_lo = evaluate(model, lo, conditions, t, impl=impl)
        cols.append((f_hi - f_lo) / (2.0 * h))
    return np.column_stack(cols)


# ---------------------------------------------------------------------------
# Levenberg-Marquardt fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    values: dict[str, float]
    units: dict[str, str]
    ss_res: float
    converged: bool
    iterations: int
    descent: tuple[float, ...]  # accepted SS_res sequence, monotone non-increasing

    MAX_ITERATIONS = 200


def fit_parameters(
    model: ConstitutiveModel,
    times,
    observed,
    conditions: dict,
    init: dict,
    fixed: dict | None = None,
    *,
    max_iterations: int = 200,
    jac_mode: str = "auto",
    impl=None,
) -> FitResult:
    """Damped Gauss-Newton least squares on the free parameters.

    Convergence: relative SS_res change < 1e-9 or step norm < 1e-12.
    A run that exhausts iterations or damping returns converged=False
    rather than raising; a Jacobian with no usable columns raises
    SingularJacobian.
    """
    fixed = dict(fixed or {})
    free = [p for p in model.parameters if p in init]
    if not free:
        raise PreconditionError("init must name at least one free parameter")
    missing = [p for p in model.parameters if p not in init and p not in fixed]
    if missing:
        raise PreconditionError(f"parameters neither initialized nor fixed: {missing}")
    t = _check_times(times)
    y = np.asarray(observed, dtype=np.float64)
    if y.shape != t.shape:
        raise PreconditionError("observed must match times in length")
    if t.size < len(free) + 1:
        raise PreconditionError(
            f"need at least {len(free) + 1} points to fit {len(free)} parameters"
        )

    def full_params(theta):
        p = dict(fixed)
        p.update({name: float(v) for name, v in zip(free, theta)})
        return p

    def sum_sq(theta):
        try:
            pred = evaluate(model, full_params(theta), conditions, t, impl=impl)
        except NumericalOverflow:
            return math.inf, None
        r = pred - y
        return float(r @ r), r

    theta = np.asarray([float(init[p]) for p in free], dtype=np.float64)
    ss, resid = sum_sq(theta)
    if not math.isfinite(ss):
        raise PreconditionError("initial parameters produce non-finite predictions")

    lam = 1e-3
    descent = [ss]
    converged = False
    iterations = 0
    tiny = 1e-300

    for iterations in range(1, max_iterations + 1):
        try:
            J = param_jacobian(
                model, full_params(theta), conditions, t, free, mode=jac_mode, impl=impl
            )
        except NumericalOverflow as err:
            raise SingularJacobian(str(err))
        if not np.all(np.isfinite(J)):
            raise SingularJacobian("Jacobian has non-finite entries")
        A = J.T @ J
        g = J.T @ resid
        diag = np.diag(A).copy()
        if np.all(diag <= 0):
            raise SingularJacobian("Jacobian columns are all zero")
        diag = np.maximum(diag, 1e-30)

        accepted = False
        for _ in range(60):
            M = A + lam * np.diag(diag)
            try:
                delta = np.linalg.solve(M, -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            ss_new, resid_new = sum_sq(theta + delta)
            if math.isfinite(ss_new) and ss_new <= ss:
                accepted = True
                break
            lam *= 10.0
            if lam > 1e14:
                break
        if not accepted:
            break

        step_norm = float(np.linalg.norm(delta))
        rel_drop = (ss - ss_new) / max(ss, tiny)
        theta = theta + delta
        ss, resid = ss_new, resid_new
        descent.append(ss)
        lam = max(lam / 3.0, 1e-14)
        if rel_drop < 1e-9 or step_norm < 1e-12:
            converged = True
            break

    values = {name: float(v) for name, v in zip(free, theta)}
    units = {name: model.param_units.get(name, "1") for name in free}
    return FitResult(values, units, ss, converged, iterations, tuple(descent))


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------


def _exp_tag(x: float) -> str:
    f = Fraction(x).limit_denominator(6)
    if abs(float(f) - x) > 1e-9:
        raise DimensionError(
            f"exponent {x} is not representable as a small rational; "
            "cannot form a compensating unit"
        )
    return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


def norton_prefactor_unit(n: float) -> str:
    return f"MPa^{_exp_tag(-n)}*s^-1"


def bailey_prefactor_unit(n: float, m: float) -> str:
    return f"MPa^{_exp_tag(-n)}*s^{_exp_tag(-m)}"


def make_norton(n_value: float = 5.0) -> ConstitutiveModel:
    bindings = (
        binding("eps", "strain", "1"),
        binding("t", "time", "s"),
        binding("sigma", "stress", "MPa"),
        binding("T", "temperature", "K"),
        binding("A", "parameter", norton_prefactor_unit(n_value)),
        binding("n", "parameter", "1", value=n_value),
        binding("Q", "activation_energy", "J/mol"),
        binding("R", "gas_constant", "J/(mol*K)", value=GAS_CONSTANT_J_PER_MOL_K),
    )
    eq = parse_equation("d(eps)/d(t) = A*sigma^n*exp(-Q/(R*T))", bindings)
    return ConstitutiveModel(
        name="norton",
        equation=eq,
        kind=KIND_ODE,
        parameters=("A", "n", "Q"),
        conditions=("sigma", "T"),
        param_units={"A": norton_prefactor_unit(n_value), "n": "1", "Q": "MJ/mol"},
        state=("eps",),
        rhs=(ex.parse_expression("A*sigma^n*exp(-Q/(R*T))"),),
        observable=ex.Sym("eps"),
        initial_conditions=(0.0,),
        default_bounds={"A": (0.0, None), "n": (0.0, 12.0), "Q": (0.0, None)},
    )


def make_norton_bailey(n_value: float = 4.0, m_value: float = 0.4) -> ConstitutiveModel:
    a_unit = bailey_prefactor_unit(n_value, m_value)
    bindings = (
        binding("eps", "strain", "1"),
        binding("t", "time", "s"),
        binding("sigma", "stress", "MPa"),
        binding("A", "parameter", a_unit),
        binding("n", "parameter", "1", value=n_value),
        binding("m", "parameter", "1", value=m_value),
    )
    eq = parse_equation("eps = A*sigma^n*t^m", bindings)
    return ConstitutiveModel(
        name="norton_bailey",
        equation=eq,
        kind=KIND_CLOSED,
        parameters=("A", "n", "m"),
        conditions=("sigma",),
        param_units={"A": a_unit, "n": "1", "m": "1"},
        strain_expr=ex.parse_expression("A*sigma^n*t^m"),
        default_bounds={"A": (0.0, None), "n": (0.0, 12.0), "m": (0.0, 1.0)},
    )


def make_theta_projection() -> ConstitutiveModel:
    bindings = (
        binding("eps", "strain", "1"),
        binding("t", "time", "s"),
        binding("th1", "parameter", "1"),
        binding("th2", "parameter", "1/s"),
        binding("th3", "parameter", "1"),
        binding("th4", "parameter", "1/s"),
    )
    eq = parse_equation("eps = th1*(1 - exp(-th2*t)) + th3*(exp(th4*t) - 1)", bindings)
    return ConstitutiveModel(
        name="theta_projection",
        equation=eq,
        kind=KIND_CLOSED,
        parameters=("th1", "th2", "th3", "th4"),
        conditions=(),
        param_units={"th1": "1", "th2": "1/s", "th3": "1", "th4": "1/s"},
        strain_expr=ex.parse_expression("th1*(1 - exp(-th2*t)) + th3*(exp(th4*t) - 1)"),
        default_bounds={p: (0.0, None) for p in ("th1", "th2", "th3", "th4")},
    )


def make_logarithmic() -> ConstitutiveModel:
    bindings = (
        binding("eps", "strain", "1"),
        binding("t", "time", "s"),
        binding("a", "parameter", "1"),
        binding("b", "parameter", "1/s"),
    )
    eq = parse_equation("eps = a*ln(1 + b*t)", bindings)
    return ConstitutiveModel(
        name="logarithmic",
        equation=eq,
        kind=KIND_CLOSED,
        parameters=("a", "b"),
        conditions=(),
        param_units={"a": "1", "b": "1/s"},
        strain_expr=ex.parse_expression("a*ln(1 + b*t)"),
        default_bounds={"a": (0.0, None), "b": (0.0, None)},
    )


def make_duffing() -> ConstitutiveModel:
    bindings = (
        binding("x", "strain", "1"),  # deformation coordinate; observable = scale*x + offset
        binding("t", "time", "s"),
        binding("delta", "parameter", "1/s"),
        binding("alpha", "parameter", "1/s^2"),
        binding("beta", "parameter", "1/s^2"),
        binding("gamma", "parameter", "1/s^2"),
        binding("omega", "parameter", "rad/s"),
    )
    eq = parse_equation(
        "d2(x)/d(t)2 + delta*d(x)/d(t) + alpha*x + beta*x^3 = gamma*cos(omega*t)", bindings
    )
    return ConstitutiveModel(
        name="duffing",
        equation=eq,
        kind=KIND_ODE,
        parameters=("delta", "alpha", "beta", "gamma", "omega", "scale", "offset", "x0", "v0"),
        conditions=(),
        param_units={
            "delta": "1/s",
            "alpha": "1/s^2",
            "beta": "1/s^2",
            "gamma": "1/s^2",
            "omega": "rad/s",
            "scale": "1",
            "offset": "1",
            "x0": "1",
            "v0": "1/s",
        },
        state=("x", "v"),
        rhs=(
            ex.parse_expression("v"),
            ex.parse_expression("gamma*cos(omega*t) - delta*v - alpha*x - beta*x^3"),
        ),
        observable=ex.parse_expression("scale*x + offset"),
        initial_conditions=("x0", "v0"),
        default_bounds={},
    )


CATALOG_VERSION = 1

_BUILDERS = {
    "norton": make_norton,
    "norton_bailey": make_norton_bailey,
    "theta_projection": make_theta_projection,
    "logarithmic": make_logarithmic,
    "duffing": make_duffing,
}


def catalog() -> dict[str, ConstitutiveModel]:
    return {name: build() for name, build in _BUILDERS.items()}


def get_model(name: str, **kwargs) -> ConstitutiveModel:
    if name not in _BUILDERS:
        raise KeyError(f"unknown model {name!r}")
    return _BUILDERS[name](**kwargs)


def catalog_registry() -> dict:
    """Versioned registry of the shipped forms (the published catalog file)."""
    models = {}
    for name, model in catalog().items():
        models[name] = {
            "kind": model.kind,
            "equation": model.equation.render(),
            "parameters": [
                {
                    "name": p,
                    "unit": model.param_units.get(p, "1"),
                    "bounds": list(model.default_bounds.get(p, (None, None))),
                }
                for p in model.parameters
            ],
            "conditions": list(model.conditions),
            "state": list(model.state),
            "observable": ex.render(model.observable) if model.observable is not None else None,
        }
    return {"version": CATALOG_VERSION, "models": models}
