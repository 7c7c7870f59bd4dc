"""Pure-Python/NumPy implementations of the numeric kernels.

Mirrors the compiled extension `_fast` operation for operation; selected
as a fallback when the extension is unavailable (see package __init__).
"""

from __future__ import annotations

import math

import numpy as np

_OP_CONST = 0
_OP_VAR = 1
_OP_ADD = 2
_OP_SUB = 3
_OP_MUL = 4
_OP_DIV = 5
_OP_POW = 6
_OP_NEG = 7
_OP_EXP = 8
_OP_LN = 9
_OP_LOG10 = 10
_OP_SIN = 11
_OP_COS = 12
_OP_SINH = 13
_OP_COSH = 14


def _safe_pow(a, b):
    try:
        return math.pow(a, b)
    except (OverflowError, ValueError):
        if a == 0.0 and b < 0.0:
            return math.inf
        return math.nan


def _safe(fn, x):
    try:
        return fn(x)
    except (OverflowError, ValueError):
        if fn is math.exp:
            return math.inf if x > 0 else 0.0
        return math.nan


def eval_scalar(ops, args, consts, stack_need, slots):
    """Evaluate one program at a single slot vector of floats."""
    stack = [0.0] * max(stack_need, 1)
    sp = -1
    for op, a in zip(ops, args):
        if op == _OP_CONST:
            sp += 1
            stack[sp] = consts[a]
        elif op == _OP_VAR:
            sp += 1
            stack[sp] = slots[a]
        elif op == _OP_ADD:
            sp -= 1
            stack[sp] = stack[sp] + stack[sp + 1]
        elif op == _OP_SUB:
            sp -= 1
            stack[sp] = stack[sp] - stack[sp + 1]
        elif op == _OP_MUL:
            sp -= 1
            stack[sp] = stack[sp] * stack[sp + 1]
        elif op == _OP_DIV:
            sp -= 1
            denom = stack[sp + 1]
            if denom == 0.0:
                num = stack[sp]
                stack[sp] = math.nan if num == 0.0 else math.copysign(math.inf, num)
            else:
                stack[sp] = stack[sp] / denom
        elif op == _OP_POW:
            sp -= 1
            stack[sp] = _safe_pow(stack[sp], stack[sp + 1])
        elif op == _OP_NEG:
            stack[sp] = -stack[sp]
        elif op == _OP_EXP:
            stack[sp] = _safe(math.exp, stack[sp])
        elif op == _OP_LN:
            x = stack[sp]
            stack[sp] = math.log(x) if x > 0 else (-math.inf if x == 0 else math.nan)
        elif op == _OP_LOG10:
            x = stack[sp]
            stack[sp] = math.log10(x) if x > 0 else (-math.inf if x == 0 else math.nan)
        elif op == _OP_SIN:
            stack[sp] = math.sin(stack[sp])
        elif op == _OP_COS:
            stack[sp] = math.cos(stack[sp])
        elif op == _OP_SINH:
            stack[sp] = _safe(math.sinh, stack[sp])
        elif op == _OP_COSH:
            stack[sp] = _safe(math.cosh, stack[sp])
        else:
            raise ValueError(f"bad opcode {op}")
    return stack[0]


def eval_rows(ops, args, consts, stack_need, rows):
    """Evaluate one program over a (n, nvar) row matrix -> (n,) vector."""
    rows = np.asarray(rows, dtype=np.float64)
    n = rows.shape[0]
    stack = [None] * max(stack_need, 1)
    sp = -1
    with np.errstate(all="ignore"):
        for op, a in zip(ops, args):
            if op == _OP_CONST:
                sp += 1
                stack[sp] = np.full(n, consts[a])
            elif op == _OP_VAR:
                sp += 1
                stack[sp] = rows[:, a].copy()
            elif op == _OP_ADD:
                sp -= 1
                stack[sp] = stack[sp] + stack[sp + 1]
            elif op == _OP_SUB:
                sp -= 1
                stack[sp] = stack[sp] - stack[sp + 1]
            elif op == _OP_MUL:
                sp -= 1
                stack[sp] = stack[sp] * stack[sp + 1]
            elif op == _OP_DIV:
                sp -= 1
                stack[sp] = stack[sp] / stack[sp + 1]
            elif op == _OP_POW:
                sp -= 1
                stack[sp] = np.power(stack[sp], stack[sp + 1])
            elif op == _OP_NEG:
                stack[sp] = -stack[sp]
            elif op == _OP_EXP:
                stack[sp] = np.exp(stack[sp])
            elif op == _OP_LN:
                stack[sp] = np.log(stack[sp])
            elif op == _OP_LOG10:
                stack[sp] = np.log10(stack[sp])
            elif op == _OP_SIN:
                stack[sp] = np.sin(stack[sp])
            elif op == _OP_COS:
                stack[sp] = np.cos(stack[sp])
            elif op == _OP_SINH:
                stack[sp] = np.sinh(stack[sp])
            elif op == _OP_COSH:
                stack[sp] = np.cosh(stack[sp])
            else:
                raise ValueError(f"bad opcode {op}")
    return stack[0]


def rk4_integrate(all_ops, all_args, starts, consts, stack_need, nstate, slots0, t0, t1, n_steps):
    """Classic fixed-step RK4 over packed state-derivative programs.

    Slot layout: [t, state..., constants...].  Returns the trajectory as a
    (n_steps + 1, nstate) array (node 0 is the initial state).
    """
    ops = list(all_ops)
    args = list(all_args)
    starts = list(starts)
    consts = list(consts)
    slots = [float(v) for v in slots0]
    progs = [
        (ops[starts[i] : starts[i + 1]], args[starts[i] : starts[i + 1]])
        for i in range(nstate)
    ]

    traj = np.empty((n_steps + 1, nstate), dtype=np.float64)
    y = slots[1 : 1 + nstate]
    traj[0] = y
    h = (t1 - t0) / n_steps if n_steps > 0 else 0.0

    def deriv(t, state):
        slots[0] = t
        slots[1 : 1 + nstate] = state
        return [eval_scalar(p_ops, p_args, consts, stack_need, slots) for p_ops, p_args in progs]

    for step in range(n_steps):
        t = t0 + step * h
        k1 = deriv(t, y)
        k2 = deriv(t + h / 2.0, [y[i] + h / 2.0 * k1[i] for i in range(nstate)])
        k3 = deriv(t + h / 2.0, [y[i] + h / 2.0 * k2[i] for i in range(nstate)])
        k4 = deriv(t + h, [y[i] + h * k3[i] for i in range(nstate)])
        y = [
            y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            for i in range(nstate)
        ]
        traj[step + 1] = y
    return traj


def column_centroids(mask, col0, col1, row0, row1):
    """Per-column centroid row of set mask pixels inside a window.

    Returns (centroids, counts); centroid is NaN where a column is empty.
    """
    sub = np.asarray(mask[row0:row1, col0:col1], dtype=np.float64)
    counts = sub.sum(axis=0)
    rows = np.arange(row0, row1, dtype=np.float64)[:, None]
    sums = (sub * rows).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        centroids = np.where(counts > 0, sums / counts, np.nan)
    return centroids, counts.astype(np.int64)
