"""Numeric kernels with a compiled core and a pure-Python fallback.

The hot loops (expression-program evaluation, fixed-step RK4 integration,
column-wise mask centroids) are implemented twice with identical
semantics: a Cython extension `_fast` and a NumPy/stdlib module `_pure`.
The extension is preferred when importable; set CREEPDB_PURE_KERNELS=1 to
force the fallback (used by the benchmark and the twin-backend tests).
"""

from __future__ import annotations

import os

import numpy as np

from ..expr import Program

if os.environ.get("CREEPDB_PURE_KERNELS", "") not in ("", "0"):
    from . import _pure as _impl

    BACKEND = "pure-python"
else:
    try:
        from . import _fast as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        from . import _pure as _impl  # type: ignore[no-redef]

        BACKEND = "pure-python"


def get_backend(name: str | None = None):
    """Resolve a kernel backend module by name (None = active default)."""
    if name is None:
        return _impl
    if name == "pure-python":
        from . import _pure

        return _pure
    if name == "compiled":
        from . import _fast

        return _fast
    raise ValueError(f"unknown kernel backend {name!r}")


def eval_scalar(prog: Program, slots, impl=None) -> float:
    impl = impl or _impl
    return float(
        impl.eval_scalar(
            prog.ops, prog.args, prog.consts, prog.stack_need, np.asarray(slots, dtype=np.float64)
        )
    )


def eval_over(prog: Program, values: dict, n: int, impl=None) -> np.ndarray:
    """Evaluate a program where each variable is a scalar or length-n array."""
    impl = impl or _impl
    rows = np.empty((n, len(prog.var_order)), dtype=np.float64)
    for j, name in enumerate(prog.var_order):
        rows[:, j] = values[name]
    return np.asarray(impl.eval_rows(prog.ops, prog.args, prog.consts, prog.stack_need, rows))


def pack_programs(progs: list[Program]):
    """Concatenate programs into flat arrays with start offsets.

    Constant indices are rebased into the shared constant pool.
    """
    ops, args, consts, starts = [], [], [], [0]
    for p in progs:
        base = len(consts)
        for op, a in zip(p.ops, p.args):
            ops.append(int(op))
            args.append(int(a) + base if op == 0 else int(a))
        consts.extend(float(c) for c in p.consts)
        starts.append(len(ops))
    stack_need = max((p.stack_need for p in progs), default=1)
    return (
        np.asarray(ops, dtype=np.int32),
        np.asarray(args, dtype=np.int32),
        np.asarray(starts, dtype=np.int32),
        np.asarray(consts, dtype=np.float64),
        stack_need,
    )


def rk4(progs: list[Program], y0, const_slots, t0: float, t1: float, n_steps: int, impl=None):
    """Integrate dy/dt = f(t, y; consts) with fixed-step RK4.

    Every program must share the slot layout [t, state..., constants...].
    Returns (nodes, trajectory) where trajectory is (n_steps+1, nstate).
    """
    impl = impl or _impl
    nstate = len(y0)
    ops, args, starts, consts, stack_need = pack_programs(progs)
    slots0 = np.concatenate(
        [[t0], np.asarray(y0, dtype=np.float64), np.asarray(const_slots, dtype=np.float64)]
    )
    traj = np.asarray(
        impl.rk4_integrate(ops, args, starts, consts, stack_need, nstate, slots0, t0, t1, n_steps)
    )
    nodes = np.linspace(t0, t1, n_steps + 1)
    return nodes, traj


def column_centroids(mask: np.ndarray, col0: int, col1: int, row0: int, row1: int, impl=None):
    impl = impl or _impl
    mask = np.ascontiguousarray(mask, dtype=np.uint8)
    cent, counts = impl.column_centroids(mask, col0, col1, row0, row1)
    return np.asarray(cent), np.asarray(counts)
