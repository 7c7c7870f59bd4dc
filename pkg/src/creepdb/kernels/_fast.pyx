# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled numeric kernels: program evaluation, RK4 integration,
column-wise mask centroids.  Contract mirrors `_pure`."""

from libc.math cimport exp, log, log10, sin, cos, sinh, cosh, pow, NAN

import numpy as np


cdef inline double _eval(const int[::1] ops, const int[::1] args,
                         Py_ssize_t lo, Py_ssize_t hi,
                         const double[::1] consts, const double[::1] slots,
                         double* stack) noexcept nogil:
    cdef Py_ssize_t i
    cdef int op, sp = -1
    for i in range(lo, hi):
        op = ops[i]
        if op == 0:
            sp += 1
            stack[sp] = consts[args[i]]
        elif op == 1:
            sp += 1
            stack[sp] = slots[args[i]]
        elif op == 2:
            sp -= 1
            stack[sp] = stack[sp] + stack[sp + 1]
        elif op == 3:
            sp -= 1
            stack[sp] = stack[sp] - stack[sp + 1]
        elif op == 4:
            sp -= 1
            stack[sp] = stack[sp] * stack[sp + 1]
        elif op == 5:
            sp -= 1
            stack[sp] = stack[sp] / stack[sp + 1]
        elif op == 6:
            sp -= 1
            stack[sp] = pow(stack[sp], stack[sp + 1])
        elif op == 7:
            stack[sp] = -stack[sp]
        elif op == 8:
            stack[sp] = exp(stack[sp])
        elif op == 9:
            stack[sp] = log(stack[sp])
        elif op == 10:
            stack[sp] = log10(stack[sp])
        elif op == 11:
            stack[sp] = sin(stack[sp])
        elif op == 12:
            stack[sp] = cos(stack[sp])
        elif op == 13:
            stack[sp] = sinh(stack[sp])
        elif op == 14:
            stack[sp] = cosh(stack[sp])
    return stack[0]


def eval_scalar(ops, args, consts, stack_need, slots):
    cdef int[::1] ops_v = np.ascontiguousarray(ops, dtype=np.int32)
    cdef int[::1] args_v = np.ascontiguousarray(args, dtype=np.int32)
    cdef double[::1] consts_v = np.ascontiguousarray(consts, dtype=np.float64)
    cdef double[::1] slots_v = np.ascontiguousarray(slots, dtype=np.float64)
    cdef double[::1] stack = np.empty(max(stack_need, 1), dtype=np.float64)
    return _eval(ops_v, args_v, 0, ops_v.shape[0], consts_v, slots_v, &stack[0])


def eval_rows(ops, args, consts, stack_need, rows):
    """Evaluate one program over a (n, nvar) row matrix -> (n,) vector.

    Works column-at-a-time: each opcode sweeps the whole point grid once,
    so there are no per-point program decodes and no temporaries."""
    cdef int[::1] ops_v = np.ascontiguousarray(ops, dtype=np.int32)
    cdef int[::1] args_v = np.ascontiguousarray(args, dtype=np.int32)
    cdef double[::1] consts_v = np.ascontiguousarray(consts, dtype=np.float64)
    cdef double[:, ::1] rows_v = np.ascontiguousarray(rows, dtype=np.float64)
    cdef Py_ssize_t n = rows_v.shape[0], n_ops = ops_v.shape[0], i, j
    cdef int op, sp = -1
    stack_arr = np.empty((max(stack_need, 1), max(n, 1)), dtype=np.float64)
    cdef double[:, ::1] stack = stack_arr
    cdef double c
    with nogil:
        for i in range(n_ops):
            op = ops_v[i]
            if op == 0:
                sp += 1
                c = consts_v[args_v[i]]
                for j in range(n):
                    stack[sp, j] = c
            elif op == 1:
                sp += 1
                for j in range(n):
                    stack[sp, j] = rows_v[j, args_v[i]]
            elif op == 2:
                sp -= 1
                for j in range(n):
                    stack[sp, j] = stack[sp, j] + stack[sp + 1, j]
            elif op == 3:
                sp -= 1
                for j in range(n):
                    stack[sp, j] = stack[sp, j] - stack[sp + 1, j]
            elif op == 4:
                sp -= 1
                for j in range(n):
                    stack[sp, j] = stack[sp, j] * stack[sp + 1, j]
            elif op == 5:
                sp -= 1
                for j in range(n):
                    stack[sp, j] = stack[sp, j] / stack[sp + 1, j]
            elif op == 6:
                sp -= 1
                for j in range(n):
                    stack[sp, j] = pow(stack[sp, j], stack[sp + 1, j])
            elif op == 7:
                for j in range(n):
                    stack[sp, j] = -stack[sp, j]
            elif op == 8:
                for j in range(n):
                    stack[sp, j] = exp(stack[sp, j])
            elif op == 9:
                for j in range(n):
                    stack[sp, j] = log(stack[sp, j])
            elif op == 10:
                for j in range(n):
                    stack[sp, j] = log10(stack[sp, j])
            elif op == 11:
                for j in range(n):
                    stack[sp, j] = sin(stack[sp, j])
            elif op == 12:
                for j in range(n):
                    stack[sp, j] = cos(stack[sp, j])
            elif op == 13:
                for j in range(n):
                    stack[sp, j] = sinh(stack[sp, j])
            elif op == 14:
                for j in range(n):
                    stack[sp, j] = cosh(stack[sp, j])
    return stack_arr[0].copy()


def rk4_integrate(all_ops, all_args, starts, consts, stack_need, nstate, slots0, t0, t1, n_steps):
    cdef int[::1] ops_v = np.ascontiguousarray(all_ops, dtype=np.int32)
    cdef int[::1] args_v = np.ascontiguousarray(all_args, dtype=np.int32)
    cdef int[::1] starts_v = np.ascontiguousarray(starts, dtype=np.int32)
    cdef double[::1] consts_v = np.ascontiguousarray(consts, dtype=np.float64)
    cdef double[::1] slots = np.array(slots0, dtype=np.float64)
    cdef int ns = nstate
    cdef int steps = n_steps
    cdef double t_lo = t0, t_hi = t1

    traj_arr = np.empty((steps + 1, ns), dtype=np.float64)
    cdef double[:, ::1] traj = traj_arr
    cdef double[::1] stack = np.empty(max(stack_need, 1), dtype=np.float64)
    cdef double[::1] y = np.empty(ns, dtype=np.float64)
    cdef double[::1] k1 = np.empty(ns, dtype=np.float64)
    cdef double[::1] k2 = np.empty(ns, dtype=np.float64)
    cdef double[::1] k3 = np.empty(ns, dtype=np.float64)
    cdef double[::1] k4 = np.empty(ns, dtype=np.float64)
    cdef double h, t
    cdef Py_ssize_t step, i

    with nogil:
        for i in range(ns):
            y[i] = slots[1 + i]
            traj[0, i] = y[i]
        h = (t_hi - t_lo) / steps if steps > 0 else 0.0
        for step in range(steps):
            t = t_lo + step * h
            slots[0] = t
            for i in range(ns):
                slots[1 + i] = y[i]
            for i in range(ns):
                k1[i] = _eval(ops_v, args_v, starts_v[i], starts_v[i + 1], consts_v, slots, &stack[0])
            slots[0] = t + h / 2.0
            for i in range(ns):
                slots[1 + i] = y[i] + h / 2.0 * k1[i]
            for i in range(ns):
                k2[i] = _eval(ops_v, args_v, starts_v[i], starts_v[i + 1], consts_v, slots, &stack[0])
            for i in range(ns):
                slots[1 + i] = y[i] + h / 2.0 * k2[i]
            for i in range(ns):
                k3[i] = _eval(ops_v, args_v, starts_v[i], starts_v[i + 1], consts_v, slots, &stack[0])
            slots[0] = t + h
            for i in range(ns):
                slots[1 + i] = y[i] + h * k3[i]
            for i in range(ns):
                k4[i] = _eval(ops_v, args_v, starts_v[i], starts_v[i + 1], consts_v, slots, &stack[0])
            for i in range(ns):
                y[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                traj[step + 1, i] = y[i]
    return traj_arr


def column_centroids(mask, col0, col1, row0, row1):
    cdef const unsigned char[:, :] m = mask
    cdef Py_ssize_t c0 = col0, c1 = col1, r0 = row0, r1 = row1
    cdef Py_ssize_t ncols = c1 - c0
    cent_arr = np.empty(ncols, dtype=np.float64)
    count_arr = np.zeros(ncols, dtype=np.int64)
    cdef double[::1] cent = cent_arr
    cdef long long[::1] cnt = count_arr
    cdef Py_ssize_t c, r
    cdef double acc
    cdef long long n
    with nogil:
        for c in range(c0, c1):
            acc = 0.0
            n = 0
            for r in range(r0, r1):
                if m[r, c]:
                    acc += r
                    n += 1
            if n > 0:
                cent[c - c0] = acc / n
            else:
                cent[c - c0] = NAN
            cnt[c - c0] = n
    return cent_arr, count_arr
