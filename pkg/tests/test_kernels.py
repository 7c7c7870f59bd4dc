import numpy as np
import pytest

from creepdb import expr as ex
from creepdb import kernels


def _prog(text, names):
    return ex.compile_program(ex.parse_expression(text), names)


def test_eval_scalar_basic(kernel_impl):
    p = _prog("a*t^2 + exp(-b*t)", ["a", "b", "t"])
    got = kernels.eval_scalar(p, [2.0, 0.5, 3.0], impl=kernel_impl)
    assert got == pytest.approx(2 * 9 + np.exp(-1.5))


def test_eval_rows_matches_scalar(kernel_impl, rng):
    p = _prog("a*sin(t) + b/cosh(t) - t^3", ["a", "b", "t"])
    ts = rng.uniform(0.1, 2.0, 64)
    vec = kernels.eval_over(p, {"a": 1.2, "b": 0.7, "t": ts}, ts.size, impl=kernel_impl)
    for i in (0, 17, 63):
        assert vec[i] == pytest.approx(
            kernels.eval_scalar(p, [1.2, 0.7, ts[i]], impl=kernel_impl), rel=1e-14
        )


def test_backends_agree_elementwise(rng):
    try:
        fast = kernels.get_backend("compiled")
    except ImportError:
        pytest.skip("compiled backend unavailable")
    pure = kernels.get_backend("pure-python")
    p = _prog("a*t^m*exp(-b/t) + ln(t) + log10(t)", ["a", "b", "m", "t"])
    ts = rng.uniform(0.5, 50.0, 200)
    v1 = kernels.eval_over(p, {"a": 2.0, "b": 1.3, "m": 0.4, "t": ts}, ts.size, impl=fast)
    v2 = kernels.eval_over(p, {"a": 2.0, "b": 1.3, "m": 0.4, "t": ts}, ts.size, impl=pure)
    np.testing.assert_allclose(v1, v2, rtol=1e-13)


def test_rk4_exponential_decay(kernel_impl):
    # dy/dt = -k*y has the exact solution y0*exp(-k*t)
    p = ex.compile_program(ex.parse_expression("-k*y"), ["t", "y", "k"])
    nodes, traj = kernels.rk4([p], [2.0], [0.7], 0.0, 3.0, 3000, impl=kernel_impl)
    assert traj[-1, 0] == pytest.approx(2.0 * np.exp(-0.7 * 3.0), rel=1e-10)


def test_rk4_harmonic_and_order(kernel_impl):
    progs = [
        ex.compile_program(ex.parse_expression("v"), ["t", "x", "v"]),
        ex.compile_program(ex.parse_expression("-x"), ["t", "x", "v"]),
    ]

    def final_error(n):
        _, traj = kernels.rk4(progs, [1.0, 0.0], [], 0.0, 2 * np.pi, n, impl=kernel_impl)
        return abs(traj[-1, 0] - 1.0)

    e200, e400 = final_error(200), final_error(400)
    assert e200 / e400 >= 8.0  # 4th-order convergence


def test_rk4_zero_steps(kernel_impl):
    p = ex.compile_program(ex.parse_expression("y"), ["t", "y"])
    nodes, traj = kernels.rk4([p], [1.5], [], 0.0, 0.0, 0, impl=kernel_impl)
    assert traj.shape == (1, 1) and traj[0, 0] == 1.5


def test_pack_programs_rebases_constants():
    p1 = _prog("2.5*t", ["t"])
    p2 = _prog("t + 0.5", ["t"])
    ops, args, starts, consts, need = kernels.pack_programs([p1, p2])
    assert list(starts) == [0, len(p1.ops), len(p1.ops) + len(p2.ops)]
    assert consts[args[0]] == 2.5
    const_idx = [a for o, a in zip(ops[starts[1] :], args[starts[1] :]) if o == 0]
    assert consts[const_idx[0]] == 0.5


def test_column_centroids(kernel_impl):
    mask = np.zeros((20, 10), dtype=np.uint8)
    mask[4, 2] = 1
    mask[6, 2] = 1  # centroid 5.0
    mask[10, 5] = 1
    cent, counts = kernels.column_centroids(mask, 0, 10, 0, 20, impl=kernel_impl)
    assert cent[2] == pytest.approx(5.0)
    assert counts[2] == 2
    assert cent[5] == pytest.approx(10.0)
    assert np.isnan(cent[0])
    assert counts[0] == 0


def test_column_centroids_respects_window(kernel_impl):
    mask = np.ones((10, 6), dtype=np.uint8)
    cent, counts = kernels.column_centroids(mask, 2, 4, 3, 7, impl=kernel_impl)
    assert cent.shape == (2,)
    assert counts.tolist() == [4, 4]
    assert cent[0] == pytest.approx(4.5)  # rows 3..6


def test_overflow_yields_non_finite_not_crash(kernel_impl):
    p = _prog("exp(t)", ["t"])
    out = kernels.eval_over(p, {"t": np.array([1000.0])}, 1, impl=kernel_impl)
    assert np.isinf(out[0])
    p2 = _prog("1/t", ["t"])
    out2 = kernels.eval_over(p2, {"t": np.array([0.0])}, 1, impl=kernel_impl)
    assert not np.isfinite(out2[0]) or np.isinf(out2[0])
