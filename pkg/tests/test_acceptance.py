"""Acceptance suite: one test per exit criterion, each printing a
PASS/FAIL line with the measured figure so a run can be audited from the
log alone."""

import time

import numpy as np
import pytest

from creepdb import corpus, digitizer as dg, fixtures, models
from creepdb import expr as ex
from creepdb import kernels
from creepdb.backends import ScriptedBackend
from creepdb.formula import Equation, SymbolBinding, check_homogeneity, parse_equation
from creepdb.pipeline import PipelineConfig, run_pipeline
from creepdb.screening import ConfusionCounts, accuracy, f1, precision, recall
from creepdb.store import RecordFilter, Store

PALETTE = [(220, 30, 30), (30, 90, 220), (30, 160, 60), (205, 120, 20)]


def _report(name, ok, detail=""):
    print(f"ACCEPTANCE {'PASS' if ok else 'FAIL'}: {name}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


# -- 1. metrics oracle ---------------------------------------------------------


def test_metrics_oracle():
    started = time.time()
    rng = np.random.default_rng(1234)
    matrices = [tuple(int(v) for v in rng.integers(1, 50, 4)) for _ in range(25)]
    matrices.append((8, 1, 1, 10))  # tp, fp, fn, tn
    worst = 0.0
    for tp, fp, fn, tn in matrices:
        c = ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)
        p = tp / (tp + fp)
        r = tp / (tp + fn)
        ref = {
            "precision": p,
            "recall": r,
            "f1": 2 * p * r / (p + r),
            "accuracy": (tp + tn) / (tp + fp + tn + fn),
        }
        got = {"precision": precision(c), "recall": recall(c), "f1": f1(c), "accuracy": accuracy(c)}
        for key in ref:
            worst = max(worst, abs(ref[key] - got[key]))
    elapsed = time.time() - started
    _report(
        "metrics oracle (26 confusion matrices, tol 1e-12)",
        worst <= 1e-12 and elapsed < 1.0,
        f"worst dev {worst:.2e}, {elapsed:.3f}s",
    )


# -- 2. digitizer round trip -----------------------------------------------------


def _monotone_curve(rng, x0, x1, y_lo, y_hi, n=260):
    xs = np.linspace(x0, x1, n)
    u = (xs - x0) / (x1 - x0)
    bend = rng.uniform(0.4, 3.0)
    mix = rng.uniform(0.2, 0.8)
    shape = mix * (1 - np.exp(-bend * 3 * u)) + (1 - mix) * u ** rng.uniform(0.6, 1.6)
    ys = y_lo + (y_hi - y_lo) * shape / shape[-1]
    return np.column_stack([xs, ys])


def _make_plot(seed):
    rng = np.random.default_rng(9000 + seed)
    n_series = 1 + seed % 4
    y_log = seed % 2 == 1
    x_log = seed % 4 == 2
    gridlines = seed % 3 != 0
    x_range = (1.0, 1000.0) if x_log else (0.0, 1000.0)
    series = []
    if y_log:
        y_range = (1e-4, 1.0)
        decades = np.linspace(-3.7, -0.3, n_series + 1)
        for i in range(n_series):
            lo, hi = 10.0 ** decades[i], 10.0 ** decades[i + 1]
            pts = _monotone_curve(rng, x_range[0], x_range[1], lo, hi)
            series.append(dg.SeriesSpec(PALETTE[i], pts, 3, f"s{i}"))
    else:
        y_range = (0.0, 2.0)
        bands = np.linspace(0.15, 1.9, n_series + 1)
        for i in range(n_series):
            pts = _monotone_curve(rng, x_range[0], x_range[1], bands[i] + 0.02, bands[i + 1])
            series.append(dg.SeriesSpec(PALETTE[i], pts, 3, f"s{i}"))
    spec = dg.SyntheticPlotSpec(
        x_range=x_range,
        y_range=y_range,
        series=tuple(series),
        x_scale="log10" if x_log else "linear",
        y_scale="log10" if y_log else "linear",
        gridlines=gridlines,
        noise_px=1.0,
    )
    return dg.render_synthetic_plot(spec, rng)


def test_digitizer_round_trip_corpus():
    started = time.time()
    total = 0
    good = 0
    errors = []
    for seed in range(52):
        rp = _make_plot(seed)
        cal = rp.calibration()
        for s, truth in zip(rp.spec.series, rp.truth):
            total += 1
            try:
                trace = dg.extract_series(rp.image, cal, [s.color])[0]
            except Exception:
                continue
            xs, ys = trace.points[:, 0], trace.points[:, 1]
            if rp.spec.y_scale == "log10":
                y_true = np.exp(np.interp(xs, truth[:, 0], np.log(truth[:, 1])))
            else:
                y_true = np.interp(xs, truth[:, 0], truth[:, 1])
            mare = float(np.mean(np.abs(ys - y_true) / np.abs(y_true)))
            errors.append(mare)
            if mare < 0.02:
                good += 1
    elapsed = time.time() - started
    frac = good / total
    _report(
        "digitizer round trip (52 plots, 1px jitter, MARE < 2%)",
        frac >= 0.9 and elapsed < 60.0,
        f"{good}/{total} series ok ({frac:.1%}), median MARE "
        f"{np.median(errors):.4%}, {elapsed:.1f}s",
    )


# -- 3. selective extraction scenario -------------------------------------------


def test_selective_two_series_extraction():
    rng = np.random.default_rng(31)
    high = _monotone_curve(rng, 0.0, 900.0, 0.5, 1.9)
    low = _monotone_curve(rng, 0.0, 900.0, 0.1, 0.9)
    sA = dg.SeriesSpec(PALETTE[0], high, 3, "52.7 MPa")
    sB = dg.SeriesSpec(PALETTE[1], low, 3, "31.6 MPa")
    spec = dg.SyntheticPlotSpec(
        x_range=(0, 1000), y_range=(0, 2), series=(sA, sB), gridlines=True, noise_px=1.0
    )
    rp = dg.render_synthetic_plot(spec, rng)
    cal = rp.calibration()
    traces = dg.extract_series(rp.image, cal, [sA.color, sB.color])
    target = dg.select_target_series(traces, ["52.7 MPa", "31.6 MPa"], "sigma = 31.6 MPa")
    other_mask = dg.color_mask(rp.image, sA.color)
    rr = np.round(target.pixel_points[:, 1]).astype(int)
    cc = np.round(target.pixel_points[:, 0]).astype(int)
    stray = int(other_mask[rr, cc].sum())
    xs = target.points[:, 0]
    y_true = np.interp(xs, low[:, 0], low[:, 1])
    mare = float(np.mean(np.abs(target.points[:, 1] - y_true) / np.abs(y_true)))
    _report(
        "selective extraction of the 31.6 MPa series",
        target.series_key == sB.color and stray == 0 and mare < 0.02,
        f"stray pixels from 52.7 MPa mask: {stray}, MARE {mare:.4%}",
    )


# -- 4. cross-modal consistency ---------------------------------------------------


def test_cross_modal_duffing_round_trip():
    duffing = models.make_duffing()
    generating = dict(delta=0.3, alpha=-1.0, beta=1.0, gamma=0.5, omega=1.2)
    fixed = dict(scale=1.0, offset=0.0, x0=1.0, v0=0.0)
    params = {**generating, **fixed}
    tt = np.linspace(0.0, 60.0, 1200)
    obs = models.evaluate(duffing, params, {}, tt[1:])
    pts = np.column_stack([tt, np.concatenate([[1.0], obs])])
    series = dg.SeriesSpec(PALETTE[1], pts, 3, "deformation")
    spec = dg.SyntheticPlotSpec(
        x_range=(0, 61), y_range=(-1.7, 1.7), series=(series,), gridlines=True, noise_px=1.0
    )
    rp = dg.render_synthetic_plot(spec, np.random.default_rng(7))
    trace = dg.extract_series(rp.image, rp.calibration(), [series.color])[0]
    keep = trace.points[:, 0] > 1e-9
    times = trace.points[keep, 0]
    strains = trace.points[keep, 1]

    pred = models.evaluate(duffing, params, {}, times)
    r2 = models.r_squared(strains, pred)
    corrupted = {}
    for name in generating:
        bad = dict(params)
        bad[name] = bad[name] * 1.25
        corrupted[name] = models.r_squared(strains, models.evaluate(duffing, bad, {}, times))
    ok = r2 >= 0.999 and all(v < 0.9 for v in corrupted.values())
    worst = max(corrupted.values())
    _report(
        "cross-modal consistency (integrate-render-digitize-reconstruct)",
        ok,
        f"r2 {r2:.5f}; corrupted max r2 {worst:.3f} "
        + " ".join(f"{k}={v:.2f}" for k, v in corrupted.items()),
    )


# -- 5. homogeneity gate ----------------------------------------------------------


def _swap_unit(model, symbol, new_unit):
    eq = model.equation
    new_bindings = tuple(
        SymbolBinding(b.symbol, b.role, new_unit if b.symbol == symbol else b.unit, b.value)
        for b in eq.bindings
    )
    return Equation(eq.lhs, eq.rhs, new_bindings)


def _swap_equation(model, text):
    return parse_equation(text, model.equation.bindings)


MUTATIONS = [
    ("norton", "unit sigma->s", lambda m: _swap_unit(m, "sigma", "s")),
    ("norton", "unit Q->J", lambda m: _swap_unit(m, "Q", "J")),
    ("norton", "op * -> +", lambda m: _swap_equation(m, "d(eps)/d(t) = A*sigma^n + exp(-Q/(R*T))")),
    ("norton", "unit eps->MPa", lambda m: _swap_unit(m, "eps", "MPa")),
    ("norton_bailey", "unit t->K", lambda m: _swap_unit(m, "t", "K")),
    ("norton_bailey", "unit A drops time part", lambda m: _swap_unit(m, "A", "MPa^-4")),
    ("norton_bailey", "op * -> /", lambda m: _swap_equation(m, "eps = A*sigma^n/t^m")),
    ("norton_bailey", "unit sigma->1", lambda m: _swap_unit(m, "sigma", "1")),
    ("theta_projection", "unit th2->s", lambda m: _swap_unit(m, "th2", "s")),
    ("theta_projection", "unit th4->1", lambda m: _swap_unit(m, "th4", "1")),
    (
        "theta_projection",
        "op exp arg corrupted",
        lambda m: _swap_equation(m, "eps = th1*(1 - exp(-th2*t)) + th3*(exp(th4*t) - t)"),
    ),
    ("theta_projection", "unit eps->s", lambda m: _swap_unit(m, "eps", "s")),
    ("logarithmic", "unit b->s", lambda m: _swap_unit(m, "b", "s")),
    ("logarithmic", "unit a->MPa", lambda m: _swap_unit(m, "a", "MPa")),
    ("logarithmic", "op * -> /", lambda m: _swap_equation(m, "eps = a*ln(1 + b/t)")),
    ("logarithmic", "unit t->1", lambda m: _swap_unit(m, "t", "1")),
    ("duffing", "unit delta->1/s^2", lambda m: _swap_unit(m, "delta", "1/s^2")),
    ("duffing", "unit omega->1", lambda m: _swap_unit(m, "omega", "1")),
    (
        "duffing",
        "op cos arg * -> +",
        lambda m: _swap_equation(
            m,
            "d2(x)/d(t)2 + delta*(d(x)/d(t)) + alpha*x + beta*x^3 = gamma*cos(omega + t)",
        ),
    ),
    ("duffing", "unit x->MPa", lambda m: _swap_unit(m, "x", "MPa")),
]


def test_homogeneity_gate():
    catalog = models.catalog()
    clean = {name: check_homogeneity(m.equation) for name, m in catalog.items()}
    all_clean = all(rep.passed for rep in clean.values())

    assert len(MUTATIONS) == 20
    failed_located = 0
    problems = []
    for name, label, mutate in MUTATIONS:
        report = check_homogeneity(mutate(catalog[name]))
        located = bool(report.failures) and any(
            ("in `" in f) or ("sides differ" in f) for f in report.failures
        )
        if not report.passed and located:
            failed_located += 1
        else:
            problems.append(f"{name}:{label}")
    _report(
        "homogeneity gate (5 models pass, 20 mutations fail located)",
        all_clean and failed_located == 20,
        f"clean pass {sum(r.passed for r in clean.values())}/5, "
        f"mutations caught {failed_located}/20"
        + (f", missed: {problems}" if problems else ""),
    )


# -- 6. end-to-end fixture run ------------------------------------------------------


def test_end_to_end_fixture_run(tmp_path):
    started = time.time()
    paths = fixtures.write_corpus(tmp_path / "fx")
    index = corpus.ingest_manifest(paths["manifest"])
    exports = []
    report = None
    for i in range(2):
        backend = ScriptedBackend.from_file(paths["replies"])
        store = Store(tmp_path / f"run{i}.db")
        report = run_pipeline(index, PipelineConfig(), backend, store)
        exports.append(store.export_csv())
        if i == 0:
            dois_ok = all(
                store.get_paper(rec.doi).doi == rec.doi for rec in store.query()
            )
            flagged_or_rejected = (
                report.validated_flagged + report.validated_rejected
            )
        store.close()
    elapsed = time.time() - started
    counts_ok = (
        report.screened_pass == 5
        and report.stored == 4
        and flagged_or_rejected == 1
    )
    _report(
        "end-to-end fixture run",
        counts_ok and dois_ok and exports[0] == exports[1] and elapsed < 30.0,
        f"screened_pass={report.screened_pass} stored={report.stored} "
        f"flagged_or_rejected={flagged_or_rejected} byte_identical={exports[0] == exports[1]} "
        f"{elapsed:.1f}s",
    )


# -- 7. conjunctive gate truth table -------------------------------------------------


def test_conjunctive_gate_truth_table():
    from creepdb.screening import ScreeningDecision

    table = {}
    for has_data in (False, True):
        for has_equation in (False, True):
            d = ScreeningDecision("b", has_data, has_equation, "r")
            table[(has_data, has_equation)] = d.passed
    ok = all(table[(a, b)] == (a and b) for a in (False, True) for b in (False, True))
    _report("conjunctive screening gate truth table", ok, str(table))


# -- 8. RK4 order + LM recovery ------------------------------------------------------


def test_rk4_order_and_lm_recovery():
    progs = [
        ex.compile_program(ex.parse_expression("v"), ["t", "x", "v"]),
        ex.compile_program(ex.parse_expression("-x"), ["t", "x", "v"]),
    ]

    def err(n):
        _, traj = kernels.rk4(progs, [1.0, 0.0], [], 0.0, 2 * np.pi, n)
        return abs(traj[-1, 0] - 1.0)

    ratio = err(200) / err(400)

    rng = np.random.default_rng(42)
    model = models.make_norton_bailey()
    A_true, m_true = 1e-4, 0.4
    ts = np.linspace(1.0, 1000.0, 50)
    y = A_true * ts**m_true * (1 + 0.005 * rng.standard_normal(50))
    fit = models.fit_parameters(
        model, ts, y, {"sigma": 1.0}, {"A": 1e-3, "m": 0.3}, fixed={"n": 0.0}
    )
    a_err = abs(fit.values["A"] - A_true) / A_true
    m_err = abs(fit.values["m"] - m_true) / m_true
    ok = ratio >= 8.0 and fit.converged and a_err < 0.05 and m_err < 0.02
    _report(
        "RK4 order + LM recovery",
        ok,
        f"halving ratio {ratio:.1f}x; A err {a_err:.2%}, m err {m_err:.2%}",
    )
