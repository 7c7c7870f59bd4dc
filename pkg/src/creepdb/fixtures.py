"""Deterministic fixture corpus: six document bundles with known ground truth.

Five bundles are relevant (four carry self-consistent model/curve pairs,
one reports parameters inconsistent with its own figure) and one is an
unrelated tensile-testing paper.  The generator also writes the scripted
backend replies and the screening ground-truth file, so a full pipeline
run over this corpus is reproducible byte for byte.

Usage: python -m creepdb.fixtures OUTDIR
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import digitizer as dg
from . import models as models_mod
from .models import evaluate

RED = (220, 30, 30)
BLUE = (30, 90, 220)
GREEN = (30, 160, 60)
ORANGE = (205, 120, 20)

GAS_R = models_mod.GAS_CONSTANT_J_PER_MOL_K

# Norton fixture (d001): steel at 600 degC; A in MPa^-5/s, Q canonical MJ/mol
D1_PARAMS = {"A": 2.76e6, "n": 5.0, "Q": 0.3}
D1_SIGMA_TARGET = 31.6
D1_SIGMA_OTHER = 52.7

# theta projection fixture (d002)
D2_PARAMS = {"th1": 0.02, "th2": 5e-5, "th3": 0.004, "th4": 1.2e-5}

# logarithmic fixture (d003)
D3_PARAMS = {"a": 0.015, "b": 0.01}

# time-hardening fixture (d004): the text reports a wrong time exponent and
# a prefactor that only partly compensates, landing in the review band
D4_TRUE = {"A": 1e-6, "n": 2.0, "m": 0.4}
D4_CLAIMED = {"A": 3.58e-7, "n": 2.0, "m": 0.5}
D4_SIGMA = 80.0

# Duffing fixture (d005): oscillatory deformation of a metallic glass
D5_PARAMS = {
    "delta": 0.4,
    "alpha": 4.0,
    "beta": 5.0,
    "gamma": 2.0,
    "omega": 2.0,
    "scale": 0.05,
    "offset": 0.3,
    "x0": 0.0,
    "v0": 0.0,
}


@dataclass
class FixtureDoc:
    bundle_id: str
    doi: str
    title: str
    authors: list[str]
    year: int
    pages: list[str]
    caption: str = ""
    plot: dg.RenderedPlot | None = None
    screening_reply: dict | None = None
    extraction_reply: dict | None = None
    relevant: bool = True


def _anchors_json(anchors):
    return [{"pixel": p, "value": v} for p, v in anchors]


def _figure_payload(doc: FixtureDoc, series, target, x_unit, y_unit, monotonic=True):
    rp = doc.plot
    return {
        "figure_id": f"{doc.bundle_id}-fig1",
        "x_scale": rp.spec.x_scale,
        "y_scale": rp.spec.y_scale,
        "x_unit": x_unit,
        "y_unit": y_unit,
        "x_anchors": _anchors_json(rp.x_anchors),
        "y_anchors": _anchors_json(rp.y_anchors),
        "series": [{"color": list(color), "label": label} for color, label in series],
        "target": target,
        "monotonic": monotonic,
    }


def _doc_d001() -> FixtureDoc:
    norton = models_mod.make_norton(5.0)
    cond = {"sigma": D1_SIGMA_TARGET, "T": 873.15}
    t_target = np.linspace(1.0, 3600.0, 400)
    strain_target = evaluate(norton, D1_PARAMS, cond, t_target)
    rate_other = evaluate(norton, D1_PARAMS, {"sigma": D1_SIGMA_OTHER, "T": 873.15}, [1.0])[0]
    t_other_max = min(3600.0, 0.44 / rate_other)
    t_other = np.linspace(1.0, t_other_max, 300)
    strain_other = evaluate(norton, D1_PARAMS, {"sigma": D1_SIGMA_OTHER, "T": 873.15}, t_other)

    series_other = dg.SeriesSpec(RED, np.column_stack([t_other, 100 * strain_other]), 3, "52.7 MPa")
    series_target = dg.SeriesSpec(
        BLUE, np.column_stack([t_target, 100 * strain_target]), 3, "31.6 MPa"
    )
    spec = dg.SyntheticPlotSpec(
        x_range=(0.0, 3600.0),
        y_range=(0.0, 50.0),
        series=(series_other, series_target),
        gridlines=True,
        noise_px=0.6,
    )
    plot = dg.render_synthetic_plot(spec, np.random.default_rng(101))

    doc = FixtureDoc(
        bundle_id="d001",
        doi="10.5555/fx.2019.001",
        title="Creep deformation of X46Cr13 martensitic steel at elevated temperature",
        authors=["R. Weiss", "H. Tanaka"],
        year=2019,
        pages=[
            "Constant-load creep tests on X46Cr13 stainless steel were performed at "
            "600 C under stresses of 52.7 MPa and 31.6 MPa. Steady-state behaviour "
            "follows the power law d(eps)/d(t) = A*sigma^n*exp(-Q/(R*T)) with "
            "A = 2.76e6 MPa^-5 s^-1, n = 5 and an activation energy Q = 300 kJ/mol.\n"
            "Strain accumulation at the lower stress remained below 40 percent over "
            "one hour of testing.",
        ],
        caption="Fig. 1: creep curves of X46Cr13 at 600 C for 52.7 MPa and 31.6 MPa.",
        plot=plot,
    )
    doc.screening_reply = {
        "has_data": True,
        "has_equation": True,
        "rationale": "experimental creep curves and an explicit power law are reported",
    }
    doc.extraction_reply = {
        "material": "X46Cr13",
        "category": "steel_iron",
        "temperature": "600 C",
        "stress": "31.6 MPa",
        "model_name": "norton",
        "equation": "d(eps)/d(t) = A*sigma^n*exp(-Q/(R*T))",
        "bindings": [
            {"symbol": "eps", "role": "strain", "unit": "1"},
            {"symbol": "t", "role": "time", "unit": "s"},
            {"symbol": "sigma", "role": "stress", "unit": "MPa"},
            {"symbol": "T", "role": "temperature", "unit": "K"},
            {"symbol": "A", "role": "parameter", "unit": "MPa^-5*s^-1"},
            {"symbol": "n", "role": "parameter", "unit": "1", "value": 5},
            {"symbol": "Q", "role": "activation_energy", "unit": "J/mol"},
            {"symbol": "R", "role": "gas_constant", "unit": "J/(mol*K)", "value": GAS_R},
        ],
        "parameters": [
            {"name": "A", "value": D1_PARAMS["A"], "unit": "MPa^-5*s^-1"},
            {"name": "n", "value": 5, "unit": "1"},
            {"name": "Q", "value": 300, "unit": "kJ/mol"},
        ],
        "figure": _figure_payload(
            doc,
            [(RED, "52.7 MPa"), (BLUE, "31.6 MPa")],
            "31.6 MPa",
            x_unit="s",
            y_unit="%",
        ),
        "text_locations": ["p1:power-law sentence"],
    }
    return doc


def _doc_d002() -> FixtureDoc:
    theta = models_mod.make_theta_projection()
    t = np.linspace(0.0, 2e5, 400)
    strain = evaluate(theta, D2_PARAMS, {}, t[1:])
    pts = np.column_stack([np.concatenate([[0.0], t[1:]]) / 3600.0, np.concatenate([[0.0], strain])])
    series = dg.SeriesSpec(GREEN, pts, 3, "650 C")
    spec = dg.SyntheticPlotSpec(
        x_range=(0.0, 56.0), y_range=(0.0, 0.08), series=(series,), gridlines=True, noise_px=0.6
    )
    plot = dg.render_synthetic_plot(spec, np.random.default_rng(102))

    doc = FixtureDoc(
        bundle_id="d002",
        doi="10.5555/fx.2021.002",
        title="Theta-projection analysis of creep in a wrought nickel superalloy",
        authors=["M. Oduya", "L. Ferrand", "P. Novak"],
        year=2021,
        pages=[
            "Creep tests on the Ni-based superalloy Alloy 718 at 650 C and 300 MPa "
            "were fitted with the theta projection "
            "eps = th1*(1 - exp(-th2*t)) + th3*(exp(th4*t) - 1). "
            "The primary-stage constants are th1 = 0.02 and th2 = 5e-5 1/s, and the "
            "tertiary acceleration constant is th4 = 1.2e-5 1/s; the remaining "
            "amplitude was calibrated against the measured curve.",
        ],
        caption="Fig. 2: creep strain versus time (hours) for Alloy 718 at 650 C, 300 MPa.",
        plot=plot,
    )
    doc.screening_reply = {
        "has_data": True,
        "has_equation": True,
        "rationale": "creep curve plus theta-projection constitutive form",
    }
    doc.extraction_reply = {
        "material": "Alloy 718",
        "category": "nickel_alloy",
        "temperature": "650 C",
        "stress": "300 MPa",
        "model_name": "theta_projection",
        "equation": "eps = th1*(1 - exp(-th2*t)) + th3*(exp(th4*t) - 1)",
        "bindings": [
            {"symbol": "eps", "role": "strain", "unit": "1"},
            {"symbol": "t", "role": "time", "unit": "s"},
            {"symbol": "th1", "role": "parameter", "unit": "1"},
            {"symbol": "th2", "role": "parameter", "unit": "1/s"},
            {"symbol": "th3", "role": "parameter", "unit": "1"},
            {"symbol": "th4", "role": "parameter", "unit": "1/s"},
        ],
        "parameters": [
            {"name": "th1", "value": D2_PARAMS["th1"], "unit": "1"},
            {"name": "th2", "value": D2_PARAMS["th2"], "unit": "1/s"},
            {"name": "th4", "value": D2_PARAMS["th4"], "unit": "1/s"},
        ],
        "figure": _figure_payload(doc, [(GREEN, "650 C")], "650 C", x_unit="h", y_unit="1"),
        "text_locations": ["p1:theta constants"],
    }
    return doc


def _doc_d003() -> FixtureDoc:
    log_model = models_mod.make_logarithmic()
    t = np.linspace(0.0, 1e4, 400)
    strain = evaluate(log_model, D3_PARAMS, {}, t[1:])
    pts = np.column_stack([t, np.concatenate([[0.0], strain]) * 100.0])
    series = dg.SeriesSpec(ORANGE, pts, 3, "8 MPa")
    spec = dg.SyntheticPlotSpec(
        x_range=(0.0, 10500.0), y_range=(0.0, 8.0), series=(series,), gridlines=False, noise_px=0.6
    )
    plot = dg.render_synthetic_plot(spec, np.random.default_rng(103))

    doc = FixtureDoc(
        bundle_id="d003",
        doi="10.5555/fx.2018.003",
        title="Logarithmic creep of high-density polyethylene under low stress",
        authors=["S. Brandt"],
        year=2018,
        pages=[
            "Room-temperature creep of HDPE at 8 MPa follows the logarithmic law "
            "eps = a*ln(1 + b*t) with a = 0.015 and b = 0.01 1/s over the first "
            "10000 seconds of loading (strain in percent in Fig. 1).",
        ],
        caption="Fig. 1: percent creep strain of HDPE versus time at 20 C, 8 MPa.",
        plot=plot,
    )
    doc.screening_reply = {
        "has_data": True,
        "has_equation": True,
        "rationale": "creep measurements with an explicit logarithmic law",
    }
    doc.extraction_reply = {
        "material": "HDPE",
        "category": "polymer",
        "temperature": "20 C",
        "stress": "8 MPa",
        "model_name": "logarithmic",
        "equation": "eps = a*ln(1 + b*t)",
        "bindings": [
            {"symbol": "eps", "role": "strain", "unit": "1"},
            {"symbol": "t", "role": "time", "unit": "s"},
            {"symbol": "a", "role": "parameter", "unit": "1"},
            {"symbol": "b", "role": "parameter", "unit": "1/s"},
        ],
        "parameters": [
            {"name": "a", "value": D3_PARAMS["a"], "unit": "1"},
            {"name": "b", "value": D3_PARAMS["b"], "unit": "1/s"},
        ],
        "figure": _figure_payload(doc, [(ORANGE, "8 MPa")], "8 MPa", x_unit="s", y_unit="%"),
        "text_locations": ["p1:logarithmic law"],
    }
    return doc


def _doc_d004() -> FixtureDoc:
    bailey = models_mod.make_norton_bailey(D4_TRUE["n"], D4_TRUE["m"])
    t = np.linspace(1.0, 1e4, 400)
    strain = evaluate(bailey, D4_TRUE, {"sigma": D4_SIGMA}, t)
    series = dg.SeriesSpec(BLUE, np.column_stack([t, strain]), 3, "80 MPa")
    spec = dg.SyntheticPlotSpec(
        x_range=(0.0, 10500.0),
        y_range=(0.0, 0.3),
        series=(series,),
        gridlines=True,
        noise_px=0.6,
    )
    plot = dg.render_synthetic_plot(spec, np.random.default_rng(104))

    doc = FixtureDoc(
        bundle_id="d004",
        doi="10.5555/fx.2020.004",
        title="Time-hardening creep behaviour of AA2024 aluminium sheet",
        authors=["T. Villar", "K. Osei"],
        year=2020,
        pages=[
            "Creep of AA2024 at 150 C under 80 MPa is described by the hardening "
            "relation eps = A*sigma^n*t^m. Regression of the test series gave "
            "A = 3.58e-7, n = 2 and a time exponent m = 0.5.",
        ],
        caption="Fig. 3: creep strain of AA2024 versus time at 150 C and 80 MPa.",
        plot=plot,
    )
    doc.screening_reply = {
        "has_data": True,
        "has_equation": True,
        "rationale": "creep data and a time-hardening expression are given",
    }
    doc.extraction_reply = {
        "material": "AA2024",
        "category": "aluminum_alloy",
        "temperature": "150 C",
        "stress": "80 MPa",
        "model_name": "norton_bailey",
        "equation": "eps = A*sigma^n*t^m",
        "bindings": [
            {"symbol": "eps", "role": "strain", "unit": "1"},
            {"symbol": "t", "role": "time", "unit": "s"},
            {"symbol": "sigma", "role": "stress", "unit": "MPa"},
            {"symbol": "A", "role": "parameter", "unit": "MPa^-2*s^-1/2"},
            {"symbol": "n", "role": "parameter", "unit": "1", "value": 2},
            {"symbol": "m", "role": "parameter", "unit": "1", "value": 0.5},
        ],
        "parameters": [
            {"name": "A", "value": D4_CLAIMED["A"], "unit": "MPa^-2*s^-1/2"},
            {"name": "n", "value": D4_CLAIMED["n"], "unit": "1"},
            {"name": "m", "value": D4_CLAIMED["m"], "unit": "1"},
        ],
        "figure": _figure_payload(doc, [(BLUE, "80 MPa")], "80 MPa", x_unit="s", y_unit="1"),
        "text_locations": ["p1:regression constants"],
    }
    return doc


def _doc_d005() -> FixtureDoc:
    duffing = models_mod.make_duffing()
    t = np.linspace(0.0, 30.0, 500)
    obs = evaluate(duffing, D5_PARAMS, {}, t[1:])
    pts = np.column_stack([t, np.concatenate([[D5_PARAMS["offset"]], obs])])
    series = dg.SeriesSpec(RED, pts, 3, "1200 MPa")
    spec = dg.SyntheticPlotSpec(
        x_range=(0.0, 31.0),
        y_range=(0.2, 0.4),
        series=(series,),
        gridlines=True,
        noise_px=0.6,
    )
    plot = dg.render_synthetic_plot(spec, np.random.default_rng(105))

    doc = FixtureDoc(
        bundle_id="d005",
        doi="10.5555/fx.2023.005",
        title="Oscillatory creep deformation dynamics of a Zr-based metallic glass",
        authors=["A. Berezin", "F. Qi"],
        year=2023,
        pages=[
            "Serrated creep flow of Zr55Cu30Al10Ni5 metallic glass at 650 K under "
            "1200 MPa shows oscillatory deformation transients. The deformation "
            "coordinate x obeys the driven non-linear equation "
            "d2(x)/d(t)2 + delta*d(x)/d(t) + alpha*x + beta*x^3 = gamma*cos(omega*t) "
            "with delta = 0.4 1/s, alpha = 4 1/s^2, beta = 5 1/s^2, gamma = 2 1/s^2 "
            "and omega = 2 rad/s; measured deformation is 0.05*x + 0.3.",
        ],
        caption="Fig. 4: deformation versus time for the metallic glass under load.",
        plot=plot,
    )
    doc.screening_reply = {
        "has_data": True,
        "has_equation": True,
        "rationale": "deformation-time data with an explicit governing ODE",
    }
    doc.extraction_reply = {
        "material": "Zr55Cu30Al10Ni5",
        "category": "metallic_glass",
        "temperature": "650 K",
        "stress": "1200 MPa",
        "model_name": "duffing",
        "equation": "d2(x)/d(t)2 + delta*d(x)/d(t) + alpha*x + beta*x^3 = gamma*cos(omega*t)",
        "bindings": [
            {"symbol": "x", "role": "strain", "unit": "1"},
            {"symbol": "t", "role": "time", "unit": "s"},
            {"symbol": "delta", "role": "parameter", "unit": "1/s"},
            {"symbol": "alpha", "role": "parameter", "unit": "1/s^2"},
            {"symbol": "beta", "role": "parameter", "unit": "1/s^2"},
            {"symbol": "gamma", "role": "parameter", "unit": "1/s^2"},
            {"symbol": "omega", "role": "parameter", "unit": "rad/s"},
        ],
        "parameters": [
            {"name": "delta", "value": D5_PARAMS["delta"], "unit": "1/s"},
            {"name": "alpha", "value": D5_PARAMS["alpha"], "unit": "1/s^2"},
            {"name": "beta", "value": D5_PARAMS["beta"], "unit": "1/s^2"},
            {"name": "gamma", "value": D5_PARAMS["gamma"], "unit": "1/s^2"},
            {"name": "omega", "value": D5_PARAMS["omega"], "unit": "rad/s"},
            {"name": "scale", "value": D5_PARAMS["scale"], "unit": "1"},
            {"name": "offset", "value": D5_PARAMS["offset"], "unit": "1"},
            {"name": "x0", "value": D5_PARAMS["x0"], "unit": "1"},
            {"name": "v0", "value": D5_PARAMS["v0"], "unit": "1/s"},
        ],
        "figure": _figure_payload(
            doc, [(RED, "1200 MPa")], "1200 MPa", x_unit="s", y_unit="1", monotonic=False
        ),
        "text_locations": ["p1:oscillator constants"],
    }
    return doc


def _doc_d006() -> FixtureDoc:
    doc = FixtureDoc(
        bundle_id="d006",
        doi="10.5555/fx.2017.006",
        title="Tensile strength and work hardening of cold-rolled sheet steel",
        authors=["J. Malik"],
        year=2017,
        pages=[
            "Uniaxial tensile tests on cold-rolled sheet steel were carried out at "
            "room temperature. Yield strength, ultimate strength and elongation at "
            "fracture are tabulated for three rolling reductions; the strain-rate "
            "sensitivity was negligible in the quasi-static regime.",
        ],
        relevant=False,
    )
    doc.screening_reply = {
        "has_data": False,
        "has_equation": False,
        "rationale": "tensile testing only; no experimental creep data and no "
        "constitutive creep equation",
    }
    return doc


def build_docs() -> list[FixtureDoc]:
    return [_doc_d001(), _doc_d002(), _doc_d003(), _doc_d004(), _doc_d005(), _doc_d006()]


def write_corpus(outdir: str | Path) -> dict:
    """Materialize the fixture corpus; returns the important paths."""
    out = Path(outdir)
    (out / "pages").mkdir(parents=True, exist_ok=True)
    (out / "figures").mkdir(parents=True, exist_ok=True)

    docs = build_docs()
    manifest_lines = []
    replies = {"query_expansion": {}, "screening": {}, "extraction": {}}
    truth_lines = []

    for doc in docs:
        page_paths = []
        for i, page in enumerate(doc.pages, start=1):
            rel = f"pages/{doc.bundle_id}_p{i}.txt"
            (out / rel).write_text(page)
            page_paths.append(rel)
        figures = []
        if doc.plot is not None:
            rel = f"figures/{doc.bundle_id}_fig1.png"
            Image.fromarray(doc.plot.image).save(out / rel)
            figures.append(
                {"id": f"{doc.bundle_id}-fig1", "image_path": rel, "caption": doc.caption}
            )
        manifest_lines.append(
            json.dumps(
                {
                    "id": doc.bundle_id,
                    "doi": doc.doi,
                    "title": doc.title,
                    "authors": doc.authors,
                    "year": doc.year,
                    "pages": page_paths,
                    "figures": figures,
                }
            )
        )
        if doc.screening_reply is not None:
            replies["screening"][doc.bundle_id] = doc.screening_reply
        if doc.extraction_reply is not None:
            replies["extraction"][doc.bundle_id] = doc.extraction_reply
        truth_lines.append(f"{doc.bundle_id},{1 if doc.relevant else 0}")

    replies["query_expansion"]["superalloy creep"] = {
        "query": json.dumps(
            {
                "and": [
                    {"or": [{"term": "Ni-based"}, {"term": "Co-based"}]},
                    {"term": "creep"},
                ]
            }
        )
    }
    replies["query_expansion"]["_default"] = {"query": json.dumps({"term": "creep"})}

    manifest = out / "manifest.jsonl"
    manifest.write_text("\n".join(manifest_lines) + "\n")
    replies_path = out / "replies.json"
    replies_path.write_text(json.dumps(replies, indent=1))
    truth = out / "truth.csv"
    truth.write_text("bundle_id,relevant\n" + "\n".join(truth_lines) + "\n")
    return {"manifest": manifest, "replies": replies_path, "truth": truth, "root": out}


def main(argv=None):
    import argparse

    parser = argparse.ArgumentParser(description="write the fixture corpus")
    parser.add_argument("outdir")
    args = parser.parse_args(argv)
    paths = write_corpus(args.outdir)
    print(f"fixture corpus written under {paths['root']}")


if __name__ == "__main__":
    main()
