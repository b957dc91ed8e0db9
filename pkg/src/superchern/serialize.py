"""JSON scene schema: forms, superconnections, cocycles, covers, reports.

Coefficient tables are stored either as base64 grid samples (default: compact
and lossless), as explicit re/im lists, or as finite Fourier mode lists that
are expanded onto the grid at load time.  All payloads carry ``schema: 1``.
"""

from __future__ import annotations

import base64
import json

import numpy as np

from .errors import SceneError
from .forms import GradedMatrixForm, Grading, TorusChart
from .superconn import Superconnection

SCHEMA_VERSION = 1

__all__ = [
    "SCHEMA_VERSION",
    "encode_array",
    "decode_array",
    "form_to_dict",
    "form_from_dict",
    "superconnection_to_dict",
    "superconnection_from_dict",
    "cocycle_to_dict",
    "cocycle_from_dict",
    "eta_result_to_dict",
    "open_set_to_dict",
    "open_set_from_dict",
    "gerbe_to_dict",
    "gerbe_from_dict",
    "twisted_scene_to_dict",
    "twisted_scene_from_dict",
    "save_scene",
    "load_scene",
]


def encode_array(arr: np.ndarray, encoding: str = "b64") -> dict:
    arr = np.ascontiguousarray(arr, dtype=np.complex128)
    if encoding == "b64":
        return {
            "enc": "b64",
            "dtype": "complex128",
            "shape": list(arr.shape),
            "data": base64.b64encode(arr.tobytes()).decode("ascii"),
        }
    if encoding == "lists":
        return {
            "enc": "lists",
            "shape": list(arr.shape),
            "re": arr.real.reshape(-1).tolist(),
            "im": arr.imag.reshape(-1).tolist(),
        }
    raise SceneError(f"unknown array encoding {encoding!r}")


def decode_array(payload: dict, chart: TorusChart | None = None) -> np.ndarray:
    enc = payload.get("enc")
    if enc == "b64":
        raw = base64.b64decode(payload["data"])
        return np.frombuffer(raw, dtype=np.complex128).reshape(payload["shape"]).copy()
    if enc == "lists":
        re = np.asarray(payload["re"], dtype=np.float64)
        im = np.asarray(payload["im"], dtype=np.float64)
        return (re + 1j * im).reshape(payload["shape"])
    if enc == "fourier":
        if chart is None:
            raise SceneError("fourier-encoded fields need the chart for expansion")
        trailing = tuple(payload["shape"])
        out = np.zeros(chart.shape + trailing, dtype=np.complex128)
        coords = [chart.coordinate(a) for a in range(chart.dim)]
        for mode in payload["modes"]:
            k = mode["k"]
            coeff = (
                np.asarray(mode["re"], dtype=np.float64)
                + 1j * np.asarray(mode["im"], dtype=np.float64)
            ).reshape(trailing)
            phase = np.zeros(chart.shape)
            for a, ka in enumerate(k):
                phase = phase + ka * coords[a]
            wave = np.exp(2j * np.pi * phase)
            out += wave[(...,) + (None,) * len(trailing)] * coeff
        return out
    raise SceneError(f"unknown array encoding {enc!r}")


def _chart_to_dict(chart: TorusChart) -> dict:
    return {"dim": chart.dim, "grid_size": chart.grid_size, "period": 1.0}


def _chart_from_dict(payload: dict) -> TorusChart:
    return TorusChart(int(payload["dim"]), int(payload.get("grid_size", 32)))


def form_to_dict(form: GradedMatrixForm, encoding: str = "b64") -> dict:
    comps = []
    for mask in range(form.chart.n_components):
        comp = form.data[mask]
        if not comp.any():
            continue
        axes = [a for a in range(form.chart.dim) if (mask >> a) & 1]
        comps.append({"axes": axes, "field": encode_array(comp, encoding)})
    return {
        "chart": _chart_to_dict(form.chart),
        "grading": form.grading.signature.tolist(),
        "components": comps,
    }


def form_from_dict(payload: dict) -> GradedMatrixForm:
    chart = _chart_from_dict(payload["chart"])
    grading = Grading(payload["grading"])
    out = GradedMatrixForm.zeros(chart, grading)
    for comp in payload.get("components", []):
        field = decode_array(comp["field"], chart)
        out.set_component(tuple(comp["axes"]), field)
    return out


def superconnection_to_dict(a: Superconnection, encoding: str = "b64") -> dict:
    chart = a.chart
    term0 = a.term0_field()
    conn1 = [a.coeff.component((axis,)) for axis in range(chart.dim)]
    higher = []
    for degree in range(2, chart.dim + 1):
        term = a.term(degree)
        if term.sup_norm() > 0:
            higher.append({"degree": degree, "form": form_to_dict(term, encoding)})
    payload = {
        "chart": _chart_to_dict(chart),
        "rank": a.rank,
        "grading": a.grading.signature.tolist(),
        "term0": encode_array(term0, encoding) if term0.any() else None,
        "conn1": [
            encode_array(w, encoding) if w.any() else None for w in conn1
        ],
        "higher": higher,
    }
    if a.affine:
        payload["affine"] = [
            {"axis": int(axis), "slope": encode_array(slope, encoding)}
            for axis, slope in sorted(a.affine.items())
        ]
    return payload


def superconnection_from_dict(payload: dict) -> Superconnection:
    chart = _chart_from_dict(payload["chart"])
    grading = Grading(payload["grading"])
    coeff = GradedMatrixForm.zeros(chart, grading)
    if payload.get("term0") is not None:
        coeff.set_component((), decode_array(payload["term0"], chart))
    for axis, enc in enumerate(payload.get("conn1") or []):
        if enc is not None:
            coeff.set_component((axis,), decode_array(enc, chart))
    for item in payload.get("higher", []):
        form = form_from_dict(item["form"])
        coeff = coeff + form
    affine = None
    if payload.get("affine"):
        affine = {
            int(item["axis"]): decode_array(item["slope"], chart)
            for item in payload["affine"]
        }
    return Superconnection(coeff, affine)


def cocycle_to_dict(c, encoding: str = "b64") -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "type": "cocycle",
        "flavor": c.flavor,
        "superconnection": superconnection_to_dict(c.A, encoding),
        "omega": form_to_dict(c.omega, encoding),
    }


def cocycle_from_dict(payload: dict):
    from .dk import DKCocycle
    from .oddk import OddCocycle

    if payload.get("type") != "cocycle":
        raise SceneError("payload is not a cocycle scene")
    a = superconnection_from_dict(payload["superconnection"])
    omega = form_from_dict(payload["omega"])
    flavor = payload.get("flavor", "even")
    if flavor == "even":
        return DKCocycle(a, omega)
    if flavor == "odd":
        return OddCocycle(a, omega)
    raise SceneError(f"unknown cocycle flavor {flavor!r}")


def eta_result_to_dict(res, encoding: str = "b64") -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "type": "eta_result",
        "form": form_to_dict(res.form, encoding),
        "est_error": res.est_error,
        "truncation_T": res.truncation_T,
    }


def save_scene(path, payload: dict):
    payload = dict(payload)
    payload.setdefault("schema", SCHEMA_VERSION)
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_scene(path) -> dict:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SceneError(f"cannot read scene {path}: {exc}") from exc
    if payload.get("schema") not in (None, SCHEMA_VERSION):
        raise SceneError(f"unsupported schema {payload.get('schema')}")
    return payload


def open_set_to_dict(u) -> dict:
    kinds = {spec[0] for spec in u.boxes} if u.boxes else set()
    if not u.boxes:
        kind = "whole" if bool(u.core.all()) else "empty"
        return {"type": "open_set", "kind": kind, "boxes": []}
    kind = "complement" if "complement" in kinds else "box"
    return {
        "type": "open_set",
        "kind": kind,
        "chart": {"dim": u.chart.dim, "grid_size": u.chart.grid_size},
        "boxes": [
            {
                "center": list(np.atleast_1d(np.asarray(c, dtype=float))),
                "core": np.asarray(core).tolist(),
                "support": np.asarray(supp).tolist(),
            }
            for (_, c, core, supp) in u.boxes
        ],
    }


def open_set_from_dict(payload: dict, chart: TorusChart):
    from .relative import OpenSet

    kind = payload.get("kind", "whole")
    if kind == "whole":
        return OpenSet.whole(chart)
    if kind == "empty":
        return OpenSet.empty(chart)
    boxes = [(b["center"], b["core"], b["support"]) for b in payload["boxes"]]
    if kind == "box":
        b = boxes[0]
        return OpenSet.box(chart, *b)
    if kind == "complement":
        return OpenSet.complement_of_boxes(chart, boxes)
    raise SceneError(f"unknown open-set kind {kind!r}")


def gerbe_to_dict(g, cs=None, curving=None, encoding: str = "b64") -> dict:
    """Cover boxes, per-overlap phase fields, and optional connective data."""
    cover = g.cover
    payload = {
        "schema": SCHEMA_VERSION,
        "type": "gerbe",
        "chart": _chart_to_dict(cover.chart),
        "cover": [open_set_to_dict(u) for u in cover.sets],
        "transitions": {
            f"{i},{j}": encode_array(fieldv, encoding)
            for (i, j), fieldv in sorted(g.transitions.items())
        },
        "mu": {
            f"{i},{j},{k}": encode_array(fieldv, encoding)
            for (i, j, k), fieldv in sorted(g.mu.items())
        },
    }
    if cs is not None:
        payload["connective"] = {
            f"{i},{j}": form_to_dict(form, encoding)
            for (i, j), form in sorted(cs.forms.items())
        }
    if curving is not None:
        payload["curving"] = [form_to_dict(k, encoding) for k in curving.kappas]
    return payload


def gerbe_from_dict(payload: dict):
    from .twisted import CechCover, ConnectiveStructure, Curving, GerbeData

    chart = _chart_from_dict(payload["chart"])
    sets = [open_set_from_dict(spec, chart) for spec in payload["cover"]]
    cover = CechCover(chart, sets)
    transitions = {
        tuple(int(x) for x in key.split(",")): decode_array(enc, chart)
        for key, enc in payload.get("transitions", {}).items()
    }
    mu = {
        tuple(int(x) for x in key.split(",")): decode_array(enc, chart)
        for key, enc in payload.get("mu", {}).items()
    }
    g = GerbeData(cover, transitions, mu)
    cs = None
    if "connective" in payload:
        forms = {
            tuple(int(x) for x in key.split(",")): form_from_dict(item)
            for key, item in payload["connective"].items()
        }
        cs = ConnectiveStructure(cover, forms)
    curving = None
    if "curving" in payload:
        curving = Curving(cover, [form_from_dict(item) for item in payload["curving"]])
    return g, cs, curving


def twisted_scene_to_dict(a, kappa, encoding: str = "b64") -> dict:
    """Global-curving scene: one superconnection plus the global 2-form."""
    return {
        "schema": SCHEMA_VERSION,
        "type": "twisted_scene",
        "superconnection": superconnection_to_dict(a, encoding),
        "curving": form_to_dict(kappa, encoding),
    }


def twisted_scene_from_dict(payload: dict):
    if payload.get("type") != "twisted_scene":
        raise SceneError("payload is not a twisted scene")
    return (
        superconnection_from_dict(payload["superconnection"]),
        form_from_dict(payload["curving"]),
    )
