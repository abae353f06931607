"""Model-specification files: schema validation, (de)serialisation, hashing.

The interchange format is JSON; complex numbers are encoded as two-element
[re, im] arrays and complex matrices as nested arrays of those pairs.
Unknown keys are rejected by schema validation.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .config import DEFAULTS, Numerics
from .generator import LindbladGenerator, OutputMap, QSOModel
from .opalg import Array
from . import zoo

_NUM = {"type": "number"}
_CPLX = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_MATRIX = {"type": "array", "items": {"type": "array", "items": _CPLX}}

_DISSIPATION = {
    "type": ["object", "null"],
    "properties": {"kind": {"type": "string"}, "rate": _NUM},
    "required": ["kind", "rate"],
    "additionalProperties": False,
}

SPEC_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["central_spin", "single_axis", "xxz", "ns_code", "custom"]},
        "params": {
            "type": "object",
            "properties": {
                "n_spins": {"type": "integer", "minimum": 2},
                "omega1": _NUM, "eta": _NUM,
                "ax": _NUM, "ay": _NUM, "az": _NUM,
                "bath_omega": _NUM, "bath_mu": _NUM,
                "coupling": _NUM,
                "intra_bath": {
                    "type": ["object", "null"],
                    "properties": {"kind": {"enum": ["ising", "heisenberg"]},
                                   "strength": _NUM},
                    "required": ["kind", "strength"],
                    "additionalProperties": False,
                },
                "dissipation": _DISSIPATION,
                "initial": {"type": "string"},
                "beta": _NUM,
                "gamma": _NUM, "delta": _NUM, "kappa": _NUM, "mu_drive": _NUM,
                "gamma_12": _NUM, "gamma_23": _NUM, "gamma_13": _NUM,
                "kappa_x": _NUM, "kappa_y": _NUM, "kappa_z": _NUM,
                "gamma_local": {"type": "array", "items": _NUM,
                                "minItems": 3, "maxItems": 3},
            },
            "additionalProperties": False,
        },
        "custom": {
            "type": "object",
            "properties": {
                "hamiltonian": _MATRIX,
                "noise_ops": {"type": "array", "items": _MATRIX},
                "outputs": {"type": "array", "items": _MATRIX, "minItems": 1},
                "output_labels": {"type": "array", "items": {"type": "string"}},
                "initial_set": {"type": "array", "items": _MATRIX},
                "initial_tags": {"type": "array",
                                 "items": {"enum": ["state", "generic"]}},
            },
            "required": ["hamiltonian", "outputs"],
            "additionalProperties": False,
        },
        "numerics": {
            "type": "object",
            "properties": {"tol": _NUM, "seed": {"type": "integer"},
                           "epsilon": _NUM, "quad_order": {"type": "integer"},
                           "cap_dim": {"type": "integer"}},
            "additionalProperties": False,
        },
        "outputs_of_interest": {"type": "array", "items": {"type": "string"}},
    },
    "required": ["kind"],
    "additionalProperties": False,
}


class SpecError(ValueError):
    """Invalid model-specification document."""


def encode_complex(z: complex) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def encode_matrix(m: Array) -> list:
    return [[encode_complex(z) for z in row] for row in np.asarray(m, dtype=complex)]


def decode_matrix(data: list) -> Array:
    return np.array([[complex(re, im) for re, im in row] for row in data], dtype=complex)


def spec_hash(spec: dict) -> str:
    canon = json.dumps(spec, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def load_spec(path: str | Path) -> dict:
    try:
        spec = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise SpecError(f"{path}: not valid JSON ({err})") from err
    validate_spec(spec)
    return spec


def validate_spec(spec: dict) -> None:
    try:
        jsonschema.validate(spec, SPEC_SCHEMA)
    except jsonschema.ValidationError as err:
        loc = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise SpecError(f"schema violation at {loc}: {err.message}") from err
    if spec["kind"] == "custom" and "custom" not in spec:
        raise SpecError("kind 'custom' requires a 'custom' section")
    if spec["kind"] != "custom" and "params" not in spec:
        raise SpecError(f"kind {spec['kind']!r} requires a 'params' section")


def numerics_from_spec(spec: dict, tol: float | None = None,
                       seed: int | None = None,
                       cap_dim: int | None = None) -> Numerics:
    num = spec.get("numerics", {})
    return DEFAULTS.with_overrides(
        rank_tol=tol if tol is not None else num.get("tol"),
        seed=seed if seed is not None else num.get("seed"),
        epsilon=num.get("epsilon"),
        quad_order=num.get("quad_order"),
        cap_dim=cap_dim if cap_dim is not None else num.get("cap_dim"),
    )


def _tuple_field(d: dict, key: str):
    v = d.get(key)
    if v is None:
        return None
    return (v["kind"], v["rate"]) if "rate" in v else (v["kind"], v["strength"])


def build_model(spec: dict) -> QSOModel:
    """Instantiate the QSO model a validated spec describes."""
    kind = spec["kind"]
    p = dict(spec.get("params", {}))
    if kind == "central_spin":
        initial = p.pop("initial", "none")
        beta = p.pop("beta", None)
        params = zoo.CentralSpinParams(
            n_spins=p["n_spins"], omega1=p.get("omega1", 0.0), eta=p.get("eta", 0.0),
            ax=p.get("ax", 0.0), ay=p.get("ay", 0.0), az=p.get("az", 0.0),
            bath_omega=p.get("bath_omega", 0.0), bath_mu=p.get("bath_mu", 0.0),
            intra_bath=_tuple_field(p, "intra_bath"),
            dissipation=_tuple_field(p, "dissipation"))
        model = zoo.build_central_spin(params, initial=initial, beta=beta)
    elif kind == "single_axis":
        params = zoo.SingleAxisParams(
            n_spins=p["n_spins"], omega1=p.get("omega1", 0.0), eta=p.get("eta", 0.0),
            coupling=p.get("coupling", 1.0), bath_mu=p.get("bath_mu", 0.0),
            dissipation=_tuple_field(p, "dissipation"))
        model = zoo.build_single_axis(params)
    elif kind == "xxz":
        params = zoo.XXZParams(
            n_spins=p["n_spins"], gamma=p.get("gamma", 1.0), delta=p.get("delta", 0.5),
            kappa=p.get("kappa", 1.2), mu_drive=p.get("mu_drive", 0.1))
        model = zoo.build_xxz(params)
    elif kind == "ns_code":
        params = zoo.NSCodeParams(
            gamma_12=p.get("gamma_12", 1.0), gamma_23=p.get("gamma_23", 1.0),
            gamma_13=p.get("gamma_13", 0.0), delta=p.get("delta", 1.0),
            kappa_x=p.get("kappa_x", 0.0), kappa_y=p.get("kappa_y", 0.0),
            kappa_z=p.get("kappa_z", 0.0),
            gamma_local=tuple(p.get("gamma_local", (0.0, 0.0, 0.0))))
        model = zoo.build_ns_code(params)
    elif kind == "custom":
        c = spec["custom"]
        h = decode_matrix(c["hamiltonian"])
        noise = tuple(decode_matrix(m) for m in c.get("noise_ops", []))
        outs = tuple(decode_matrix(m) for m in c["outputs"])
        labels = tuple(c.get("output_labels", [f"O{i}" for i in range(len(outs))]))
        init = tuple(decode_matrix(m) for m in c.get("initial_set", []))
        tags = tuple(c.get("initial_tags", ["state"] * len(init)))
        model = QSOModel(generator=LindbladGenerator(h, noise),
                         output=OutputMap(ops=outs, labels=labels),
                         initial_set=init, initial_tags=tags)
    else:  # pragma: no cover - schema forbids
        raise SpecError(f"unknown kind {kind!r}")
    picks = spec.get("outputs_of_interest")
    if picks:
        missing = [lab for lab in picks if lab not in model.output.labels]
        if missing:
            raise SpecError(f"outputs_of_interest not in the model: {missing}")
        idx = [model.output.labels.index(lab) for lab in picks]
        out = OutputMap(ops=tuple(model.output.ops[i] for i in idx),
                        labels=tuple(picks))
        model = QSOModel(generator=model.generator, output=out,
                         initial_set=model.initial_set,
                         initial_tags=model.initial_tags)
    return model


# ---------------------------------------------------------------------------
# Reduced-model serialisation
# ---------------------------------------------------------------------------

def serialize_reduced(reduced, spec: dict, strategy: str, mode: str,
                      numerics: Numerics) -> dict:
    """JSON document for a ReducedQSO, with composite maps and GKS form."""
    from .generator import extract_gks, is_lindblad
    model = reduced.model
    s_red = model.superoperator()
    doc: dict[str, Any] = {
        "metadata": {
            "spec_hash": spec_hash(spec),
            "seed": numerics.seed,
            "tol": numerics.rank_tol,
            "strategy": strategy,
            "mode": mode,
        },
        "dim": model.dim,
        "outputs": {"labels": list(model.output.labels),
                    "ops": [encode_matrix(o) for o in model.output.ops]},
        "initial_set": [encode_matrix(x) for x in model.initial_set],
        "initial_tags": list(model.initial_tags),
        "reduce_map": encode_matrix(reduced.pair.r_mat),
        "inject_map": encode_matrix(reduced.pair.j_mat),
        "provenance": _jsonable(reduced.provenance),
    }
    rep = is_lindblad(s_red, 1e-8)
    doc["lindblad_check"] = {"herm_defect": rep.herm_defect,
                             "trace_defect": rep.trace_defect,
                             "ccp_min_eig": rep.ccp_min_eig,
                             "passed": rep.passed}
    if rep.passed:
        gks = extract_gks(s_red, 1e-8)
        doc["generator"] = {"hamiltonian": encode_matrix(gks.hamiltonian),
                            "noise_ops": [encode_matrix(L) for L in gks.noise_ops]}
    else:
        doc["generator"] = {"superoperator": encode_matrix(s_red)}
    return doc


def load_reduced(doc: dict):
    """Rebuild (model, pair) from a serialised reduced-model document."""
    from .reducer import ReductionPair
    gen = doc["generator"]
    if "hamiltonian" in gen:
        generator = LindbladGenerator(
            decode_matrix(gen["hamiltonian"]),
            tuple(decode_matrix(L) for L in gen["noise_ops"]))
    else:
        generator = decode_matrix(gen["superoperator"])
    out = OutputMap(ops=tuple(decode_matrix(o) for o in doc["outputs"]["ops"]),
                    labels=tuple(doc["outputs"]["labels"]))
    model = QSOModel(generator=generator, output=out,
                     initial_set=tuple(decode_matrix(x) for x in doc["initial_set"]),
                     initial_tags=tuple(doc["initial_tags"]))
    r_mat = decode_matrix(doc["reduce_map"])
    j_mat = decode_matrix(doc["inject_map"])
    n = int(round(np.sqrt(r_mat.shape[1])))
    m = int(round(np.sqrt(r_mat.shape[0])))
    pair = ReductionPair(r_mat=r_mat, j_mat=j_mat, n=n, m=m)
    return model, pair


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, complex):
        return encode_complex(obj)
    return obj


def dump_json(doc: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
