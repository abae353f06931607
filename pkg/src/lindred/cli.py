"""Command-line surface: dims, reduce, compare, symmetry.

Exit codes: 0 success, 2 spec/schema error, 3 verification failure,
4 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import reports, specio
from .config import DimensionCapError
from .generator import QSOModel, extract_gks, is_lindblad, output_trajectory
from .krylov import observable_space, reachable_space
from .opalg import Array
from .reducer import (
    ReducedQSO,
    iterative_reduction,
    linear_reduction,
    observable_reduction,
    output_deviation,
    reachable_reduction,
)
from .starstruct import commutant, support_restrict, wedderburn_from_commutant
from .symmetry import classify, group_commutant
from .specio import SpecError

EXIT_SPEC = 2
EXIT_VERIFY = 3
EXIT_CAP = 4


def _parse_times(text: str) -> np.ndarray:
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError as err:
        raise SpecError(f"--times must be start:stop:step, got {text!r}") from err
    if step <= 0 or stop < start:
        raise SpecError("--times must have positive step and stop >= start")
    count = int(round((stop - start) / step))
    return start + step * np.arange(count + 1)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_dims(args) -> int:
    spec = specio.load_spec(args.spec)
    numerics = specio.numerics_from_spec(spec, args.tol, args.seed, args.cap_dim)
    model = specio.build_model(spec)
    tol = numerics.rank_tol
    s = model.superoperator()
    kr = observable_space(s, model.output, tol)
    chain = kr.chain_ops()
    sr = support_restrict(chain, tol)
    chain_c = [sr.compress_op(x) for x in chain]
    comm = commutant(chain_c, tol)
    wed = wedderburn_from_commutant(comm.subspace, chain_c, numerics.seed, tol)
    record = {
        "model": spec["kind"],
        "space_dim": model.dim ** 2,
        "observable_dim": kr.dim,
        "observable_support_rank": sr.rank,
        "output_algebra_dim": wed.algebra_dim,
        "compressed_dim": wed.compressed_dim,
        "blocks": [list(b) for b in sorted(wed.blocks)],
        "block_structure": reports.format_blocks(wed.blocks),
        "commutant_dim": comm.dim,
        "krylov_depth": kr.depth_reached,
        "krylov_leak": kr.leak,
    }
    if args.with_reachable and model.initial_set:
        krr = reachable_space(s, list(model.initial_set), tol)
        record["reachable_dim"] = krr.dim
    report = {
        "command": "dims",
        "metadata": {"spec_hash": specio.spec_hash(spec), "seed": numerics.seed,
                     "tol": tol},
        "dimensions": record,
    }
    out = _outdir(args)
    specio.dump_json(report, out / "dims_report.json")
    table = reports.dimension_table([record])
    (out / "dims_report.txt").write_text(table)
    print(table, end="")
    return 0


def cmd_reduce(args) -> int:
    spec = specio.load_spec(args.spec)
    numerics = specio.numerics_from_spec(spec, args.tol, args.seed, args.cap_dim)
    model = specio.build_model(spec)
    tol, seed = numerics.rank_tol, numerics.seed
    out = _outdir(args)
    if args.mode == "linear":
        lin = linear_reduction(model, mode={"reachable": "reachable",
                                            "observable": "observable",
                                            "iterative": "joint"}[args.strategy], tol=tol)
        doc = {
            "metadata": {"spec_hash": specio.spec_hash(spec), "seed": seed,
                         "tol": tol, "strategy": args.strategy, "mode": "linear"},
            "dim": lin.dim,
            "f_matrix": specio.encode_matrix(lin.f_mat),
            "output_matrix": specio.encode_matrix(lin.c_mat),
            "labels": list(lin.labels),
            "to_coords": specio.encode_matrix(lin.to_coords),
        }
        specio.dump_json(doc, out / "reduced_model.json")
        print(f"linear reduction ({args.strategy}): dimension {lin.dim}")
        return 0
    proc = {"reachable": reachable_reduction,
            "observable": observable_reduction,
            "iterative": iterative_reduction}[args.strategy]
    red: ReducedQSO = proc(model, tol=tol, seed=seed)
    doc = specio.serialize_reduced(red, spec, args.strategy, "quantum", numerics)
    specio.dump_json(doc, out / "reduced_model.json")
    if "hamiltonian" in doc["generator"]:
        gks = extract_gks(red.model.superoperator(), 1e-8)
        blocks = red.provenance.get("blocks")
        dims = [nk for nk, _ in blocks] if blocks else None
        reports.render_block_figure(out / "reduced_blocks.png", gks.hamiltonian,
                                    gks.noise_ops, dims)
    prov = dict(red.provenance)
    print(f"quantum reduction ({args.strategy}): compressed dim {red.dim}, "
          f"algebra dim {prov.get('algebra_dim', prov.get('final_dim'))}")
    dev = prov.get("output_deviation", 0.0)
    print(f"verification: max output deviation {dev:.3e}")
    if doc["lindblad_check"]["passed"] is False:
        print("warning: reduced generator failed the semigroup check",
              file=sys.stderr)
        return EXIT_VERIFY
    return 0


def cmd_compare(args) -> int:
    spec = specio.load_spec(args.spec)
    numerics = specio.numerics_from_spec(spec, args.tol, args.seed, args.cap_dim)
    model = specio.build_model(spec)
    doc = json.loads(Path(args.model).read_text())
    if doc["metadata"]["spec_hash"] != specio.spec_hash(spec):
        print("error: reduced model was built from a different spec", file=sys.stderr)
        return EXIT_VERIFY
    reduced_model, pair = specio.load_reduced(doc)
    times = _parse_times(args.times)
    rng = np.random.default_rng(numerics.seed)
    states: list[Array] = [x for x, t in zip(model.initial_set, model.initial_tags)
                           if t == "state"]
    from .opalg import random_state
    while len(states) < args.seeds:
        states.append(random_state(rng, model.dim))
    states = states[:max(args.seeds, 1)]
    s_full = model.superoperator()
    s_red = reduced_model.superoperator()
    from .generator import evolve
    full_rows, red_rows = [], []
    for rho0 in states:
        full = [model.output.apply(r) for r in evolve(s_full, rho0, times)]
        red = [reduced_model.output.apply(r)
               for r in evolve(s_red, pair.reduce(rho0), times)]
        full_rows.append(full)
        red_rows.append(red)
    out = _outdir(args)
    worst = reports.write_trajectory_csv(out / "trajectories.csv", times,
                                         model.output.labels, full_rows, red_rows)
    reports.render_compare_figure(out / "trajectories.png", times,
                                  model.output.labels, full_rows[0], red_rows[0])
    report = {
        "command": "compare",
        "metadata": {"spec_hash": specio.spec_hash(spec), "seed": numerics.seed,
                     "tol": numerics.rank_tol},
        "n_states": len(states),
        "times": {"start": float(times[0]), "stop": float(times[-1]),
                  "count": int(len(times))},
        "max_output_deviation": worst,
        "trajectory_file": "trajectories.csv",
        "figure_file": "trajectories.png",
    }
    specio.dump_json(report, out / "compare_report.json")
    print(f"max |full - reduced| over {len(states)} states, "
          f"{len(times)} times: {worst:.3e}")
    if worst > 1e-8:
        print("error: deviation exceeds the exactness tolerance 1e-8", file=sys.stderr)
        return EXIT_VERIFY
    return 0


def cmd_symmetry(args) -> int:
    spec = specio.load_spec(args.spec)
    numerics = specio.numerics_from_spec(spec, args.tol, args.seed, args.cap_dim)
    model = specio.build_model(spec)
    cands = json.loads(Path(args.candidates).read_text())
    if not isinstance(cands, dict) or "candidates" not in cands:
        print("error: candidates file needs a 'candidates' list", file=sys.stderr)
        return EXIT_SPEC
    import scipy.linalg
    rows = []
    for entry in cands["candidates"]:
        name = entry.get("name", f"candidate{len(rows)}")
        mat = specio.decode_matrix(entry["matrix"])
        if entry.get("type", "unitary") == "hermitian_generator":
            s_op = scipy.linalg.expm(-0.7j * mat)
        else:
            s_op = mat
        rep = classify(s_op, model.generator, model.output, tol=1e-8)
        rows.append({
            "name": name,
            "unitary_defect": rep.unitary_defect,
            "weak_defect": rep.weak_defect,
            "strong_hamiltonian_defect": rep.strong_hamiltonian_defect,
            "strong_noise_defects": list(rep.strong_noise_defects),
            "ods_defect": rep.ods_defect,
            "classification": rep.classification,
            "flagged_non_unitary": rep.unitary_defect > 1e-10,
        })
        print(f"{name}: {rep.classification} (weak {rep.weak_defect:.2e}, "
              f"ods {rep.ods_defect:.2e})")
    report = {
        "command": "symmetry",
        "metadata": {"spec_hash": specio.spec_hash(spec), "seed": numerics.seed,
                     "tol": numerics.rank_tol},
        "candidates": rows,
    }
    out = _outdir(args)
    specio.dump_json(report, out / "symmetry_report.json")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", required=True, help="model specification file")
    common.add_argument("--out", default="lindred_out", help="output directory")
    common.add_argument("--tol", type=float, default=None, help="rank tolerance")
    common.add_argument("--seed", type=int, default=None, help="RNG seed")
    common.add_argument("--cap-dim", type=int, default=None,
                        help="largest allowed dense superoperator dimension")

    parser = argparse.ArgumentParser(
        prog="lindred",
        description="Exact model reduction for Lindblad dynamics: Krylov "
                    "operator subspaces, *-algebra block structure, and "
                    "verified reduced models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_dims = sub.add_parser("dims", parents=[common],
                            help="observable-space and output-algebra dimensions")
    p_dims.add_argument("--with-reachable", action="store_true")
    p_dims.set_defaults(func=cmd_dims)

    p_red = sub.add_parser("reduce", parents=[common],
                           help="compute and serialise a reduced model")
    p_red.add_argument("--mode", choices=["quantum", "linear"], default="quantum")
    p_red.add_argument("--strategy", choices=["reachable", "observable", "iterative"],
                       default="observable")
    p_red.set_defaults(func=cmd_reduce)

    p_cmp = sub.add_parser("compare", parents=[common],
                           help="full-versus-reduced trajectories")
    p_cmp.add_argument("--model", required=True, help="serialised reduced model")
    p_cmp.add_argument("--times", default="0:10:0.05")
    p_cmp.add_argument("--seeds", type=int, default=1,
                       help="number of initial states (declared ones first, "
                            "then random)")
    p_cmp.set_defaults(func=cmd_compare)

    p_sym = sub.add_parser("symmetry", parents=[common],
                           help="classify symmetry candidates")
    p_sym.add_argument("--candidates", required=True)
    p_sym.set_defaults(func=cmd_symmetry)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SpecError as err:
        print(f"spec error: {err}", file=sys.stderr)
        return EXIT_SPEC
    except DimensionCapError as err:
        print(f"resource cap: {err}", file=sys.stderr)
        return EXIT_CAP
    except RuntimeError as err:
        print(f"verification failure: {err}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
