"""Command-line batch runner.

Subcommands::

    superchern verify <suite> [--grid N] [--tol SCALE] [--seed S] [--out F]
    superchern dk apply-chain --cocycle scene.json --chain chain.json [--out F]
    superchern relative index --scene scene.json --open-set sets.json [--out F]
    superchern spectral table [--cutoffs 8,16,32,64] [--out F]
    superchern twisted verify [--seed S] [--out F]

Exit codes: 0 all checks pass, 1 at least one check failed, 2 input error.
Reports are JSON (schema 1) with a content hash over the timing-free payload;
CSV output is available for norm/convergence tables.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .errors import SceneError, SuperchernError
from .serialize import (
    cocycle_from_dict,
    cocycle_to_dict,
    load_scene,
    save_scene,
    superconnection_from_dict,
)
from .suites import SUITES, Report, SuiteConfig, run_suite

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INPUT = 2


def _write_report(report: Report, out: str | None, fmt: str) -> None:
    if fmt == "csv":
        rows = list(report.to_csv_rows())
        if out:
            with open(out, "w", newline="") as fh:
                csv.writer(fh).writerows(rows)
        else:
            csv.writer(sys.stdout).writerows(rows)
        return
    text = report.to_json()
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _cmd_verify(args) -> int:
    overrides = {}
    if getattr(args, "config", None):
        overrides = load_scene(args.config)
    cfg = SuiteConfig(
        suite=overrides.get("suite", args.suite),
        seed=int(overrides.get("seed", args.seed)),
        grid=overrides.get("grid", args.grid),
        tol_scale=float(overrides.get("tol_scale", args.tol)),
    )
    try:
        report = run_suite(cfg)
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    _write_report(report, args.out, args.format)
    for rec in sorted(report.records, key=lambda r: r.name):
        status = "pass" if rec.passed else "FAIL"
        print(
            f"[{status}] {rec.name}: residual {rec.residual:.3e} "
            f"(tol {rec.tolerance:.1e})",
            file=sys.stderr,
        )
    return EXIT_PASS if report.passed else EXIT_FAIL


def _cmd_dk_chain(args) -> int:
    from .dk import (
        Stabilizer,
        cocycle_add,
        collapse_invertible,
        kernel_reduce,
        normalize_q,
        product_cocycle,
        shift_superconnection,
        stabilize,
    )

    try:
        cocycle = cocycle_from_dict(load_scene(args.cocycle))
        chain = load_scene(args.chain)
    except SceneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    trail = []
    try:
        for step in chain.get("ops", []):
            op = step.get("op")
            if op == "add":
                other = cocycle_from_dict(load_scene(step["with"]))
                cocycle = cocycle_add(cocycle, other)
            elif op == "collapse":
                cocycle = collapse_invertible(cocycle, tol=step.get("tol", 1e-10))
            elif op == "shift":
                target = superconnection_from_dict(step["superconnection"])
                cocycle = shift_superconnection(cocycle, target)
            elif op == "stabilize":
                st = _stabilizer_from_dict(step["stabilizer"], cocycle.chart)
                cocycle = stabilize(cocycle, st)
            elif op == "kernel-reduce":
                cocycle = kernel_reduce(cocycle, rank_tol=step.get("rank_tol", 1e-8))
            elif op == "normalize":
                st = _stabilizer_from_dict(step["stabilizer"], cocycle.chart)
                cocycle = normalize_q(cocycle, st)
            elif op == "product":
                other = cocycle_from_dict(load_scene(step["with"]))
                cocycle = product_cocycle(cocycle, other)
            else:
                print(f"error: unknown chain op {op!r}", file=sys.stderr)
                return EXIT_INPUT
            trail.append({"op": op, "rank": cocycle.rank})
    except SuperchernError as exc:
        print(f"error applying chain: {exc}", file=sys.stderr)
        return EXIT_FAIL
    payload = cocycle_to_dict(cocycle)
    payload["chain_trail"] = trail
    if args.out:
        save_scene(args.out, payload)
    else:
        json.dump(trail, sys.stdout, indent=1)
        print()
    return EXIT_PASS


def _stabilizer_from_dict(payload: dict, chart):
    from .dk import Stabilizer
    from .serialize import decode_array

    s_field = decode_array(payload["s"], chart)
    conns = [decode_array(enc, chart) for enc in payload.get("conn", [])]
    return Stabilizer(int(payload["e_rank"]), s_field, conns)


def _open_set_from_dict(payload: dict, chart):
    from .relative import OpenSet

    kind = payload.get("kind", "whole")
    if kind == "whole":
        return OpenSet.whole(chart)
    if kind == "empty":
        return OpenSet.empty(chart)
    if kind == "box":
        b = payload["boxes"][0]
        return OpenSet.box(chart, b["center"], b["core"], b["support"])
    if kind == "complement":
        boxes = [(b["center"], b["core"], b["support"]) for b in payload["boxes"]]
        return OpenSet.complement_of_boxes(chart, boxes)
    raise SceneError(f"unknown open-set kind {kind!r}")


def _cmd_relative_index(args) -> int:
    from .forms import integrate
    from .relative import box_integral, index_character, winding_number_box
    from .serialize import form_to_dict

    try:
        scene = load_scene(args.scene)
        a = superconnection_from_dict(scene["superconnection"])
        u = _open_set_from_dict(load_scene(args.open_set), a.chart)
    except (SceneError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    xi_shape = ("gauss", args.alpha) if args.xi == "gauss" else "bump"
    try:
        from .relative import core_min_gap

        gap = core_min_gap(a, u)
        chi = index_character(a, u, c=args.c_frac * gap, xi_shape=xi_shape)
    except SuperchernError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out = {
        "schema": 1,
        "type": "relative_index_report",
        "character": form_to_dict(chi.omega),
        "core_sup": float(np.abs(chi.omega.data[:, u.core]).max())
        if u.core.any()
        else 0.0,
    }
    if a.chart.dim == 2:
        out["total_period_over_2pii"] = repr(
            integrate(chi.omega, (0, 1)) / (2j * np.pi)
        )
        boxes = scene.get("oracle_boxes", [])
        oracle = []
        for b in boxes:
            center, radius = b["center"], b["radius"]
            per = box_integral(chi.omega, (0, 1), (center, radius)) / (2j * np.pi)
            t0 = a.term0_field()
            field = t0[..., 1, 0] if a.rank >= 2 else t0[..., 0, 0]
            w = winding_number_box(field, a.chart, (center, radius))
            oracle.append(
                {"center": center, "period_over_2pii": repr(per), "winding": w}
            )
        out["oracle_boxes"] = oracle
    if args.out:
        save_scene(args.out, out)
    else:
        print(json.dumps({k: v for k, v in out.items() if k != "character"}, indent=1))
    return EXIT_PASS


def _cmd_spectral_table(args) -> int:
    from .spectral import DiracModel, TruncatedOperator, parametrix_test

    cutoffs = tuple(int(x) for x in args.cutoffs.split(","))

    def factory(n):
        ref = DiracModel(n, twist=args.twist)
        p = TruncatedOperator(ref.matrix(), ref)
        w = ref.spectrum
        fw = np.where(np.abs(w) > 0.25, 1.0 / np.where(w == 0, 1.0, w), 0.0)
        q = TruncatedOperator(np.diag(fw.astype(complex)), ref)
        return p, q

    report = parametrix_test(factory, cutoffs=cutoffs)
    rows = [("table", "N", "k", "s", "norm")]
    for name, table in report["tables"].items():
        for n, k, s, v in table:
            rows.append((name, n, k, s, f"{v:.6e}"))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
    else:
        csv.writer(sys.stdout).writerows(rows)
    print(
        json.dumps({k: v["classification"] for k, v in report["trends"].items()}),
        file=sys.stderr,
    )
    return EXIT_PASS


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="superchern",
        description="verification suites for the superconnection calculus",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="run a named verification suite")
    p_verify.add_argument("suite", choices=sorted(SUITES) + ["all"])
    p_verify.add_argument("--grid", type=int, default=None)
    p_verify.add_argument("--tol", type=float, default=1.0, help="tolerance scale")
    p_verify.add_argument("--seed", type=int, default=42)
    p_verify.add_argument("--out", default=None)
    p_verify.add_argument("--format", choices=("json", "csv"), default="json")
    p_verify.add_argument("--config", default=None, help="JSON config overriding flags")

    p_dk = sub.add_parser("dk", help="differential K-cocycle tools")
    dk_sub = p_dk.add_subparsers(dest="dk_command", required=True)
    p_chain = dk_sub.add_parser("apply-chain", help="apply a relation chain")
    p_chain.add_argument("--cocycle", required=True)
    p_chain.add_argument("--chain", required=True)
    p_chain.add_argument("--out", default=None)

    p_rel = sub.add_parser("relative", help="relative index tools")
    rel_sub = p_rel.add_subparsers(dest="rel_command", required=True)
    p_idx = rel_sub.add_parser("index", help="emit the relative index character")
    p_idx.add_argument("--scene", required=True)
    p_idx.add_argument("--open-set", required=True, dest="open_set")
    p_idx.add_argument("--xi", choices=("bump", "gauss"), default="gauss")
    p_idx.add_argument("--alpha", type=float, default=10.5)
    p_idx.add_argument("--c-frac", type=float, default=0.75, dest="c_frac",
                       help="parametrix window as a fraction of the core gap")
    p_idx.add_argument("--out", default=None)

    p_spec = sub.add_parser("spectral", help="spectral-scale diagnostics")
    spec_sub = p_spec.add_subparsers(dest="spec_command", required=True)
    p_table = spec_sub.add_parser("table", help="norm tables across cutoffs")
    p_table.add_argument("--cutoffs", default="8,16,32,64")
    p_table.add_argument("--twist", type=float, default=0.5)
    p_table.add_argument("--out", default=None)

    p_tw = sub.add_parser("twisted", help="gerbe and twisted-calculus checks")
    tw_sub = p_tw.add_subparsers(dest="tw_command", required=True)
    p_twv = tw_sub.add_parser("verify", help="run the twisted suite")
    p_twv.add_argument("--grid", type=int, default=None)
    p_twv.add_argument("--tol", type=float, default=1.0)
    p_twv.add_argument("--seed", type=int, default=42)
    p_twv.add_argument("--out", default=None)
    p_twv.add_argument("--format", choices=("json", "csv"), default="json")

    args = parser.parse_args(argv)
    try:
        if args.command == "verify":
            if args.suite == "all":
                from .suites import run_many

                configs = [
                    SuiteConfig(suite=name, seed=args.seed, grid=args.grid, tol_scale=args.tol)
                    for name in sorted(SUITES)
                ]
                worst = EXIT_PASS
                for report in run_many(configs):
                    out = None
                    if args.out:
                        stem, dot, ext = args.out.rpartition(".")
                        out = f"{stem}-{report.suite}.{ext}" if dot else f"{args.out}-{report.suite}"
                    _write_report(report, out, args.format)
                    if not report.passed:
                        worst = EXIT_FAIL
                return worst
            return _cmd_verify(args)
        if args.command == "dk":
            return _cmd_dk_chain(args)
        if args.command == "relative":
            return _cmd_relative_index(args)
        if args.command == "spectral":
            return _cmd_spectral_table(args)
        if args.command == "twisted":
            args.suite = "twisted"
            args.format = getattr(args, "format", "json")
            return _cmd_verify(args)
    except SceneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
