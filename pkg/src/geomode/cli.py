"""Command-line interface.

Subcommands: evolve, enumerate, check, scan, plateau, simulate-counts,
ingest, fidelity.  Global flags: --config, --seed, --out-dir, --jobs.
All emitted JSON is deterministic: floats are serialized with 17
significant digits and re-running a command reproduces byte-identical
files.

The system definition comes from ``--config`` (a JSON file, see
``coupledmode.system_from_json``) or the built-in ``paper-jx4`` preset:
the calibrated four-waveguide Jx structure at its ideal length.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import coupledmode as cm
from . import enumeration as en
from . import experiment as xp
from . import holonomy as hol
from . import reference as ref
from .fock import ParticleType, enumerate_basis

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CAP = 3
EXIT_NOT_CYCLIC = 4
EXIT_NOT_HOLONOMIC = 5

PRESET_NAME = "paper-jx4"


class CommandError(Exception):
    def __init__(self, kind: str, message: str, code: int = EXIT_CONFIG):
        super().__init__(message)
        self.kind = kind
        self.code = code


# ------------------------------------------------------- deterministic JSON


def _format_scalar(x) -> str:
    if x is None:
        return "null"
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        v = float(x)
        if v != v or v in (float("inf"), float("-inf")):
            return "null"
        return format(v, ".17g")
    raise TypeError(f"cannot serialize {type(x)!r}")


def dumps_json(obj, indent: int = 0) -> str:
    """JSON with 17-significant-digit floats (byte-stable re-runs)."""
    pad = " " * indent
    inner = " " * (indent + 2)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = [f"{inner}{json.dumps(str(k))}: {dumps_json(v, indent + 2)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(parts) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)) or isinstance(obj, np.ndarray):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating, type(None), bool))
               for v in seq):
            return "[" + ", ".join(_format_scalar(v) for v in seq) + "]"
        parts = [f"{inner}{dumps_json(v, indent + 2)}" for v in seq]
        return "[\n" + ",\n".join(parts) + f"\n{pad}]"
    if isinstance(obj, complex):
        return "[" + _format_scalar(obj.real) + ", " + _format_scalar(obj.imag) + "]"
    if isinstance(obj, str):
        return json.dumps(obj)
    return _format_scalar(obj)


def write_json(path: Path, obj) -> None:
    path.write_text(dumps_json(obj) + "\n")


def _matrix_json(m: np.ndarray):
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(m, dtype=complex)]


# ---------------------------------------------------------------- plumbing


def load_config(args) -> dict:
    if not args.config:
        return {"preset": PRESET_NAME}
    try:
        doc = json.loads(Path(args.config).read_text())
    except FileNotFoundError:
        raise CommandError("invalid-config", f"config file {args.config} not found")
    except json.JSONDecodeError as exc:
        raise CommandError("invalid-config", f"config is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise CommandError("invalid-config", "config must be a JSON object")
    return doc


def build_system(config: dict, length_mm: float | None = None):
    """(system, structure_factory) from a config document.

    The preset produces the structure *family* (ramps fixed, middle
    section varied); a file-defined system scans by truncating its
    envelope at the requested propagation length.
    """
    preset = config.get("preset")
    if preset is not None:
        if preset != PRESET_NAME:
            raise CommandError("invalid-config", f"unknown preset {preset!r}")
        omega = float(config.get("omega_flat_per_mm", cm.FLAT_COUPLING_PER_MM))

        def factory(length):
            return cm.jx4_structure(length, omega_flat=omega)

        length = length_mm if length_mm is not None else float(
            config.get("length_mm", cm.IDEAL_LENGTH_MM))
        try:
            return factory(length), factory
        except ValueError as exc:
            raise CommandError("invalid-config", str(exc))
    try:
        system = cm.system_from_json(config)
    except (ValueError, KeyError) as exc:
        raise CommandError("invalid-config", f"bad system definition: {exc}")

    def truncating_factory(length):
        return cm.CoupledModeSystem(
            system.pattern,
            cm.truncate_envelope(system.envelope, length),
            system.static_pattern,
        )

    return system, truncating_factory


def load_subspace(args) -> hol.Subspace:
    if not getattr(args, "subspace", None):
        raise CommandError("invalid-arguments", "this command needs --subspace FILE")
    try:
        doc = json.loads(Path(args.subspace).read_text())
        return hol.subspace_from_json(doc, modes=4)
    except FileNotFoundError:
        raise CommandError("invalid-arguments", f"subspace file {args.subspace} not found")
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise CommandError("invalid-arguments", f"bad subspace definition: {exc}")


def out_dir(args) -> Path:
    path = Path(args.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _particle_type(kind: str, particles: int) -> ParticleType:
    if kind == "distinguishable":
        return ParticleType.distinguishable(*"abcdefgh"[:particles])
    return ParticleType(kind)


def _parse_lengths(args) -> np.ndarray:
    if getattr(args, "grid", None):
        try:
            lo, hi, step = (float(v) for v in args.grid.split(":"))
        except ValueError:
            raise CommandError("invalid-arguments", "--grid expects LO:HI:STEP")
        return np.arange(lo, hi + step / 2, step)
    if getattr(args, "lengths", None):
        try:
            vals = [float(v) for v in args.lengths.split(",")]
        except ValueError:
            raise CommandError("invalid-arguments", "--lengths expects comma-separated numbers")
        return np.asarray(vals)
    return np.asarray(cm.STRUCTURE_LENGTHS_MM)


def _detection(args) -> xp.DetectionModel:
    ratios = xp.CALIBRATED_SPLITTERS if args.splitters == "calibrated" else (0.5,) * 4
    return xp.DetectionModel(splitter_ratios=ratios, trials=args.trials, seed=args.seed)


def _scan_inputs(sub: hol.Subspace, args) -> list[xp.InputSpec]:
    stats = "distinguishable" if getattr(args, "distinguishable", False) else None
    prep = "hom_bunched" if getattr(args, "hom_bunched", False) else "direct"
    specs = []
    members = sub.members
    if getattr(args, "inputs", None):
        wanted = args.inputs.split(",")
        if sub.particle.kind == "distinguishable":
            by_occ = {
                "".join(f"{lab}{m + 1}" for lab, m in zip(sub.particle.labels, s.occupations)): s
                for s in members
            }
        else:
            by_occ = {"".join(str(n) for n in m.occupations): m for m in members}
        try:
            members = [by_occ[w] for w in wanted]
        except KeyError as exc:
            raise CommandError("invalid-arguments", f"input {exc} is not a subspace member")
    for m in members:
        use_prep = prep if (prep == "direct" or (m.particle.kind == "boson"
                                                 and 2 in m.occupations)) else "direct"
        specs.append(xp.InputSpec(m, preparation=use_prep,
                                  visibility=args.visibility, statistics=stats))
    return specs


# ---------------------------------------------------------------- commands


def cmd_evolve(args) -> int:
    config = load_config(args)
    if (args.delta is None) == (args.length is None):
        raise CommandError("invalid-arguments", "evolve needs exactly one of --delta/--length")
    if args.delta is not None:
        system, _ = build_system(config)
        u = system.pattern.unitary(args.delta)
        delta = args.delta
    else:
        system, factory = build_system(config, length_mm=args.length)
        if config.get("preset") is None:
            if args.length > system.length + 1e-9:
                raise CommandError("invalid-arguments",
                                   f"--length exceeds the configured system ({system.length} mm)")
            op = cm.evolve(system, 0.0, args.length)
        else:
            op = cm.evolve(system)
        u, delta = op.matrix, op.delta
    doc = {"modes": u.shape[0], "delta": float(delta), "matrix": _matrix_json(u)}
    write_json(out_dir(args) / "evolution.json", doc)
    print(dumps_json(doc))
    return EXIT_OK


def cmd_enumerate(args) -> int:
    config = load_config(args)
    system, _ = build_system(config)
    ptype = _particle_type(args.type, args.particles)
    try:
        basis = enumerate_basis(system.modes, args.particles, ptype)
    except ValueError as exc:
        raise CommandError("invalid-arguments", str(exc))
    try:
        report = en.enumerate_holonomic(system, basis, cap=args.cap)
    except en.EnumerationCapError as exc:
        print(f"error[cap-exceeded]: {exc}", file=sys.stderr)
        return EXIT_CAP
    except en.UnsupportedEvolutionError as exc:
        raise CommandError("unsupported-structure", str(exc))
    doc = report.to_json()
    directory = out_dir(args)
    write_json(directory / "enumeration_report.json", doc)
    report.write_csv(directory / "enumeration_summary.csv")
    by_class = report.holonomic_by_class()
    print(f"{report.total_subspaces} total, {report.cyclic_subspaces} cyclic, "
          f"{report.holonomic_count} holonomic "
          f"(scalar={by_class[hol.SCALAR]}, diagonal={by_class[hol.DIAGONAL]}, "
          f"non_scalar={by_class[hol.NON_SCALAR]}); "
          f"dim>=2 holonomic={len(report.holonomic_records(2))}")
    return EXIT_OK


def cmd_check(args) -> int:
    config = load_config(args)
    system, _ = build_system(config)
    sub = load_subspace(args)
    cyc = hol.is_cyclic(sub, system)
    k = hol.k_matrix(sub, system)
    tol = hol.holonomic_tolerance(system)
    doc = {
        "subspace": hol.subspace_to_json(sub),
        "cyclic": bool(cyc.cyclic),
        "projector_residual": cyc.residual,
        "max_k": k.max_abs,
        "holonomic_tolerance": tol,
        "holonomic": bool(cyc.cyclic and k.max_abs < tol),
    }
    code = EXIT_OK
    if not cyc.cyclic:
        doc["verdict"] = "not-cyclic"
        code = EXIT_NOT_CYCLIC
    elif k.max_abs >= tol:
        mi, ni = k.worst_element()
        doc["verdict"] = "cyclic-not-holonomic"
        doc["worst_element"] = [sub.members[mi].label(), sub.members[ni].label()]
        code = EXIT_NOT_HOLONOMIC
    else:
        h = hol.extract_holonomy(sub, system)
        doc["verdict"] = "holonomic"
        doc["classification"] = h.classification
        doc["holonomy"] = _matrix_json(h.matrix)
    write_json(out_dir(args) / "check_report.json", doc)
    print(f"cyclic: {doc['cyclic']}  max|K|: {k.max_abs:.3e}  verdict: {doc['verdict']}")
    if code == EXIT_OK:
        print(f"classification: {doc['classification']}")
        for row in doc["holonomy"]:
            print("  " + "  ".join(f"{re:+.3f}{im:+.3f}i" for re, im in row))
    elif code == EXIT_NOT_HOLONOMIC:
        print(f"error[not-holonomic]: max|K| {k.max_abs:.6e} at element "
              f"{doc['worst_element']}", file=sys.stderr)
    else:
        print(f"error[not-cyclic]: projector residual {cyc.residual:.6e}", file=sys.stderr)
    return code


def _run_scan(args, mode: str):
    config = load_config(args)
    _, factory = build_system(config)
    sub = load_subspace(args)
    specs = _scan_inputs(sub, args)
    lengths = _parse_lengths(args)
    detection = _detection(args)
    if args.jobs > 1 and mode == "theory" and len(specs) > 1:
        engine = xp.CurveEngine(lengths, factory)

        def one(spec):
            return spec.label(), engine.success_curve(sub, spec)

        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            pairs = list(pool.map(one, specs))  # ordered collection
        result = xp.ScanResult(sub, "theory")
        for label, curve in pairs:
            result.curves[label] = [
                xp.ScanPoint(float(length), float(p), 0.0)
                for length, p in zip(lengths, curve)
            ]
        return sub, result
    result = xp.scan(sub, specs, lengths, mode=mode, detection=detection,
                     structure_factory=factory)
    return sub, result


def cmd_scan(args) -> int:
    mode = "synthetic-experiment" if args.mode == "synthetic" else "theory"
    try:
        sub, result = _run_scan(args, mode)
    except ValueError as exc:
        raise CommandError("invalid-arguments", str(exc))
    directory = out_dir(args)
    write_json(directory / "scan_result.json", result.to_json())
    result.write_csv(directory / "scan_curves.csv")
    for label, points in result.curves.items():
        peak = max((p for p in points if p.probability is not None),
                   key=lambda p: p.probability, default=None)
        desc = "all points undefined" if peak is None else \
            f"peak {peak.probability:.4f} at {peak.length_mm:g} mm"
        print(f"{label}: {len(points)} points, {desc}")
    return EXIT_OK


def _table_comparison_doc(grid_step: float):
    comps = ref.compare_reference_widths(grid_step=grid_step)
    rows = []
    for c in comps:
        rows.append({
            "subspace": c.row.key(),
            "restricted_mm": c.restricted_mm,
            "restricted_reference_mm": c.row.restricted_mm,
            "restricted_pass": c.restricted_ok,
            "unrestricted_mm": c.unrestricted_mm,
            "unrestricted_reference_mm": c.row.unrestricted_mm,
            "unrestricted_pass": c.unrestricted_ok,
        })
    non_h = [
        {"subspace": row.key(), "unrestricted_mm": width,
         "classified_non_holonomic": width <= ref.NON_HOLONOMIC_WIDTH_MM}
        for row, width in ref.non_holonomic_widths(grid_step=grid_step)
    ]
    system = cm.jx4_structure(cm.IDEAL_LENGTH_MM)
    basis = enumerate_basis(4, 2, ParticleType.boson())
    census = en.enumerate_holonomic(system, basis)
    by_class = census.holonomic_by_class()
    return {
        "tolerance": "max(15%, 1.5 mm)",
        "rows": rows,
        "non_holonomic_rows": non_h,
        "holonomy_census": {
            "enumerated_dim_ge_2": len(census.holonomic_records(2)),
            "enumerated_non_scalar": by_class[hol.NON_SCALAR],
            "enumerated_scalar_dim_ge_2": sum(
                1 for r in census.holonomic_records(2)
                if r.classification == hol.SCALAR),
            "catalogued_subspaces": sum(
                1 for r in ref.REFERENCE_WIDTHS if r.statistics == ref.INDIST),
            "stated_non_abelian_count": ref.STATED_NON_ABELIAN_COUNT,
        },
        "all_pass": all(r["restricted_pass"] and r["unrestricted_pass"] for r in rows)
        and all(r["classified_non_holonomic"] for r in non_h),
    }


def cmd_plateau(args) -> int:
    directory = out_dir(args)
    if args.table_s2:
        doc = _table_comparison_doc(args.table_grid_step)
        write_json(directory / "plateau_table.json", doc)
        print(f"{'subspace':55s} {'restricted':>18s} {'unrestricted':>18s}")
        for row in doc["rows"]:
            rtxt = f"{row['restricted_mm']:6.2f}/{row['restricted_reference_mm']:5.1f} " \
                   f"{'ok' if row['restricted_pass'] else 'FAIL'}"
            utxt = f"{row['unrestricted_mm']:6.2f}/{row['unrestricted_reference_mm']:5.1f} " \
                   f"{'ok' if row['unrestricted_pass'] else 'FAIL'}"
            print(f"{row['subspace']:55s} {rtxt:>18s} {utxt:>18s}")
        for row in doc["non_holonomic_rows"]:
            verdict = "ok" if row["classified_non_holonomic"] else "FAIL"
            print(f"{row['subspace']:55s} non-holonomic width "
                  f"{row['unrestricted_mm']:5.2f} mm {verdict}")
        census = doc["holonomy_census"]
        print(f"holonomy census: {census['enumerated_dim_ge_2']} holonomic cyclic "
              f"subspaces of dim >= 2 ({census['enumerated_non_scalar']} non-scalar, "
              f"{census['enumerated_scalar_dim_ge_2']} scalar); catalogue lists "
              f"{census['catalogued_subspaces']}; stated non-Abelian count "
              f"{census['stated_non_abelian_count']}")
        print(f"all_pass: {doc['all_pass']}")
        return EXIT_OK
    rule = xp.THEORY_RULE if args.rule == "theory" else xp.EXPERIMENTAL_RULE
    mode = "synthetic-experiment" if args.mode == "synthetic" else "theory"
    if rule == xp.THEORY_RULE and not args.grid and not args.lengths:
        args.grid = "60:115:0.01"
    try:
        sub, result = _run_scan(args, mode)
        report = xp.plateau_report(result, rule,
                                   clip=(args.clip_lo, args.clip_hi)
                                   if args.clip_lo is not None else None)
    except ValueError as exc:
        raise CommandError("invalid-arguments", str(exc))
    write_json(directory / "plateau_report.json", report.to_json())
    for label, interval in report.per_input.items():
        print(f"{label}: plateau [{interval.start:.2f}, {interval.end:.2f}] mm, "
              f"width {interval.width:.2f} mm")
    print(f"mean width: {report.mean_width:.2f} mm")
    return EXIT_OK


def cmd_simulate_counts(args) -> int:
    config = load_config(args)
    _, factory = build_system(config)
    sub = load_subspace(args)
    specs = _scan_inputs(sub, args)
    lengths = _parse_lengths(args)
    try:
        rows = xp.simulate_counts(sub, specs, lengths, detection=_detection(args),
                                  structure_factory=factory)
    except ValueError as exc:
        raise CommandError("invalid-arguments", str(exc))
    path = out_dir(args) / "counts.csv"
    xp.write_counts_csv(path, rows)
    print(f"wrote {len(rows)} count records to {path}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    sub = load_subspace(args)
    if not args.counts:
        raise CommandError("invalid-arguments", "ingest needs --counts FILE")
    try:
        result = xp.ingest_counts(args.counts, sub, _detection(args))
    except FileNotFoundError:
        raise CommandError("invalid-arguments", f"count file {args.counts} not found")
    except ValueError as exc:
        raise CommandError("invalid-arguments", str(exc))
    directory = out_dir(args)
    write_json(directory / "ingested_scan.json", result.to_json())
    result.write_csv(directory / "ingested_curves.csv")
    n_points = sum(len(v) for v in result.curves.values())
    print(f"ingested {n_points} points over {len(result.curves)} input states")
    return EXIT_OK


def _load_distribution(path: str):
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise CommandError("invalid-arguments", f"distribution file {path} not found")
    except json.JSONDecodeError as exc:
        raise CommandError("invalid-arguments", f"bad distribution JSON: {exc}")
    return doc


def cmd_fidelity(args) -> int:
    p = _load_distribution(args.theory)
    q = _load_distribution(args.experiment)
    if isinstance(p, dict) and isinstance(q, dict):
        keys = sorted(set(p) | set(q))
        p = [float(p.get(k, 0.0)) for k in keys]
        q = [float(q.get(k, 0.0)) for k in keys]
    elif not (isinstance(p, list) and isinstance(q, list)):
        raise CommandError("invalid-arguments",
                           "distributions must both be JSON arrays or objects")
    try:
        f = xp.fidelity(p, q)
    except ValueError as exc:
        raise CommandError("invalid-arguments", str(exc))
    print(format(f, ".17g"))
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geomode",
        description="Multi-particle holonomies in coupled-mode lattices",
    )
    parser.add_argument("--config", help="system definition JSON (default: paper-jx4 preset)")
    parser.add_argument("--seed", type=int, default=xp.DEFAULT_SEED,
                        help="master random seed (default %(default)s)")
    parser.add_argument("--out-dir", default=".", help="directory for report files")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", help="print the single-particle evolution operator")
    p.add_argument("--delta", type=float, help="accumulated phase in radians")
    p.add_argument("--length", type=float, help="structure length in mm")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("enumerate", help="enumerate cyclic subspaces and classify them")
    p.add_argument("--particles", type=int, required=True)
    p.add_argument("--type", choices=["boson", "fermion", "distinguishable"],
                   default="boson")
    p.add_argument("--cap", type=int, default=en.ENUMERATION_CAP)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("check", help="cyclicity/holonomy verdict for a subspace")
    p.add_argument("--subspace", required=True, help="subspace JSON file")
    p.set_defaults(func=cmd_check)

    def add_scan_options(p, include_rule=False, subspace_required=True):
        p.add_argument("--subspace", required=subspace_required)
        p.add_argument("--inputs", help="comma-separated occupation strings (default: all)")
        p.add_argument("--lengths", help="comma-separated lengths in mm")
        p.add_argument("--grid", help="LO:HI:STEP dense length grid in mm")
        p.add_argument("--mode", choices=["theory", "synthetic"], default="theory")
        p.add_argument("--trials", type=int, default=100_000)
        p.add_argument("--splitters", choices=["ideal", "calibrated"], default="calibrated")
        p.add_argument("--distinguishable", action="store_true",
                       help="launch independent (heralded) photons")
        p.add_argument("--hom-bunched", action="store_true",
                       help="prepare bunched inputs on a balanced splitter")
        p.add_argument("--visibility", type=float,
                       default=xp.BUNCHED_PREPARATION_VISIBILITY)
        if include_rule:
            p.add_argument("--rule", choices=["theory", "experimental"], default="theory")
            p.add_argument("--clip-lo", type=float, default=None)
            p.add_argument("--clip-hi", type=float, default=None)

    p = sub.add_parser("scan", help="success-probability scan over structure length")
    add_scan_options(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("plateau", help="plateau extraction / reference table")
    p.add_argument("--table-s2", action="store_true",
                   help="recompute the bundled reference width table")
    p.add_argument("--table-grid-step", type=float, default=0.01)
    add_scan_options(p, include_rule=True, subspace_required=False)
    p.set_defaults(func=cmd_plateau)

    p = sub.add_parser("simulate-counts", help="write synthetic detector counts")
    add_scan_options(p)
    p.set_defaults(func=cmd_simulate_counts)

    p = sub.add_parser("ingest", help="rebuild probabilities from a count CSV")
    p.add_argument("--subspace", required=True)
    p.add_argument("--counts", required=True)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--splitters", choices=["ideal", "calibrated"], default="calibrated")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("fidelity", help="Bhattacharyya overlap of two distributions")
    p.add_argument("--theory", required=True)
    p.add_argument("--experiment", required=True)
    p.set_defaults(func=cmd_fidelity)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"error[{exc.kind}]: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
