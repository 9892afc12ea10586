"""Command-line front end.

Exit codes: 0 all checks passed, 1 a check failed, 2 the input could not be
parsed, 3 a precondition was violated, 4 the theory lacks a needed
capability (for example no braiding exists).

Reports are JSON. With ``--out`` the JSON goes to that file and a short
summary to stdout; otherwise the JSON goes to stdout and the summary to
stderr.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import category as cat
from . import protocols as proto
from .algebra import EPS_CHECK, EPS_SOLVER
from .errors import AnyonError, CapabilityError, PreconditionError, StructuralError
from .theories import (
    braiding_class_from_dict,
    braiding_class_to_dict,
    build_theory,
    solve_hexagon,
)

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_PRECONDITION, EXIT_CAPABILITY = 0, 1, 2, 3, 4
DEFAULT_RESTARTS = 200

EXIT_HELP = """
\b
Exit codes:
  0  all checks passed
  1  a check failed
  2  malformed input file
  3  precondition violated (e.g. odd N)
  4  capability missing (e.g. braided mode without a braiding)
"""


class Abort(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _cplx(z) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


# ---------------------------------------------------------------- theory loading


def theory_options(f):
    f = click.option("--in", "in_path", type=click.Path(dir_okay=False), help="Theory JSON file.")(f)
    f = click.option("--kappa", type=click.Choice(["+1", "-1", "1"]), default="+1", show_default=True)(f)
    f = click.option("--n", type=int, default=None, help="TY rank (Z2^n) or cyclic order for ty-cyclic.")(f)
    f = click.option(
        "--theory",
        type=click.Choice(["ising", "ty", "ty-cyclic"]),
        default=None,
        help="Built-in theory; ty-cyclic is the Tambara-Yamagami ring over Z_n.",
    )(f)
    return f


def load_theory(theory, n, kappa, in_path) -> cat.SkeletalData:
    if (theory is None) == (in_path is None):
        raise Abort(EXIT_PRECONDITION, "give exactly one of --theory or --in")
    if in_path is not None:
        try:
            text = Path(in_path).read_text()
        except OSError as exc:
            raise Abort(EXIT_PARSE, f"cannot read {in_path}: {exc}") from exc
        return cat.loads(text)
    kappa = int(kappa)
    if theory == "ising":
        return build_theory("ising", kappa=kappa)
    if theory == "ty":
        return build_theory("ty", 1 if n is None else n, kappa)
    if n is None:
        raise Abort(EXIT_PRECONDITION, "ty-cyclic needs --n")
    return build_theory("abelian_group", n, kappa)


def cache_dir(out: str | None) -> Path:
    env = os.environ.get("ANYONSIM_CACHE_DIR")
    if env:
        return Path(env)
    if out:
        return Path(out).resolve().parent / ".anyonsim-cache"
    return Path.home() / ".cache" / "anyonsim"


def f_data_hash(data: cat.SkeletalData) -> str:
    obj = cat.to_dict(data)
    obj.pop("R", None)
    obj.pop("name", None)
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def solve_cached(data: cat.SkeletalData, seed: int, restarts: int, out: str | None):
    """Braiding classes for ``data``, read from or written to the solver cache."""
    key = f"{f_data_hash(data)[:24]}-s{seed}-r{restarts}"
    path = cache_dir(out) / f"{key}.json"
    if path.exists():
        try:
            items = json.loads(path.read_text())
            return [braiding_class_from_dict(data, obj) for obj in items]
        except (ValueError, StructuralError):
            pass  # unreadable cache entry, recompute
    classes = solve_hexagon(data, seed=seed, restarts=restarts)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps([braiding_class_to_dict(data, c) for c in classes], sort_keys=True))
    except OSError:
        pass  # caching is an optimisation only
    return classes


def braided_theory(data: cat.SkeletalData, seed: int, out: str | None) -> cat.SkeletalData:
    if data.braided:
        return data
    classes = solve_cached(data, 0, DEFAULT_RESTARTS, out)
    if not classes:
        raise CapabilityError(f"no braiding found for {data.name}")
    return classes[0].theory(data)


def emit(report: dict, summary: list[str], out: str | None) -> None:
    text = json.dumps(report, indent=1, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
        for line in summary:
            click.echo(line)
    else:
        click.echo(text, nl=False)
        for line in summary:
            click.echo(line, err=True)


def run(body):
    """Translate library errors into the exit-code contract."""
    try:
        code = body()
    except Abort as exc:
        click.echo(f"error: {exc}", err=True)
        code = exc.code
    except StructuralError as exc:
        click.echo(f"parse error: {exc}", err=True)
        code = EXIT_PARSE
    except CapabilityError as exc:
        click.echo(f"capability error: {exc}", err=True)
        code = EXIT_CAPABILITY
    except (PreconditionError, AnyonError) as exc:
        click.echo(f"precondition error: {exc}", err=True)
        code = EXIT_PRECONDITION
    sys.exit(code)


# ---------------------------------------------------------------- commands


@click.group(epilog=EXIT_HELP)
def main():
    """Anyon theories, hexagon solving and braided/braid-free protocols."""


@main.command(epilog=EXIT_HELP)
@theory_options
@click.option("--eps", type=float, default=EPS_CHECK, show_default=True, help="Tolerance for all checks.")
@click.option("--out", type=click.Path(dir_okay=False))
def verify(theory, n, kappa, in_path, eps, out):
    """Consistency report: pentagon, hexagon, unitarity, dimensions, spins, FS indicators."""

    def body():
        data = load_theory(theory, n, kappa, in_path)
        report, ok = verify_report(data, eps)
        summary = [f"{data.name}: {'PASS' if ok else 'FAIL'}"] + [
            f"  {k}: {report[k]}" for k in ("pentagon_residual", "f_unitary", "dimension_identity_residual")
        ]
        emit(report, summary, out)
        return EXIT_OK if ok else EXIT_FAIL

    run(body)


def verify_report(data: cat.SkeletalData, eps: float) -> tuple[dict, bool]:
    rules = data.rules
    violations = cat.validate_fusion_rules(rules)
    pent, _ = cat.check_pentagon(data)
    dims = cat.quantum_dimensions(rules)
    dim_res = cat.dimension_identity_residual(rules)
    unitary = cat.check_f_unitary(data, eps)
    report = {
        "theory_id": data.name,
        "labels": list(rules.labels),
        "fusion_rule_violations": violations,
        "pentagon_residual": pent,
        "f_unitary": unitary,
        "triangle": cat.check_triangle(data, eps),
        "quantum_dimensions": [float(x) for x in dims],
        "dimension_identity_residual": dim_res,
        "total_dimension": cat.total_dimension(rules),
        "braided": data.braided,
    }
    ok = not violations and pent < eps and unitary and report["triangle"] and dim_res < eps
    try:
        t, fs = cat.pivotal_and_fs(data, eps)
        report["pivotal"] = [_cplx(z) for z in t]
        report["fs_indicators"] = {rules.labels[a]: v for a, v in sorted(fs.items())}
    except AnyonError as exc:
        report["pivotal_error"] = str(exc)
        ok = False
    if data.braided:
        hexa, _ = cat.check_hexagon(data)
        report["hexagon_residual"] = hexa
        ok = ok and hexa < max(eps, EPS_SOLVER)
        try:
            report["spins"] = [_cplx(z) for z in cat.topological_spins(data, max(eps, EPS_SOLVER))]
            S, modular = cat.s_matrix(data, max(eps, EPS_SOLVER))
            report["s_matrix"] = [[_cplx(z) for z in row] for row in S]
            report["modular"] = modular
        except AnyonError as exc:
            report["spin_error"] = str(exc)
            ok = False
    report["pass"] = bool(ok)
    return report, bool(ok)


@main.command(epilog=EXIT_HELP)
@theory_options
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True)
@click.option("--restarts", type=click.IntRange(1), default=DEFAULT_RESTARTS, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False))
def solve(theory, n, kappa, in_path, seed, restarts, out):
    """Enumerate gauge classes of braidings for the theory's F-data.

    An empty list is evidence, not proof, that no braiding exists.
    """

    def body():
        data = load_theory(theory, n, kappa, in_path)
        classes = solve_cached(data, seed, restarts, out)
        report = {
            "theory_id": data.name,
            "seed": seed,
            "restarts": restarts,
            "count": len(classes),
            "classes": [braiding_class_to_dict(data, c) for c in classes],
            "note": "an empty result is numerical evidence of nonexistence, not a proof",
        }
        emit(report, [f"{data.name}: {len(classes)} braiding classes ({restarts} restarts, seed {seed})"], out)
        return EXIT_OK

    run(body)


def _protocol_options(f):
    f = click.option("--out", type=click.Path(dir_okay=False))(f)
    f = click.option("--workers", type=click.IntRange(1), default=1, show_default=True, help="Threads for --sweep.")(f)
    f = click.option("--sweep", is_flag=True, help="Enumerate every forced outcome instead of sampling.")(f)
    f = click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True)(f)
    f = click.option("--mode", type=click.Choice(["braided", "braid-free"]), required=True)(f)
    f = click.option("--eps", type=float, default=EPS_CHECK, show_default=True)(f)
    return f


def _protocol_theory(mode, theory, n, kappa, in_path, seed, out):
    if theory is None and in_path is None:
        theory = "ising" if mode == "braided" else "ty"
    data = load_theory(theory, n, kappa, in_path)
    if mode == "braided":
        data = braided_theory(data, seed, out)
    return data


@main.command(epilog=EXIT_HELP)
@theory_options
@_protocol_options
@click.option("--N", "n_anyons", type=int, default=None, help="Anyons to teleport (braid-free mode).")
@click.option("--p", "p", type=int, default=None, help="Qubits to teleport (braided mode).")
def teleport(theory, n, kappa, in_path, eps, mode, seed, sweep, workers, out, n_anyons, p):
    """Teleport a seeded random register, sampled or swept over all outcomes."""

    def body():
        count = n_anyons if n_anyons is not None else 2 * (p if p is not None else 1)
        if count <= 0 or count % 2:
            raise Abort(EXIT_PRECONDITION, f"N must be even and positive, got {count}")
        data = _protocol_theory(mode, theory, n, kappa, in_path, seed, out)
        rng = np.random.default_rng(seed)
        phi = proto.random_qudits(data, count // 2, rng)
        fn = proto.teleport_braided if mode == "braided" else proto.teleport_braidfree
        if sweep:
            runs = proto.sweep(fn, data, phi, workers=workers)
        else:
            runs = [fn(data, phi, rng=rng, seed=seed)]
        return _teleport_report(data, mode, seed, sweep, runs, eps, out)

    run(body)


def _teleport_report(data, mode, seed, sweep, runs, eps, out):
    fids = [r.fidelity for r in runs]
    d = len(proto.group_labels(data))
    prob_err = max(abs(p - 1 / d) for r in runs for p in r.probabilities)
    pre_ok = bool(all(r.pre_correction_ok is not False for r in runs))
    braid_free_ok = mode == "braided" or all(r.braids == 0 for r in runs)
    ok = min(fids) >= 1 - eps and pre_ok and braid_free_ok and (not sweep or prob_err < eps)
    report = {
        "protocol": f"teleport_{mode.replace('-', '_')}",
        "theory_id": data.name,
        "seed": seed,
        "sweep": sweep,
        "records": len(runs),
        "min_fidelity": min(fids),
        "max_probability_error": prob_err,
        "pre_correction_verified": pre_ok,
        "runs": [r.to_dict() for r in runs],
        "pass": bool(ok),
    }
    summary = [
        f"teleport ({mode}) on {data.name}: {len(runs)} record(s), min fidelity {min(fids):.15f}",
        f"  {'PASS' if ok else 'FAIL'}",
    ]
    emit(report, summary, out)
    return EXIT_OK if ok else EXIT_FAIL


@main.command(epilog=EXIT_HELP)
@theory_options
@_protocol_options
@click.option("--i", "i", type=int, default=None, help="First dit (label index).")
@click.option("--j", "j", type=int, default=None, help="Second dit (label index).")
def sdc(theory, n, kappa, in_path, eps, mode, seed, sweep, workers, out, i, j):
    """Superdense coding of two dits, one pair or all pairs with --sweep."""

    def body():
        data = _protocol_theory(mode, theory, n, kappa, in_path, seed, out)
        labels = proto.group_labels(data)
        fn = proto.sdc_braided if mode == "braided" else proto.sdc_braidfree
        if sweep:
            pairs = [(a, b) for a in labels for b in labels]
        elif i is not None and j is not None:
            pairs = [(i, j)]
        else:
            rng = np.random.default_rng(seed)
            pairs = [tuple(int(x) for x in rng.choice(labels, size=2))]
        runs = [fn(data, a, b, seed=seed) for a, b in pairs]
        good = sum(r.success and r.stray_mass < eps for r in runs)
        braid_free_ok = mode == "braided" or all(r.braids == 0 for r in runs)
        ok = good == len(runs) and braid_free_ok
        report = {
            "protocol": f"sdc_{mode.replace('-', '_')}",
            "theory_id": data.name,
            "seed": seed,
            "sweep": sweep,
            "decoded": good,
            "total": len(runs),
            "runs": [r.to_dict() for r in runs],
            "pass": bool(ok),
        }
        emit(report, [f"sdc ({mode}) on {data.name}: {good}/{len(runs)} decoded", f"  {'PASS' if ok else 'FAIL'}"], out)
        return EXIT_OK if ok else EXIT_FAIL

    run(body)


@main.command(epilog=EXIT_HELP)
@theory_options
@click.option("--braiding", type=int, default=None, help="Attach solver class K (0-based) as R-data.")
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False))
def export(theory, n, kappa, in_path, braiding, seed, out):
    """Write a theory in the JSON theory format."""

    def body():
        data = load_theory(theory, n, kappa, in_path)
        if braiding is None:
            text = cat.dumps(data)
        else:
            classes = solve_cached(data, seed, DEFAULT_RESTARTS, out)
            if not 0 <= braiding < len(classes):
                raise CapabilityError(f"{data.name} has {len(classes)} braiding classes, no class {braiding}")
            text = json.dumps(braiding_class_to_dict(data, classes[braiding]), indent=1, sort_keys=True)
        if out:
            Path(out).write_text(text + "\n")
            click.echo(f"wrote {data.name} to {out}")
        else:
            click.echo(text)
        return EXIT_OK

    run(body)


@main.command("import-check", epilog=EXIT_HELP)
@click.option("--in", "in_path", type=click.Path(dir_okay=False), required=True)
@click.option("--eps", type=float, default=EPS_CHECK, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False))
def import_check(in_path, eps, out):
    """Parse a theory file, check its fusion rules and that it re-exports unchanged."""

    def body():
        data = load_theory(None, None, "+1", in_path)
        again = cat.loads(cat.dumps(data))
        diff = max(
            (float(np.max(np.abs(data.F[k].matrix - again.F[k].matrix))) for k in data.F),
            default=0.0,
        )
        if data.R is not None:
            diff = max([diff] + [abs(data.R[ab][c] - again.R[ab][c]) for ab in data.R for c in data.R[ab]])
        violations = cat.validate_fusion_rules(data.rules)
        ok = diff == 0.0 and not violations
        report = {
            "theory_id": data.name,
            "labels": list(data.rules.labels),
            "f_tuples": len(data.F),
            "braided": data.braided,
            "round_trip_max_diff": diff,
            "fusion_rule_violations": violations,
            "pass": ok,
        }
        emit(report, [f"{data.name}: {'PASS' if ok else 'FAIL'} (round-trip diff {diff})"], out)
        return EXIT_OK if ok else EXIT_FAIL

    run(body)
