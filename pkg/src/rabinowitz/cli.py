"""Command-line front end: ``rabinowitz --config run.ini --out results/``.

Each command writes a tab-separated table whose first line is a ``#``
comment naming the columns and units, plus ``run_summary.json`` with the
configuration, derived constants and library versions.

Exit codes: 0 success, 2 configuration error, 3 numeric failure,
4 validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import traceback
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .action import descend, fundamental_lemma_probe, refine_newton, seed_loop
from .cutoff import CutoffHamiltonian, admissible_constants
from .discriminant import SearchStats, check_nonresonant, components_of, find_chords, find_discriminant
from .errors import ConfigError, FlowError, PositivityError, RabinowitzError
from .geometry import validate_path
from .spectrum import chord_spectrum, circle_oracle, growth_rate, spectrum
from .symplectization import LiftedHamiltonian, pullback_residual, verify_liouville_identity

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VALIDATION = 0, 2, 3, 4

log = logging.getLogger("rabinowitz")


class ValidationFailure(Exception):
    pass


def fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.12g" % value
    return str(value)


def write_table(path, units, columns, rows):
    """Tab-separated table with a leading ``#`` units line and a header row."""
    with open(path, "w") as fh:
        fh.write(f"# {units}\n")
        fh.write("\t".join(columns) + "\n")
        for row in rows:
            fh.write("\t".join(fmt(v) for v in row) + "\n")


def _coords(x):
    return [float(v) for v in np.ravel(x)]


def _coord_names(model):
    return [f"x{j}" for j in range(model.ambient)]


def _search_args(cfg):
    return dict(
        seeds_per_unit=cfg.seeds_per_unit,
        seeds_per_dim=cfg.seeds_per_dim,
        tol=cfg.tolerances["newton"],
        integrate_tol=cfg.tolerances["integrate"],
        cluster_tol=cfg.tolerances["cluster"],
    )


def _chord_args(cfg):
    args = dict(tol=cfg.tolerances["newton"], integrate_tol=cfg.tolerances["integrate"])
    if cfg.source.get("seeds", {}).get("per_unit"):
        args["seeds_per_unit"] = cfg.seeds_per_unit
    return args


def _components_rows(points):
    rows = []
    for comp in components_of(points):
        rep = comp.members[0]
        rows.append(
            [comp.component_id, comp.eta, rep.action, *_coords(comp.representative), comp.size, comp.morse_bott_dim,
             comp.nondegenerate, max(p.residual_x for p in comp.members), max(p.residual_rho for p in comp.members)]
        )
    return rows


def cmd_validate(cfg, spec, out, rng, summary):
    report = validate_path(spec.model, spec)
    write_table(
        out / "validate.tsv",
        "min_h: value of h; max_violation: chart distance; dimensionless flags",
        ["positive", "twisted_periodic", "max_violation", "min_h", "h_periodicity"],
        [[report.positive, report.twisted_periodic, report.max_violation, report.min_h, report.h_periodicity]],
    )
    summary["result"] = {"positive": report.positive, "twisted_periodic": report.twisted_periodic, "max_violation": report.max_violation}
    if not report.positive:
        raise ValidationFailure("positivity")
    if not report.twisted_periodic:
        raise ValidationFailure("twisted periodicity")


def cmd_lift_check(cfg, spec, out, rng, summary):
    model = spec.model
    n = cfg.samples
    pts = model.sample(rng, n)
    r = rng.uniform(0.5, 5.0, n)
    t = rng.uniform(0.0, 1.0, n)
    res = pullback_residual(spec, t, pts, r, reduce=False)
    worst = float(res.max())
    rows = [[*_coords(pts[i]), r[i], t[i], res[i]] for i in range(n)]
    lio = verify_liouville_identity(LiftedHamiltonian(spec), (pts, r, t))
    write_table(out / "lift_check.tsv", "coordinates in chart units; r radial; t time; residual of the pulled-back Liouville form",
                [*_coord_names(model), "r", "t", "residual"], rows)
    summary["result"] = {"max_pullback_residual": worst, "liouville_residual": lio, "samples": n}


def _constants(cfg, spec):
    a, b = cfg.window
    return admissible_constants(spec, a, b)


def cmd_constants(cfg, spec, out, rng, summary):
    wc = _constants(cfg, spec)
    prof = wc.profile(cfg.kappa_factor * wc.kappa0, cfg.R_factor * wc.R0)
    write_table(
        out / "constants.tsv",
        "dimensionless constants of the action window and cutoff profile",
        ["a", "b", "m", "M", "C", "kappa0", "R0", "kappa", "R"],
        [[wc.a, wc.b, wc.m, wc.M, wc.C, wc.kappa0, wc.R0, prof.kappa, prof.R]],
    )
    summary["constants"] = wc.to_dict()
    summary["profile"] = prof.to_dict()


def cmd_discriminant(cfg, spec, out, rng, summary):
    stats = SearchStats()
    pts = find_discriminant(spec, cfg.window, stats=stats, **_search_args(cfg))
    model = spec.model
    write_table(
        out / "discriminant.tsv",
        "eta and action dimensionless; coordinates in chart units; residuals in chart units",
        ["component_id", "eta", "action", *_coord_names(model), "multiplicity", "morse_bott_dim", "nondegenerate",
         "residual_x", "residual_rho"],
        _components_rows(pts),
    )
    summary["result"] = {
        "components": len(components_of(pts)),
        "points": len(pts),
        "seeds": stats.seeds,
        "seeds_converged": stats.converged,
        "nonresonant": check_nonresonant(spec, cfg.window, pts),
        "eta_values": sorted({round(c.eta, 12) for c in components_of(pts)}),
    }


def cmd_chords(cfg, spec, out, rng, summary):
    stats = SearchStats()
    chords = find_chords(spec, cfg.fibers[0], cfg.fibers[1], cfg.window, stats=stats, **_chord_args(cfg))
    model = spec.model
    write_table(
        out / "chords.tsv",
        "eta (chord length) and action dimensionless; coordinates in chart units",
        ["chord_id", "eta", "action", *_coord_names(model), "residual"],
        [[c.component_id, c.eta, c.action, *_coords(c.x), c.residual] for c in chords],
    )
    summary["result"] = {"chords": len(chords), "seeds": stats.seeds, "seeds_converged": stats.converged}


def cmd_spectrum(cfg, spec, out, rng, summary):
    n, m = cfg.window
    if cfg.fibers is not None:
        win = chord_spectrum(spec, cfg.fibers[0], cfg.fibers[1], n, m, **_chord_args(cfg))
    else:
        win = spectrum(spec, n, m, **_search_args(cfg))
    write_table(out / "spectrum.tsv", "eta dimensionless; multiplicity = number of components at eta (proxy counts)",
                ["eta", "multiplicity"], win.values)
    summary["result"] = {"count": win.count, "dim_proxy": win.dim_proxy, "n": n, "m": m, "label": "proxy"}


def cmd_growth(cfg, spec, out, rng, summary):
    if cfg.growth_kind == "chords":
        rep = growth_rate(spec, cfg.m_list, chords=cfg.fibers, **_chord_args(cfg))
    else:
        rep = growth_rate(spec, cfg.m_list, **_search_args(cfg))
    write_table(out / "growth.tsv", "m: action level (dimensionless); mu_proxy: spectral component count",
                ["m", "mu_proxy"], [[m, int(v)] for m, v in zip(rep.m, rep.mu)])
    with open(out / "growth_plot.dat", "w") as fh:
        for m, v in zip(rep.m, rep.mu):
            fh.write(f"{fmt(float(m))} {int(v)}\n")
    summary["result"] = {"exponent": rep.exponent, "classification": rep.classification, "undefined": rep.undefined,
                         "mu_proxy": [int(v) for v in rep.mu], "m": [float(m) for m in rep.m]}


def cmd_oracle(cfg, spec, out, rng, summary):
    n, m = cfg.window
    orc = circle_oracle(cfg.oracle_a, n, m)
    write_table(out / "oracle.tsv", "eta dimensionless; exact critical values k/a", ["k", "eta"],
                [[round(e * cfg.oracle_a), e] for e in orc.eta_values])
    summary["result"] = {"bruteforce_count": orc.bruteforce_count, "component_count": orc.component_count,
                         "paper_formula_value": orc.paper_formula_value, "note": orc.note, "eta_values": orc.eta_values}


def _refined_components(cfg, spec):
    wc = _constants(cfg, spec)
    prof = wc.profile(cfg.kappa_factor * wc.kappa0, cfg.R_factor * wc.R0)
    F = CutoffHamiltonian(prof, spec)
    pts = find_discriminant(spec, cfg.window, **_search_args(cfg))
    loops = []
    for comp in components_of(pts):
        x0 = comp.representative
        r0 = prof.kappa / float(spec.value(x0[None], comp.eta)[0])
        guess = seed_loop(F, x0, r0, comp.eta, N=cfg.nodes)
        loop, ok = refine_newton(guess, prof, spec, tol=cfg.tolerances["newton"])
        loops.append((comp, loop, ok))
    return wc, prof, loops


def cmd_probe(cfg, spec, out, rng, summary):
    wc, prof, loops = _refined_components(cfg, spec)
    rows = []
    for comp, loop, ok in loops:
        pr = fundamental_lemma_probe(loop, prof, spec, rng=rng)
        rows.append([comp.component_id, loop.eta, loop.meta.get("action", np.nan), ok, pr.epsilon, pr.samples,
                     loop.meta.get("r_min", np.nan), loop.meta.get("r_max", np.nan)])
    write_table(out / "probe.tsv", "eta, action, epsilon dimensionless; r in radial units",
                ["component_id", "eta", "action", "converged", "epsilon", "samples", "r_min", "r_max"], rows)
    summary["profile"] = prof.to_dict()
    summary["constants"] = wc.to_dict()
    summary["result"] = {"components": len(rows), "min_epsilon": min((r[4] for r in rows), default=None)}


def cmd_descend(cfg, spec, out, rng, summary):
    wc, prof, loops = _refined_components(cfg, spec)
    if not loops:
        raise FlowError("no critical component in the window to descend toward")
    comp, target, _ = loops[0]
    noise = 1e-2 * rng.standard_normal(target.z.shape)
    start = target.copy(z=target.z + noise, eta=target.eta + 1e-2)
    loop = descend(start, prof, spec, tol=1e-8)
    refined, ok = refine_newton(loop, prof, spec, tol=cfg.tolerances["newton"])
    model = spec.model
    rows = []
    xs, rs = model.from_canonical(refined.z)
    for i, (x, r) in enumerate(zip(xs, rs)):
        rows.append([i / refined.N, *_coords(x), r])
    units = (f"t dimensionless, coordinates in chart units, r radial; eta={fmt(refined.eta)} "
             f"action={fmt(refined.meta.get('action', np.nan))} residual={fmt(refined.meta.get('residual', np.nan))}")
    write_table(out / "loop.tsv", units, ["t", *_coord_names(model), "r"], rows)
    summary["profile"] = prof.to_dict()
    summary["result"] = {"descend_converged": loop.meta["converged"], "descend_steps": loop.meta["steps"],
                         "gradient_norm": loop.meta["gradient_norm"], "refined": ok, "eta": refined.eta,
                         "action": refined.meta.get("action")}


COMMAND_FUNCS = {
    "validate": cmd_validate,
    "lift-check": cmd_lift_check,
    "constants": cmd_constants,
    "discriminant": cmd_discriminant,
    "chords": cmd_chords,
    "spectrum": cmd_spectrum,
    "growth": cmd_growth,
    "oracle": cmd_oracle,
    "probe": cmd_probe,
    "descend": cmd_descend,
}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else str(float(obj))
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def run(cfg, out, threads=1, quiet=False):
    """Execute ``cfg`` writing artifacts into ``out``; returns the exit status."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    summary = {
        "command": cfg.command,
        "config": cfg.source,
        "seed": cfg.seed,
        "threads": threads,
        "versions": {"rabinowitz": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
    }
    status = EXIT_OK
    try:
        spec = cfg.build_spec()
        COMMAND_FUNCS[cfg.command](cfg, spec, out, rng, summary)
        summary["status"] = "ok"
    except ValidationFailure as exc:
        summary["status"] = f"validation failed: {exc}"
        status = EXIT_VALIDATION
    except PositivityError as exc:
        summary["status"] = f"validation failed: positivity ({exc})"
        status = EXIT_VALIDATION
    except ConfigError:
        raise
    except (FlowError, ArithmeticError, np.linalg.LinAlgError, RabinowitzError) as exc:
        summary["status"] = f"numeric failure: {exc}"
        diag = {"error": repr(exc), "diagnostics": getattr(exc, "diagnostics", {}), "traceback": traceback.format_exc()}
        (out / "diagnostics.json").write_text(json.dumps(_jsonable(diag), indent=2, sort_keys=True) + "\n")
        status = EXIT_NUMERIC
    summary["exit_status"] = status
    (out / "run_summary.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    if not quiet:
        print(summary["status"], file=sys.stderr if status else sys.stdout)
    return status


def build_parser():
    parser = argparse.ArgumentParser(prog="rabinowitz", description="Discriminant points, action spectra and growth of positive contact paths.")
    parser.add_argument("--config", required=True, help="run configuration file")
    parser.add_argument("--out", default="results", help="output directory (default: results)")
    parser.add_argument("--seed", type=int, default=None, help="random seed overriding [run] seed")
    parser.add_argument("--threads", type=int, default=1, help="worker threads (recorded; batches are vectorized)")
    parser.add_argument("--quiet", action="store_true", help="suppress the status line")
    parser.add_argument("--command", choices=sorted(COMMAND_FUNCS), default=None, help="override [run] command")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    from .config import load_config

    try:
        if args.threads < 1:
            raise ConfigError("--threads", "must be >= 1")
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed", "must be an unsigned 64-bit integer")
        cfg = load_config(Path(args.config), command=args.command)
        if args.seed is not None:
            cfg.seed = args.seed
        return run(cfg, args.out, threads=args.threads, quiet=args.quiet)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
