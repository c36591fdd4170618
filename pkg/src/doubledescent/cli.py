"""Command-line front end.

    doubledescent {theory,simulate,spectrum,mincomp,compare} --config run.json --out DIR

Every command writes ``results.csv``, ``metadata.json`` and ``run.log`` into
the output directory (spectrum and mincomp add a second table).  CSV floats
carry 17 significant digits and divergent values are written as ``inf``.
Exit status: 0 success, 2 bad config, 3 numerical failure, 4 I/O error.
"""
import argparse
import csv
import datetime
import json
import logging
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__, mc, spectra, theory
from .config import LINEAR, ConfigError, config_to_dict, load_config

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
THREADS_ENV = "DD_THREADS"
COMMANDS = ("theory", "simulate", "spectrum", "mincomp", "compare")
QUANTITIES = ("train", "test", "bias2", "variance")

log = logging.getLogger("doubledescent")
log.addHandler(logging.NullHandler())


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _point_columns(cfg):
    s = cfg.shape
    return [s.alpha_f, s.alpha_p, s.m, s.n_f, s.n_p]


POINT_HEADER = ["alpha_f", "alpha_p", "m", "n_f", "n_p"]


# ---------------------------------------------------------------- commands

def _theory_lambda(doc, cfg):
    if doc.options.get("ridgeless", False):
        return 0.0, "ridgeless"
    return cfg.student.lam, None


def cmd_theory(doc, args, meta):
    """Analytic curves at the requested (unrounded) ratios."""
    base = doc.base
    c = theory.ModelConstants.from_specs(base.teacher, base.student)
    lam, method = _theory_lambda(doc, base)
    header = ["alpha_f", "alpha_p", "lambda"] + list(QUANTITIES) + ["noise", "divergent"]
    header += [f"{q}_{src}" for src in theory.SOURCES for q in ("test", "bias2", "variance")]
    rows, divergent = [], []
    for af, ap in doc.requested_ratios():
        res = theory.theory_point(base.student.arch, af, ap, c, lam, method)
        parts = theory.label_component_split(res)
        row = [af, res.inputs["alpha_p"], lam] + [getattr(res, q) for q in QUANTITIES]
        row += [res.noise, res.divergent]
        row += [getattr(parts[src], q) for src in theory.SOURCES for q in ("test", "bias2", "variance")]
        rows.append(row)
        if res.divergent:
            divergent.append([af, res.inputs["alpha_p"]])
        if res.susceptibilities.ambiguous:
            meta.setdefault("ambiguous_roots", []).append([af, ap])
    meta["divergent_points"] = divergent
    write_csv(os.path.join(args.out, "results.csv"), header, rows)


def _mc_points(doc, args, meta):
    out = []
    for cfg in doc.experiments():
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.replicates is not None:
            cfg = replace(cfg, replicates=args.replicates)
        out.append(cfg)
    meta["rounding"] = [
        {"requested": [af, ap], "realized": [c.shape.alpha_f, c.shape.alpha_p],
         "counts": [c.shape.m, c.shape.n_f, c.shape.n_p]}
        for (af, ap), c in zip(doc.requested_ratios(), out)
    ]
    return out


def _simulate_rows(doc, args, meta):
    rows = []
    for cfg in _mc_points(doc, args, meta):
        th = theory.theory_for_config(cfg)
        n = mc.replicate_count(cfg, None, doc.options.get("threshold_replicates"))
        log.info("point alpha_f=%s alpha_p=%s: %d replicates", cfg.shape.alpha_f, cfg.shape.alpha_p, n)
        est = mc.run_decomposition(cfg, replicates=n, threads=args.threads)
        rows.append((cfg, est, th))
    return rows


def cmd_simulate(doc, args, meta):
    """Monte Carlo bias-variance estimates with standard errors."""
    header = POINT_HEADER + ["lambda", "replicates"]
    for q in QUANTITIES + ("noise",):
        header += [f"{q}_mean", f"{q}_stderr"]
    header += [f"{q}_theory" for q in QUANTITIES] + ["divergent"]
    for src in ("linear", "nonlinear", "noise"):
        header += [f"{q}_{src}_mean" for q in ("test", "bias2", "variance")]
    rows = []
    for cfg, est, th in _simulate_rows(doc, args, meta):
        row = _point_columns(cfg) + [cfg.student.lam, est.test.n]
        for q in QUANTITIES + ("noise",):
            e = getattr(est, q)
            row += [e.mean, e.stderr]
        row += [getattr(th, q) for q in QUANTITIES] + [th.divergent]
        for src in ("linear", "nonlinear", "noise"):
            part = est.components[src]
            row += [getattr(part, q).mean for q in ("test", "bias2", "variance")]
        rows.append(row)
    write_csv(os.path.join(args.out, "results.csv"), header, rows)


def cmd_compare(doc, args, meta):
    """Theory next to Monte Carlo, with z-scores per quantity."""
    header = POINT_HEADER + ["lambda", "replicates"]
    for q in QUANTITIES:
        header += [f"{q}_theory", f"{q}_mc", f"{q}_stderr", f"{q}_z"]
    header += ["divergent"]
    rows = []
    for cfg, est, th in _simulate_rows(doc, args, meta):
        row = _point_columns(cfg) + [cfg.student.lam, est.test.n]
        for q in QUANTITIES:
            e, v = getattr(est, q), getattr(th, q)
            row += [v, e.mean, e.stderr, e.zscore(v)]
        row += [th.divergent]
        rows.append(row)
    write_csv(os.path.join(args.out, "results.csv"), header, rows)


def analytic_density(cfg, epsilon=spectra.DEFAULT_EPS):
    t, s = cfg.teacher, cfg.student
    if s.arch == LINEAR:
        return spectra.mp_density(cfg.shape.alpha_f, t.sigma_x2)
    return spectra.rnlfm_density(cfg.shape.alpha_f, cfg.shape.alpha_p, s.stats.delta,
                                 s.sigma_w2 * t.sigma_x2, epsilon)


def cmd_spectrum(doc, args, meta):
    """Analytic kernel eigenvalue density, optionally against sampled Gram matrices."""
    opts = doc.options
    eps = float(opts.get("epsilon", spectra.DEFAULT_EPS))
    n_points = int(opts.get("points", 400))
    n_mat = int(opts.get("n_matrices", 0))
    bins = int(opts.get("bins", 100))
    rows, hist_rows, headers = [], [], []
    for cfg in _mc_points(doc, args, meta):
        dens = analytic_density(cfg, eps)
        xs = spectra.evaluation_grid(dens, n_points)
        pt = [cfg.shape.alpha_f, cfg.shape.alpha_p]
        rows.extend(pt + [x, r] for x, r in spectra.density_table(dens, xs))
        entry = {"alpha_f": pt[0], "alpha_p": pt[1], "f_zero": dens.f_zero,
                 "support": [list(iv) for iv in dens.support], "epsilon": dens.epsilon,
                 "bulk_mass": dens.bulk_mass()}
        if n_mat > 0:
            emp = mc.eigen_histogram(cfg, n_matrices=n_mat, bins=bins, threads=args.threads,
                                     x_max=1.05 * dens.x_max)
            masses = dens.bin_masses(emp.edges)
            freq = emp.frequencies()
            hist_rows.extend(pt + [lo, hi, c, f, a] for lo, hi, c, f, a in
                             zip(emp.edges[:-1], emp.edges[1:], emp.counts, freq, masses))
            entry.update(zero_fraction=emp.zero_fraction, zero_counts=list(emp.zero_counts),
                         total_variation=mc.total_variation(emp, dens))
        headers.append(entry)
    write_csv(os.path.join(args.out, "results.csv"), ["alpha_f", "alpha_p", "x", "rho"], rows)
    if n_mat > 0:
        write_csv(os.path.join(args.out, "histogram.csv"),
                  ["alpha_f", "alpha_p", "bin_lo", "bin_hi", "count", "frequency", "analytic_mass"],
                  hist_rows)
    with open(os.path.join(args.out, "spectrum.json"), "w") as fh:
        json.dump(headers, fh, indent=2, sort_keys=True)
        fh.write("\n")
    meta["spectra"] = headers


def cmd_mincomp(doc, args, meta):
    """Train and test spread along the smallest nonzero kernel direction."""
    sims = int(doc.options.get("sims", 100))
    header = POINT_HEADER + ["sims", "ratio_mean", "ratio_stderr", "sigma_train2_mean",
                             "sigma_test2_mean", "learned_slope_mean", "expected_slope_mean"]
    rows, scatter = [], []
    for cfg in _mc_points(doc, args, meta):
        ratio, reports = mc.mean_min_component_ratio(cfg, sims=sims, threads=args.threads)

        def avg(name):
            return math.fsum(getattr(r, name) for r in reports) / len(reports)

        rows.append(_point_columns(cfg) + [sims, ratio.mean, ratio.stderr, avg("sigma_train2"),
                                           avg("sigma_test2"), avg("learned_slope"), avg("expected_slope")])
        first = reports[0]
        for kind, arr in (("train", first.scatter_train), ("test", first.scatter_test)):
            scatter.extend([cfg.shape.alpha_f, cfg.shape.alpha_p, kind, p, y] for p, y in arr)
    write_csv(os.path.join(args.out, "results.csv"), header, rows)
    write_csv(os.path.join(args.out, "scatter.csv"), ["alpha_f", "alpha_p", "set", "projection", "label"],
              scatter)


HANDLERS = {"theory": cmd_theory, "simulate": cmd_simulate, "spectrum": cmd_spectrum,
            "mincomp": cmd_mincomp, "compare": cmd_compare}


# ---------------------------------------------------------------- entry point

def build_parser():
    p = argparse.ArgumentParser(prog="doubledescent",
                                description="Bias-variance curves for linear and random-features regression.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name, help=HANDLERS[name].__doc__.splitlines()[0] if HANDLERS[name].__doc__ else None)
        s.add_argument("--config", required=True, help="JSON run configuration")
        s.add_argument("--out", required=True, help="output directory (created if missing)")
        s.add_argument("--seed", type=int, default=None, help="override the config seed")
        s.add_argument("--threads", type=int, default=None,
                       help=f"worker threads (default: ${THREADS_ENV} or 1)")
        s.add_argument("--replicates", type=int, default=None, help="override the replicate count")
    return p


def resolve_threads(flag):
    if flag is not None:
        return max(1, flag)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return 1


def _fail(code, category, exc):
    print(f"doubledescent: error[{category}]: {exc}", file=sys.stderr)
    log.error("%s: %s", category, exc)
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.threads = resolve_threads(args.threads)
        doc = load_config(args.config)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", exc)
    except OSError as exc:
        return _fail(EXIT_IO, "io", exc)
    try:
        os.makedirs(args.out, exist_ok=True)
        handler = logging.FileHandler(os.path.join(args.out, "run.log"), mode="w")
    except OSError as exc:
        return _fail(EXIT_IO, "io", exc)
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    logging.captureWarnings(True)
    logging.getLogger("py.warnings").addHandler(handler)
    base = doc.base if args.seed is None else replace(doc.base, seed=args.seed)
    meta = {
        "build": f"doubledescent {__version__}",
        "command": args.command,
        "seed": base.seed,
        "threads": args.threads,
        "config": doc.raw,
        "resolved": config_to_dict(base),
        "options": doc.options,
        "rng": "PCG64 via SeedSequence(seed, spawn_key=(replicate, role))",
        "started": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    log.info("command %s, config %s, threads %d", args.command, args.config, args.threads)
    code = EXIT_OK
    try:
        with np.errstate(over="raise", invalid="raise", divide="ignore"):
            HANDLERS[args.command](doc, args, meta)
        meta["status"] = "ok"
    except ConfigError as exc:
        code = _fail(EXIT_CONFIG, "config", exc)
        meta["status"] = f"config error: {exc}"
    except OSError as exc:
        code = _fail(EXIT_IO, "io", exc)
        meta["status"] = f"io error: {exc}"
    except (ArithmeticError, ValueError, np.linalg.LinAlgError, mc.ReplicateError) as exc:
        code = _fail(EXIT_NUMERIC, "numeric", exc)
        meta["status"] = f"numeric error: {exc}"
    meta["finished"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    try:
        with open(os.path.join(args.out, "metadata.json"), "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
    except OSError as exc:
        code = code or _fail(EXIT_IO, "io", exc)
    finally:
        log.removeHandler(handler)
        logging.getLogger("py.warnings").removeHandler(handler)
        handler.close()
    return code


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


if __name__ == "__main__":
    sys.exit(main())
