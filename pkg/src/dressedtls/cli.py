"""Command-line entry point: ``dressedtls <command> --config cfg.json ...``.

Exit codes: 0 success, 1 configuration or usage error (nothing written),
2 numerical failure.
"""
from __future__ import annotations

import argparse
import io
import json
import logging
import math
import os
import sys
import tempfile

import numpy as np

from . import fit as fitmod
from . import oracle as oraclemod
from .config import RunConfig, load_config
from .errors import ConfigError, DressedError
from .model import BiasPoint, bias_arrays
from .rates import default_m_max, dressed_coefficients, rate_arrays, total_rates
from .sweep import add_noise, grid_m_max, run_map

log = logging.getLogger("dressedtls")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


class NumericalFailure(Exception):
    """Output was produced but a strict check failed."""


def _common(p):
    p.add_argument("--config", metavar="PATH", help="JSON run configuration")
    p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    p.add_argument("--seed", type=int, default=0, help="seed for noise and fit restarts")
    p.add_argument("--threads", type=int, default=1, help="worker threads (0 = auto)")
    p.add_argument("--strict", action="store_true",
                   help="treat defects, unconverged fits and oracle misses as failures")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dressedtls", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sweep", help="simulate an S11 map")
    _common(p)

    p = sub.add_parser("synth", help="simulated map plus seeded complex Gaussian noise")
    _common(p)
    p.add_argument("--noise", type=float, default=0.01, help="relative noise amplitude")

    p = sub.add_parser("rates", help="per-m rate table, alpha scan, or rates over the sweep grid")
    _common(p)
    p.add_argument("--eta", type=float, help="fixed mixing angle [rad]")
    p.add_argument("--alpha", type=float, help="with --eta: per-m table at this alpha")
    p.add_argument("--n", type=int, default=1, help="resonance index for --eta modes")
    p.add_argument("--m-max", type=int, default=None)
    p.add_argument("--alpha-range", type=float, nargs=3, metavar=("LO", "HI", "STEPS"),
                   default=(0.01, 20.0, 400))

    p = sub.add_parser("fit", help="per-slice fit of (s_phi0, s_rel, s_ohmic)")
    _common(p)
    p.add_argument("--measured", metavar="CSV", required=True)

    p = sub.add_parser("fit-global", help="global fit of (s_x0, s_x_mu)")
    _common(p)
    p.add_argument("--measured", metavar="CSV", required=True)
    p.add_argument("--slice-fit", metavar="JSON",
                   help="per-slice fit report to freeze; default: environment values")

    p = sub.add_parser("oracle", help="Floquet check of gap and per-m rates")
    _common(p)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--alpha", type=float, default=0.8)
    p.add_argument("--offset", type=float, default=0.0,
                   help="bias offset from the degeneracy in units of the gap")
    p.add_argument("--m-max", type=int, default=20)
    p.add_argument("--steps", type=int, default=oraclemod.MIN_STEPS)
    p.add_argument("--max-doublings", type=int, default=12)
    p.add_argument("--qe-csv", metavar="PATH", help="also write quasi-energy vs alpha CSV")
    p.add_argument("--qe-alpha", type=float, nargs=3, metavar=("LO", "HI", "STEPS"),
                   default=(0.0, 5.0, 101))
    return parser


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write("# " + ",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _check_out(path):
    if path is None:
        return
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        raise ConfigError(f"output directory does not exist: {parent}")


def _emit(text: str, path):
    """Write atomically so a failed run never leaves a partial file."""
    if path is None:
        sys.stdout.write(text)
        return
    parent = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=parent, prefix=".dressedtls-")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _config(args) -> RunConfig:
    return load_config(args.config) if args.config else RunConfig()


def _threads(n):
    return (os.cpu_count() or 1) if n == 0 else max(1, n)


def _grid(cfg):
    if cfg.sweep.grid is None:
        raise ConfigError("config has no 'sweep' grid")
    return cfg.sweep.grid


def cmd_sweep(args, cfg, noise=None):
    grid = _grid(cfg)
    smap = run_map(grid, cfg.device, cfg.environment, cfg.sweep.m_max,
                   cfg.sweep.diagnostics, _threads(args.threads))
    s11 = smap.s11
    if noise is not None:
        if not noise >= 0:
            raise ConfigError("--noise must be >= 0")
        s11 = add_noise(s11, noise, args.seed)
    smap.s11 = s11
    _emit(smap.to_csv(), args.out)
    if smap.defects:
        log.warning("%d defect point(s); first: %s", len(smap.defects), smap.defects[0])
        if args.strict:
            raise NumericalFailure(f"{len(smap.defects)} defect point(s)")


def cmd_synth(args, cfg):
    cmd_sweep(args, cfg, noise=args.noise)


RATE_COLUMNS = ("gamma_rel", "gamma_exc", "gamma_1", "gamma_phi_pure", "gamma_2", "t_eff", "s_z0")


def cmd_rates(args, cfg):
    dev, env = cfg.device, cfg.environment
    if args.eta is not None and not 0 <= args.eta <= math.pi:
        raise ConfigError("--eta must lie in [0, pi]")
    if args.eta is not None and args.alpha is not None:
        bias = BiasPoint.from_angle(args.n, args.alpha, args.eta, dev.e_j, dev.f_mu)
        rs = total_rates(bias, env, args.m_max or default_m_max(args.n), dev.f_rf)
        header = ("m", "gamma_rel_m", "gamma_exc_m", "gamma_phi_m")
        _emit(_csv(header, rs.per_m), args.out)
        return
    if args.eta is not None:
        lo, hi, steps = args.alpha_range
        steps = int(steps)
        if steps < 2 or not 0 <= lo < hi:
            raise ConfigError("--alpha-range needs 0 <= LO < HI and STEPS >= 2")
        rows = []
        for i in range(steps):
            alpha = lo + (hi - lo) * (i / (steps - 1))
            bias = BiasPoint.from_angle(args.n, alpha, args.eta, dev.e_j, dev.f_mu)
            m_max = args.m_max or max(default_m_max(args.n), int(alpha) + 20)
            rs = total_rates(bias, env, m_max, dev.f_rf)
            rel_photon = sum(r for _, r, _, _ in rs.per_m)
            rows.append((alpha, args.eta, bias.delta_n, rel_photon,
                         *(getattr(rs, k) for k in RATE_COLUMNS)))
        header = ("alpha", "eta", "delta_n", "gamma_rel_photon", *RATE_COLUMNS)
        _emit(_csv(header, rows), args.out)
        return

    grid = _grid(cfg)
    ng, amp = np.meshgrid(grid.ng_axis, grid.amp_axis)
    bias = bias_arrays(ng.ravel(), amp.ravel(), dev)
    coef = dressed_coefficients(bias, dev.e_j, dev.f_mu, cfg.sweep.m_max or grid_m_max(grid, dev))
    ra = rate_arrays(coef, bias, env, dev.f_rf)
    t_eff = ra.t_eff(bias.delta_n)
    cols = [bias.n_g, bias.a_mu, bias.alpha, bias.eta, bias.delta_n, coef.c_rel * env.s_ohmic,
            ra.gamma_rel, ra.gamma_exc, ra.gamma_1, ra.gamma_phi_pure, ra.gamma_2, t_eff, ra.s_z0]
    header = ("ng", "amp", "alpha", "eta", "delta_n", "gamma_rel_photon", *RATE_COLUMNS)
    _emit(_csv(header, zip(*cols)), args.out)
    if args.strict and not coef.converged.all():
        raise NumericalFailure("m-sum not converged at some points")


def cmd_fit(args, cfg):
    mmap = fitmod.load_measurement(args.measured)
    opts = cfg.fit
    results = fitmod.fit_map_slices(
        mmap, cfg.device, opts.init, cfg.environment, opts.rows,
        opts.max_evals, opts.restarts, args.seed, _threads(args.threads),
    )
    _emit(fitmod.report_json(results), args.out)
    if args.strict and not all(r.converged for r in results):
        raise NumericalFailure("some slice fits hit the evaluation budget")


def _slice_params_from_report(path, n_rows):
    try:
        with open(path) as fh:
            doc = json.load(fh)
        slices = doc["slices"]
        params = [[s["params"][k] for k in fitmod.SLICE_PARAMS] for s in slices]
    except FileNotFoundError:
        raise ConfigError(f"slice fit report not found: {path}") from None
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(f"{path}: not a slice fit report ({exc})") from None
    if len(params) != n_rows:
        raise ConfigError(f"{path}: {len(params)} slices but the map has {n_rows} rows")
    return params


def cmd_fit_global(args, cfg):
    mmap = fitmod.load_measurement(args.measured)
    env = cfg.environment
    if args.slice_fit:
        params = _slice_params_from_report(args.slice_fit, len(mmap.amp_axis))
    else:
        s_rel = env.rel_model.at(0.0) if hasattr(env.rel_model, "s_rel") else None
        if s_rel is None:
            raise ConfigError("fit-global without --slice-fit needs a per_slice_scalar rel_model")
        params = (env.s_phi0, s_rel, env.s_ohmic)
    res = fitmod.fit_global_dephasing(
        mmap, cfg.device, params, cfg.fit.global_init, env,
        cfg.fit.max_evals, cfg.fit.restarts, args.seed,
    )
    _emit(fitmod.report_json(res), args.out)
    if args.strict and not res.converged:
        raise NumericalFailure("global fit hit the evaluation budget")


def cmd_oracle(args, cfg):
    dev = cfg.device
    if args.steps < oraclemod.MIN_STEPS:
        raise ConfigError(f"--steps must be >= {oraclemod.MIN_STEPS}")
    doc = oraclemod.oracle_check(
        args.n, args.alpha, dev.e_j, dev.f_mu, args.offset, args.m_max,
        args.steps, max_doublings=args.max_doublings,
    )
    gap, ref, err = oraclemod.gap_check(args.n, args.alpha, dev.e_j, dev.f_mu, args.steps,
                                        args.max_doublings)
    r = dev.e_j / dev.f_mu
    doc["gap_check"] = {"gap_numeric": gap, "gap_analytic": ref, "rel_error": err,
                        "tolerance": 5.0 * r * r, "pass": err <= 5.0 * r * r}
    doc["pass"] = bool(doc["comparison"]["pass"] and doc["gap_check"]["pass"])
    if args.qe_csv:
        _check_out(args.qe_csv)
        lo, hi, steps = args.qe_alpha
        rows = []
        for i in range(int(steps)):
            a = lo + (hi - lo) * (i / (int(steps) - 1))
            sol = oraclemod.propagate_period(args.n * dev.f_mu, dev.e_j, a, dev.f_mu,
                                             args.steps, args.m_max, args.max_doublings)
            rows.append((a, *sol.quasi_energies, sol.gap, abs(oraclemod.dressed_gap(args.n, a, dev.e_j))))
        _emit(_csv(("alpha", "qe_lower", "qe_upper", "gap", "gap_analytic"), rows), args.qe_csv)
    _emit(oraclemod.report_json(doc), args.out)
    if args.strict and not doc["pass"]:
        raise NumericalFailure(f"oracle comparison failed (max error {doc['comparison']['max_error']:.3g})")


COMMANDS = {
    "sweep": cmd_sweep, "synth": cmd_synth, "rates": cmd_rates, "fit": cmd_fit,
    "fit-global": cmd_fit_global, "oracle": cmd_oracle,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            log.setLevel(logging.INFO)
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        _check_out(args.out)
        cfg = _config(args)
        COMMANDS[args.command](args, cfg)
    except ValueError as exc:
        # ConfigError, MeasurementFormatError and DomainError all land here
        print(f"dressedtls: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"dressedtls: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DressedError, ArithmeticError) as exc:
        print(f"dressedtls: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
