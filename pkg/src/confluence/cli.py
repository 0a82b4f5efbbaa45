"""Command-line front end: ``confluence <command> [options]``.

Commands: monodromy, commutator, stokes, asymptotics, divergence, selftest.
Each writes ``<command>.csv``, ``<command>.svg`` and ``<command>_fit.json``
into ``--out``. Errors produce one machine-readable line on stderr:
``ParseError:<line> ...`` (exit 2) for family files, ``error:<Kind>: ...``
otherwise (exit 2 for configuration errors, 1 for numerical ones).
"""

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass
from importlib import resources

import mpmath
import numpy as np

from .errors import ConfigError, ConfluenceError, ParseError
from .family import load_family, parse_family
from .report import fit_slope, fmt, re_im, svg_loglog, write_csv

log = logging.getLogger("confluence")

COMMANDS = ("monodromy", "commutator", "stokes", "asymptotics", "divergence", "selftest")
BUILTIN = ("euler", "t2", "t3", "typical")


@dataclass
class ExperimentConfig:
    family: str
    eps0: float = 0.4
    ratio: float = 0.5
    count: int = 7
    t0: complex = -0.5
    d0: float = 0.4
    d1: float = 0.4
    tol: float = 1e-10
    out: str = "confluence-out"
    name: str = "monodromy"
    words: str = "all4"
    seed: int = 0
    workers: int = 1
    samples: int = 8

    def validate(self):
        if not self.eps0 > 0:
            raise ConfigError("eps0 must be positive")
        if not 0 < self.ratio < 1:
            raise ConfigError("ratio must lie in (0, 1)")
        if self.count < 2:
            raise ConfigError("count must be at least 2")
        if self.t0 == 0:
            raise ConfigError("t0 must be nonzero")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        return self

    def eps_grid(self):
        return [self.eps0 * self.ratio ** k for k in range(self.count)]


def resolve_family(spec):
    """A family file path, or one of the bundled names (euler, t2, t3, typical)."""
    if os.path.exists(spec):
        return load_family(spec)
    if spec in BUILTIN:
        text = resources.files("confluence").joinpath("data", spec + ".fam").read_text()
        return parse_family(text, name=spec)
    raise ConfigError(f"no family file or bundled family named {spec!r}")


def _complex_arg(s):
    parts = s.split(",")
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"expected 're,im', got {s!r}")


def build_parser():
    p = argparse.ArgumentParser(prog="confluence", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--family", default=None, help="family file or bundled name (default t3; euler for selftest)")
    p.add_argument("--eps0", type=float, default=0.4)
    p.add_argument("--ratio", type=float, default=0.5)
    p.add_argument("--count", type=int, default=7)
    p.add_argument("--t0", type=_complex_arg, default=complex(-0.5, 0.0))
    p.add_argument("--d0", type=float, default=0.4)
    p.add_argument("--d1", type=float, default=0.4)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out", default="confluence-out")
    p.add_argument("--words", default="all4", help="comma-separated words in a/A/b/B, or allL")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--samples", type=int, default=8, help="sample points per word (divergence)")
    return p


def _setup_logging():
    level = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
    name = os.environ.get("STOKES_LOG", "quiet").strip().lower()
    if name not in level:
        raise ConfigError(f"STOKES_LOG must be quiet, info or debug, not {name!r}")
    logging.basicConfig(level=level[name], format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        _setup_logging()
        default = "euler" if args.command == "selftest" else "t3"
        cfg = ExperimentConfig(args.family or default, args.eps0, args.ratio, args.count, args.t0,
                               args.d0, args.d1, args.tol, args.out, args.command, args.words,
                               args.seed, args.workers, args.samples).validate()
        fam = resolve_family(cfg.family)
        os.makedirs(cfg.out, exist_ok=True)
        return RUNNERS[cfg.name](fam, cfg)
    except ParseError as e:
        print(str(e), file=sys.stderr)
        return 2
    except ConfigError as e:
        print(f"error:ConfigError: {e}", file=sys.stderr)
        return 2
    except ConfluenceError as e:
        print(f"error:{type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
        print(f"error:{type(e).__name__}: {e}", file=sys.stderr)
        return 1


# -- shared pieces ------------------------------------------------------------------------


def _emit(cfg, header, rows, series, fit_x, fit_y, ylabel, extra=None):
    base = os.path.join(cfg.out, cfg.name)
    write_csv(base + ".csv", header, rows)
    slope, resid, used = fit_slope(fit_x, fit_y)
    with open(base + ".svg", "w") as f:
        f.write(svg_loglog(series, title=f"{cfg.name}: {cfg.family}", ylabel=ylabel))
    fit = {"quantity": ylabel, "slope": _json_num(slope), "rms_residual": _json_num(resid), "points": used}
    if extra:
        fit.update(extra)
    with open(base + "_fit.json", "w") as f:
        json.dump(fit, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"{cfg.name}: wrote {base}.csv; slope {fmt(slope)} (rms {fmt(resid)}, {used} points)")
    return slope


def _json_num(x):
    return None if not math.isfinite(x) else x


def _oracle(fam):
    from .stokes import stokes_for_family

    try:
        return stokes_for_family(fam)
    except (ConfluenceError, ValueError) as e:
        log.warning("no Stokes oracle: %s", e)
        return None


def _sweep(fam, cfg, right=False, reference=None):
    from .monodromy import sweep

    grid = cfg.eps_grid()
    log.info("sweep over %d eps values from %g", len(grid), grid[0])
    return sweep(fam, grid, cfg.t0, cfg.d0, cfg.d1, reference=reference, right=right,
                 workers=cfg.workers, tol=cfg.tol)


def _matrix_cols(prefix, n):
    return [f"{part}_{prefix}_{j + 1}{k + 1}" for j in range(n) for k in range(n) for part in ("re", "im")]


def _matrix_vals(M, n):
    out = []
    for j in range(n):
        for k in range(n):
            out.extend(re_im(M[j, k]))
    return out


# -- commands -------------------------------------------------------------------------------


def run_monodromy(fam, cfg, right=False):
    from .monodromy import _mat, log_projective_multiplier

    n = fam.n
    sp = _oracle(fam)
    Z0 = sp.bases[0].at(cfg.t0) if sp is not None else None
    Z1 = sp.bases[1].at(-cfg.t0) if (sp is not None and right) else None
    pts = _sweep(fam, cfg, right=right, reference=Z0)
    header = ["eps"]
    for i in (0, 1):
        for j in range(n):
            header += [f"re_log_lambda_{i}{j + 1}", f"im_log_lambda_{i}{j + 1}"]
    header += ["re_mu0", "im_mu0", "re_mu1", "im_mu1", "re_u", "im_u"]
    header += _matrix_cols("K", n) + ["det_error", "distance_to_C0"]
    if right:
        header += ["distance_to_C1"]
    rows, dist, dist1, eps = [], [], [], []
    for pt in pts:
        row = [fmt(pt.eps)]
        for ed in (pt.ed0, pt.ed1):
            for x in ed.log_eigenvalues:
                row.extend(re_im(x))
        with mpmath.workprec(pt.pair.prec):
            if n == 2:
                mu0 = mpmath.exp(log_projective_multiplier(pt.ed0))
                mu1 = mpmath.exp(log_projective_multiplier(pt.ed1))
                row += [*re_im(mu0), *re_im(mu1)]
            else:
                row += ["nan"] * 4
            row.extend(re_im(pt.C.C[0, n - 1]))
            K = pt.K.K
            if Z0 is not None:
                Zm = _mat(Z0)
                K = mpmath.inverse(Zm) * K * Zm
            row += _matrix_vals(K, n)
        d = pt.K.distance(Z0, sp.C0) if sp is not None else float("nan")
        row += [fmt(pt.K.det_error), fmt(d)]
        if right:
            d1 = pt.K_right.distance(Z1, sp.C1) if sp is not None else float("nan")
            row.append(fmt(d1))
            dist1.append(d1)
        rows.append(row)
        dist.append(d)
        eps.append(pt.eps)
        log.info("eps=%g distance_to_C0=%.3e", pt.eps, d)
    series = [("distance_to_C0", eps, dist)]
    if right:
        series.append(("distance_to_C1", eps, dist1))
    extra = {"monotone_from_k2": bool(all(b < a for a, b in zip(dist[2:-1], dist[3:])))}
    _emit(cfg, header, rows, series, eps, dist, "distance_to_C0", extra)
    return 0


def run_commutator(fam, cfg):
    return run_monodromy(fam, cfg, right=True)


def run_stokes(fam, cfg):
    from .stokes import formal_normal_form, least_term

    sp = _oracle(fam)
    if sp is None:
        raise ConfigError("Stokes oracle needs a diagonal A(0,0) with distinct eigenvalues")
    n = fam.n
    rows = []
    for j, b in enumerate(sp.fnf.b1):
        rows.append([f"b1_{j + 1}", *re_im(b)])
    rows.append(["N_star", fmt(sp.N_star), "0.0"])
    rows.append(["r_star", fmt(sp.r_star), "0.0"])
    for name, M in (("C0", sp.C0), ("C1", sp.C1)):
        for j in range(n):
            for k in range(n):
                rows.append([f"{name}_{j + 1}{k + 1}", *re_im(M[j, k])])
    if n == 2:
        rows.append(["c0", *re_im(sp.c0)])
        rows.append(["c1", *re_im(sp.c1)])
    for key in sorted(sp.residuals):
        rows.append([f"residual_{key}", fmt(sp.residuals[key]), "0.0"])
    _, trunc = formal_normal_form(fam.unperturbed_coeffs(), 120)
    radii = [0.25 * 0.95 ** k for k in range(60)]
    terms = [least_term(trunc.H, r)[0] for r in radii]
    _emit(cfg, ["quantity", "re", "im"], rows, [("least term", radii, terms)], radii, terms,
          "least term of the normalizing series", {"c0": repr(complex(sp.C0[1, 0])) if n == 2 else None})
    return 0


def run_asymptotics(fam, cfg):
    from .monodromy import asymptotics_report

    if fam.n != 2:
        raise ConfigError("asymptotics report is two-dimensional")
    sp = _oracle(fam)
    Z0 = sp.bases[0].at(cfg.t0) if sp is not None else None
    pts = _sweep(fam, cfg, reference=Z0)
    rows_a = asymptotics_report(fam, cfg.eps_grid(), cfg.t0, points=pts)
    c1 = complex(sp.c1) if sp is not None else float("nan")
    header = ["eps", "re_log_lambda_01", "im_log_lambda_01", "re_log_lambda_02", "im_log_lambda_02",
              "re_log_mu0", "im_log_mu0", "re_log_mu1", "im_log_mu1",
              "re_ratio_lambda", "im_ratio_lambda", "re_ratio_mu", "im_ratio_mu",
              "re_u", "im_u", "re_u_times_mu1", "im_u_times_mu1", "re_u_over_mu1", "im_u_over_mu1",
              "err_ratio_lambda", "err_ratio_mu", "err_u_times_mu1", "err_u_over_mu1"]
    rows, eps, err = [], [], []
    for r in rows_a:
        e_lam = abs(complex(r.ratio_lambda) + 1)
        e_mu = abs(complex(r.ratio_mu) - 1)
        e_lit = abs(complex(r.u_times_mu1) + c1)
        e_cor = abs(complex(r.u_over_mu1) + c1)
        rows.append([fmt(r.eps), *re_im(r.logs0[0]), *re_im(r.logs0[1]), *re_im(r.log_mu0), *re_im(r.log_mu1),
                     *re_im(r.ratio_lambda), *re_im(r.ratio_mu), *re_im(r.u), *re_im(r.u_times_mu1),
                     *re_im(r.u_over_mu1), fmt(e_lam), fmt(e_mu), fmt(e_lit), fmt(e_cor)])
        eps.append(r.eps)
        err.append(e_cor)
    _emit(cfg, header, rows, [("|u/mu1 + c1|", eps, err)], eps, err, "err_u_over_mu1")
    return 0


def _point_str(z):
    from .mobius import is_inf

    if z is None:
        return ""
    if is_inf(z):
        return "inf"
    return f"{fmt(mpmath.re(z), 12)},{fmt(mpmath.im(z), 12)}"


def run_divergence(fam, cfg):
    from .mobius import divergence_experiment, limit_data, parse_words, sample_points

    if fam.n != 2:
        raise ConfigError("word dynamics are two-dimensional")
    words = parse_words(cfg.words)
    if not words:
        raise ConfigError("no words given")
    pts = _sweep(fam, cfg)
    limit = limit_data(fam, cfg.t0)
    rng = np.random.default_rng(cfg.seed)
    xs = sample_points(rng, cfg.samples, max(len(w) for w in words), limit)
    rep = divergence_experiment(fam, words=words, x_samples=xs, pairs=pts, limit=limit)
    header = ["word", "eps", "norm", "log10_norm", "classification", "predicted_attractor", "observed_image",
              "hits", "samples"]
    rows = [[r.word, fmt(r.eps), fmt(r.norm), fmt(r.log_norm / math.log(10)), r.classification, _point_str(r.predicted),
             _point_str(r.observed), str(r.hits), str(r.samples)] for r in rep.rows]
    by = rep.by_word()
    shown = list(by)[:6]
    series = [(w, [r.eps for r in by[w]], [r.norm for r in by[w]]) for w in shown]
    first = by[shown[0]]
    reduced = [w for w in words if w.reduced]
    extra = {"typical_up_to_K": rep.typical_up_to, "typical": rep.typical,
             "min_log10_growth_reduced": min((rep.log_growth[str(w)] / math.log(10) for w in reduced),
                                             default=None),
             "word": shown[0]}
    print(f"divergence: typical up to K={rep.typical_up_to}: {rep.typical}")
    _emit(cfg, header, rows, series, [r.eps for r in first], [r.norm for r in first], "norm", extra)
    return 0


def run_selftest(fam, cfg):
    from .selftest import trivial_checks

    results = trivial_checks()
    rows = [[name, fmt(value), fmt(tol), "pass" if ok else "fail"] for name, value, tol, ok in results]
    for name, value, tol, ok in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {fmt(value, 6)} (tol {fmt(tol, 3)})")
    from .family import euler_family
    from .monodromy import eigen_index, monodromy_operators

    fam = euler_family()
    eps = [0.5, 0.25, 0.125]
    err = []
    for e in eps:
        ed0, _ = eigen_index(monodromy_operators(fam, e), fam)
        with mpmath.workprec(ed0.prec):
            exact = [mpmath.exp(2j * mpmath.pi * lam / (2j * e)) for lam in fam.Lambda]
            err.append(max(float(abs(v / x - 1)) for v, x in zip(ed0.eigenvalues, exact)))
    _emit(cfg, ["check", "value", "tol", "status"], rows, [("M0 eigenvalue rel. error", eps, err)],
          eps, err, "relative eigenvalue error")
    failed = sum(not ok for *_, ok in results)
    print(f"selftest: {len(results) - failed}/{len(results)} passed")
    return 0 if failed == 0 else 1


RUNNERS = {"monodromy": run_monodromy, "commutator": run_commutator, "stokes": run_stokes,
           "asymptotics": run_asymptotics, "divergence": run_divergence, "selftest": run_selftest}


if __name__ == "__main__":
    sys.exit(main())
