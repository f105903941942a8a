"""
Command-line front end.

Every command resolves its settings as defaults < ``--config`` file < flags,
writes ``results.csv`` and ``manifest.json`` to ``--out`` and, for sweeps,
static plots under ``plots/``. Exit codes: 0 success, 1 a self-check failed,
2 invalid input, 3 min-max violation.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from ._svg import line_plot
from .conformal import DEFAULT_FLOOR, InvalidConformalFactor
from .cover import (
    SEPARATION,
    CertificationError,
    DecompositionNotFound,
    MeasureTooConcentrated,
    MetricMeasureSpace,
    covering_number_check,
    decompose,
    estimate_doubling,
    reindex_and_select,
    verify_family,
)
from .functionals import (
    SHIPPED_FAMILIES,
    SWEEP_COLUMNS,
    MinMaxViolation,
    certify_upper_bound,
    family_generators,
    hersch_check,
    rows_to_csv,
    sweep,
)
from .spectrum import TRUST_EXTRA, TRUST_TOL, compute_spectrum, round_box_eigenvalues
from .testfn import verify_lemmas

COMMANDS = ("spectrum", "certify", "sweep", "testfn", "cover", "hersch")
DEFAULTS = {
    "n": 3,
    "L": 24,
    "quad_order": None,
    "family": None,
    "k": None,
    "seed": 0,
    "out": "confspec-out",
    "count": 50,
    "certify": False,
}
DEFAULT_FAMILY = {
    "spectrum": "constant:c=1",
    "certify": "constant:c=1",
    "sweep": SHIPPED_FAMILIES,
    "cover": "constant:c=1",
    "hersch": None,
    "testfn": None,
}
DEFAULT_K = {"certify": "1,2,5", "sweep": "1-20", "cover": "1,2,4,8,16"}
EXIT_CHECK, EXIT_INPUT, EXIT_MINMAX = 1, 2, 3


class ConfigError(ValueError):
    pass


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment, dashes in keys become underscores."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = val
    return out


def parse_k_list(text) -> list[int]:
    """``"1,2,5"`` or ranges such as ``"1-20"``."""
    ks = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-", 1)
            ks.extend(range(int(a), int(b) + 1))
        else:
            ks.append(int(part))
    return ks


def resolve(args) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        cfg.update(read_config(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None and val is not False:
            cfg[key] = val
    cfg["command"] = args.command
    cfg["n"] = int(cfg["n"])
    cfg["L"] = int(cfg["L"])
    cfg["seed"] = int(cfg["seed"])
    cfg["count"] = int(cfg["count"])
    cfg["certify"] = str(cfg["certify"]).lower() in ("1", "true", "yes")
    cfg["quad_order"] = None if cfg["quad_order"] in (None, "", "none") else int(cfg["quad_order"])
    if cfg["family"] is None:
        cfg["family"] = DEFAULT_FAMILY[args.command]
    if cfg["k"] is None:
        cfg["k"] = DEFAULT_K.get(args.command, "1")
    cfg["k"] = parse_k_list(cfg["k"])
    if cfg["n"] < 3:
        raise ConfigError("n must be at least 3")
    if args.command in ("certify", "cover") and any(k < 1 for k in cfg["k"]):
        raise ConfigError("k must be at least 1 for bound commands")
    return cfg


def _manifest(cfg, extra=None) -> dict:
    return {
        "command": cfg["command"],
        "config": {k: cfg[k] for k in sorted(cfg) if k != "command"},
        "versions": {"confspec": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "tolerances": {
            "trust_tol": TRUST_TOL,
            "trust_extra": TRUST_EXTRA,
            "separation": SEPARATION,
            "conformal_floor": DEFAULT_FLOOR,
        },
        **(extra or {}),
    }


def _write(out: Path, csv_text: str, manifest: dict, files=None):
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "results.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text)
    for name, text in (files or {}).items():
        path = out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    manifest["outputs"] = ["results.csv", "manifest.json", *sorted(files or {})]
    with open(out / "manifest.json", "w", encoding="utf-8", newline="") as fh:
        fh.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _families(cfg):
    fams = family_generators(cfg["family"] or "", cfg["n"])
    if not fams:
        raise ConfigError(f"family {cfg['family']!r} is empty")
    return fams


COMMAND_HELP = {
    "spectrum": "trusted eigenvalues of each conformal factor",
    "certify": "test-function upper bounds checked against the solver",
    "sweep": "normalized functionals over families and k, with plots",
    "testfn": "numerical check of the test-function constants",
    "cover": "annulus decompositions plus doubling and covering diagnostics",
    "hersch": "first normalized value against the round value",
}


def cmd_spectrum(cfg, log) -> int:
    rows, quad, status = [], {}, 0
    for fid, params, mu in _families(cfg):
        res = compute_spectrum(mu, cfg["L"], quad_order=cfg["quad_order"])
        tag = json.dumps(params, sort_keys=True)
        quad[f"{fid} {tag}"] = res.quad_order
        for k, v, m, b in zip(res.start_index(), res.values, res.multiplicities, res.blocks):
            if k + m > res.trusted_count:
                break
            rows.append((fid, tag, int(k), float(v), int(m), int(b), cfg["L"]))
        if mu.is_constant:
            # closed form: round eigenvalues scaled by mu^{-4/(n-2)}
            scale = 1.0 / float(mu.mass_weight(np.array([0.0]))[0])
            exact = np.repeat([lam * scale for lam, _ in round_box_eigenvalues(cfg["n"], cfg["L"])],
                              [m for _, m in round_box_eigenvalues(cfg["n"], cfg["L"])])
            got = res.expanded()[:min(res.trusted_count, exact.size)]
            err = float(np.max(np.abs(got - exact[:got.size])))
            ok = err <= 1e-8 * max(1.0, scale)
            log(f"self-test {fid} {tag}: max |error| vs closed form = {err:.2e} ({'pass' if ok else 'FAIL'})")
            status = status or (0 if ok else EXIT_CHECK)
        log(f"{fid} {tag}: {res.trusted_count} trusted eigenvalues, lambda_0 = {res.values[0]:.12g}")
    text = _csv(["family", "params", "k", "eigenvalue", "multiplicity", "block", "L"], rows)
    _write(Path(cfg["out"]), text, _manifest(cfg, {"quad_order": quad}))
    return status


def cmd_certify(cfg, log) -> int:
    rows, reports = [], []
    for fid, params, mu in _families(cfg):
        spec = compute_spectrum(mu, cfg["L"], quad_order=cfg["quad_order"])
        tag = json.dumps(params, sort_keys=True)
        for k in cfg["k"]:
            try:
                rep = certify_upper_bound(mu, k, L=cfg["L"], seed=cfg["seed"], spectrum=spec)
            except MinMaxViolation as exc:
                log(f"MIN-MAX VIOLATION {fid} {tag} k={k}: {exc}")
                return EXIT_MINMAX
            ok = all(rep.proof_checks.values())
            rows.append((fid, tag, mu.n, k, k - 1, rep.bound, rep.solver_value, rep.m_total,
                         rep.bound_constant, rep.solver_ratio, rep.achieved_c, ok))
            reports.append(dict(rep.to_dict(), family=fid, params=params))
            log(f"{fid} {tag} k={k}: bound {rep.bound:.6g} >= lambda_{k - 1} = {rep.solver_value:.6g}"
                f"  (bound*m/k^(2/n) = {rep.bound_constant:.4g}, checks {'ok' if ok else 'FAILED'})")
    header = ["family", "params", "n", "k", "index_zero_based", "certified_bound", "solver_value", "m_total",
              "bound_constant", "solver_ratio", "achieved_c", "proof_checks"]
    _write(Path(cfg["out"]), _csv(header, rows), _manifest(cfg),
           {"reports.json": json.dumps(reports, indent=2, sort_keys=True) + "\n"})
    return 0 if all(r[-1] for r in rows) else EXIT_CHECK


def cmd_sweep(cfg, log) -> int:
    fams = _families(cfg)
    try:
        rows = sweep(fams, cfg["k"], L=cfg["L"], certify=cfg["certify"], seed=cfg["seed"])
    except MinMaxViolation as exc:
        log(f"MIN-MAX VIOLATION: {exc}")
        return EXIT_MINMAX
    series = []
    for i, (fid, params, _) in enumerate(fams):
        sel = [r for r in rows if r["family"] == fid and r["params"] == json.dumps(params, sort_keys=True)]
        label = f"{fid} " + ",".join(f"{k}={v}" for k, v in params.items() if k in ("c", "t", "index"))
        series.append((label, [r["k"] for r in sel], [r["ratio"] for r in sel]))
    plots = {"plots/ratio_vs_k.svg": line_plot(series, "lambda_bar_k / k^(2/n)", "k", "ratio")}
    conc = []
    for fid in ("bubble", "two_bubble"):
        pts = [(p["t"], mu) for f, p, mu in fams if f == fid]
        if len(pts) < 2:
            continue
        k0 = min(cfg["k"])
        sel = {(r["params"], r["k"]): r for r in rows if r["family"] == fid}
        ts = [t for t, _ in pts]
        lb = [sel[(json.dumps({"t": t}, sort_keys=True), k0)]["lambda_bar_k"] for t in ts]
        vn = [sel[(json.dumps({"t": t}, sort_keys=True), k0)]["volume_normalized"] for t in ts]
        conc += [(f"{fid} lambda_bar_{k0}", ts, lb), (f"{fid} vol-normalized", ts, vn)]
    if conc:
        plots["plots/functional_vs_t.svg"] = line_plot(conc, "functionals vs concentration parameter", "t", "value")
    for r in rows:
        log(f"{r['family']} {r['params']} k={r['k']}: ratio {r['ratio']:.6g}")
    _write(Path(cfg["out"]), rows_to_csv(rows, SWEEP_COLUMNS), _manifest(cfg), plots)
    return 0


def cmd_testfn(cfg, log) -> int:
    rows = verify_lemmas(cfg["n"])
    for name, ok, detail in rows:
        log(f"{'PASS' if ok else 'FAIL'}  {name}  [{detail}]")
    _write(Path(cfg["out"]), _csv(["check", "passed", "detail"], rows), _manifest(cfg))
    return 0 if all(ok for _, ok, _ in rows) else EXIT_CHECK


def cmd_cover(cfg, log) -> int:
    rows, ok_all = [], True
    for fid, params, mu in _families(cfg):
        X = MetricMeasureSpace.from_conformal_factor(mu)
        tag = json.dumps(params, sort_keys=True)
        for k in cfg["k"]:
            try:
                fam = decompose(X, k, seed=cfg["seed"])
            except MeasureTooConcentrated as exc:
                log(f"{fid} {tag} k={k}: measure too concentrated ({exc})")
                return EXIT_INPUT
            except DecompositionNotFound as exc:
                log(f"{fid} {tag} k={k}: decomposition not found ({exc})")
                return EXIT_CHECK
            try:
                verify_family(X, fam)
                sel = reindex_and_select(fam, X, k)
                verified = True
            except CertificationError as exc:
                log(f"{fid} {tag} k={k}: certification failed ({exc})")
                verified, sel = False, None
            nu_ok = bool(sel is not None and np.all(sel.nu_doubled[:k] <= X.nu_total / k))
            ok = verified and nu_ok
            ok_all &= ok
            rows.append((fid, tag, k, len(fam.annuli), fam.achieved_c, ok, nu_ok))
            log(f"{'PASS' if ok else 'FAIL'}  {fid} {tag} k={k}: {len(fam.annuli)} annuli, "
                f"achieved_c = {fam.achieved_c:.4g}")
    Q = MetricMeasureSpace.quasi_uniform(cfg["n"], 8192, seed=cfg["seed"])
    dbl = estimate_doubling(Q, seed=cfg["seed"])
    cov = covering_number_check(Q, seed=cfg["seed"])
    dbl_ok = dbl <= 2 ** cfg["n"] * 1.15
    cov_ok = cov["max_cover"] <= cov["bound"]
    log(f"{'PASS' if dbl_ok else 'FAIL'}  doubling estimate {dbl:.4f} (round value 2^n = {2 ** cfg['n']})")
    log(f"{'PASS' if cov_ok else 'FAIL'}  half-radius covers: max {cov['max_cover']} <= {cov['bound']}")
    header = ["family", "params", "k", "annuli", "achieved_c", "verified", "pigeonhole"]
    _write(Path(cfg["out"]), _csv(header, rows), _manifest(cfg, {"doubling": dbl, "covering": cov}))
    return 0 if (ok_all and dbl_ok and cov_ok) else EXIT_CHECK


def cmd_hersch(cfg, log) -> int:
    spec = cfg["family"] or f"random_poly:count={cfg['count']},degree=4,seed={cfg['seed']}"
    rows, status = [], 0
    for fid, params, mu in family_generators(spec, cfg["n"]):
        try:
            h = hersch_check(mu, L=cfg["L"])
        except MinMaxViolation as exc:
            log(f"MIN-MAX VIOLATION {fid}: {exc}")
            return EXIT_MINMAX
        ok = h["gap"] >= -1e-8 and (h["oscillation"] <= 1e-2 or h["gap"] > 1e-6)
        status = status or (0 if ok else EXIT_CHECK)
        rows.append((fid, json.dumps(params, sort_keys=True), h["oscillation"], h["lambda_bar_0"],
                     h["lambda_bar_0_round"], h["gap"], ok))
        log(f"{'PASS' if ok else 'FAIL'}  {fid} osc={h['oscillation']:.3e} gap={h['gap']:.6e}")
    if not rows:
        raise ConfigError("family is empty")
    header = ["family", "params", "oscillation", "lambda_bar_0", "lambda_bar_0_round", "gap", "passed"]
    _write(Path(cfg["out"]), _csv(header, rows), _manifest(cfg))
    return status


HANDLERS = {
    "spectrum": cmd_spectrum,
    "certify": cmd_certify,
    "sweep": cmd_sweep,
    "testfn": cmd_testfn,
    "cover": cmd_cover,
    "hersch": cmd_hersch,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file; flags override it")
    common.add_argument("--n", type=int, help="sphere dimension (>= 3)")
    common.add_argument("--L", type=int, help="Galerkin truncation degree")
    common.add_argument("--quad-order", dest="quad_order", type=int, help="Gauss-Jacobi nodes")
    common.add_argument("--family", help='conformal factors, e.g. "bubble:t=1.5,2,3;constant:c=1"')
    common.add_argument("--k", help='k list, e.g. "1,2,5" or "1-20"')
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--count", type=int, help="number of random factors (hersch)")
    common.add_argument("--certify", action="store_true", help="also certify bounds in a sweep")
    parser = argparse.ArgumentParser(prog="confspec", description="Conformal Laplacian spectra on round spheres.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=COMMAND_HELP[name], description=COMMAND_HELP[name])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    def log(msg):
        print(msg, flush=True)

    try:
        cfg = resolve(args)
        return HANDLERS[cfg["command"]](cfg, log)
    except (ConfigError, InvalidConformalFactor, ValueError, OSError) as exc:
        print(f"confspec {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
