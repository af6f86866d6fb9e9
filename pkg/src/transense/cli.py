"""Command-line front end: ``transense {pfie,squeezing,mse,verify}``.

Every command accepts ``--seed``, ``--threads`` and ``--out``.  Options may
also come from a JSON document given with ``--config``; flags given on the
command line take precedence.  CSV outputs start with a schema comment line.

Exit codes: 0 success, 1 verification failure, 2 usage error,
3 infeasible scenario.
"""

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import math
import re
import sys
import warnings
from pathlib import Path

from . import __version__
from .checks import run_checks
from .exceptions import DomainError, ReceiverExistenceError, UnsupportedRangeError
from .fisher import FiMethod, cfi_heralded, coherent_forms_consistent, pfie
from .gaussian import Scenario
from .montecarlo import RECEIVERS, ExperimentConfig, default_n_grid, run_mse_experiment
from .receiver import existence_boundary, sld_params

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3

SCHEMA_VERSION = 1

PFIE_METHODS = ("ub", "tmsv", "coh", "coh-alt", "opa", "sp", "her")
_FOCK_RE = re.compile(r"^fock(\d+)$")


class UsageError(Exception):
    pass


# --- small helpers --------------------------------------------------------------

def _floats(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _ints(text):
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise UsageError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else str(x)
    return str(x)


def _csv_text(command, header, rows):
    buf = io.StringIO()
    buf.write(f"# transense {command} schema_version={SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _emit(text, out, stdout):
    if out is None:
        stdout.write(text)
        return None
    path = Path(out)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(text.encode("utf-8"))
    return path


def _digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _svg(csv_path, x, y, group, logx=False, logy=False):
    """Render a line plot next to ``csv_path``; returns the SVG path."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with open(csv_path, encoding="utf-8") as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    fig, ax = plt.subplots(figsize=(6, 4))
    series = {}
    for r in rows:
        if r.get(y) in ("", None):
            continue
        key = r.get(group, "") if group else ""
        series.setdefault(key, ([], []))
        series[key][0].append(float(r[x]))
        series[key][1].append(float(r[y]))
    for key, (xs, ys) in series.items():
        ax.plot(xs, ys, marker=".", label=str(key))
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    if group:
        ax.legend(title=group)
    svg_path = Path(csv_path).with_suffix(".svg")
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return svg_path


# --- commands -------------------------------------------------------------------

def _pfie_value(name, s):
    """PFIE for a CLI method name, plus note flags."""
    notes = []
    m = _FOCK_RE.match(name)
    if m:
        return pfie(FiMethod.FOCK, s, m=int(m.group(1))), notes
    if name == "coh-alt":
        if not coherent_forms_consistent(s):
            notes.append("coherent_forms_disagree")
        return pfie(FiMethod.COHERENT, s, coherent_form="alternate"), notes
    if name == "her":
        res = cfi_heralded(s)
        if res.truncated:
            notes.append("heralded_truncated")
        return res.fi / s.nS, notes
    return pfie(FiMethod(name), s), notes


def cmd_pfie(args, stdout):
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in PFIE_METHODS and not _FOCK_RE.match(m):
            raise UsageError(f"unknown method {m!r}; choose from {', '.join(PFIE_METHODS)} or fock<m>")
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for th in _floats(args.theta):
            for nS in _floats(args.ns):
                for nB in _floats(args.nb):
                    s = Scenario(th, nS, nB)
                    for m in methods:
                        val, notes = _pfie_value(m, s)
                        rows.append((m, th, nS, nB, float(val), ";".join(notes)))
    text = _csv_text("pfie", ["method", "theta", "nS", "nB", "pfie", "notes"], rows)
    path = _emit(text, args.out, stdout)
    if args.svg and path:
        _svg(path, "nB", "pfie", "method", logx=True)
    return EXIT_OK


def cmd_squeezing(args, stdout):
    nB = float(args.nb)
    rows = []
    for nS in _floats(args.ns):
        for th in _floats(args.theta):
            p = sld_params(Scenario(th, nS, nB))
            rows.append((nS, th, p.exists, p.omega, p.squeezing_db, "grid"))
        b = existence_boundary(nS, nB)
        rows.append((nS, b, None, None, None, "boundary"))
    text = _csv_text(
        "squeezing", ["nS", "theta", "exists", "omega", "squeezing_db", "kind"], rows
    )
    path = _emit(text, args.out, stdout)
    if args.svg and path:
        _svg(path, "theta", "squeezing_db", "nS")
    return EXIT_OK


def _mse_config(args):
    if args.receiver not in RECEIVERS:
        raise UsageError(f"unknown receiver {args.receiver!r}; choose from {', '.join(RECEIVERS)}")
    grid = _ints(args.n_grid) if args.n_grid else list(default_n_grid())
    return ExperimentConfig(
        scenario=Scenario(float(args.theta), float(args.ns), float(args.nb)),
        receiver=args.receiver,
        n_grid=tuple(grid),
        trials=int(args.trials),
        seed=int(args.seed),
        beta=float(args.beta),
        cutoff=int(args.cutoff),
        max_deficit=float(args.max_deficit),
        threads=int(args.threads),
        homodyne_convention=args.homodyne,
    )


def cmd_mse(args, stdout):
    cfg = _mse_config(args)
    started = _now()
    try:
        report = run_mse_experiment(cfg)
    except ReceiverExistenceError as exc:
        b = existence_boundary(cfg.scenario.nS, cfg.scenario.nB)
        sys.stderr.write(f"infeasible: {exc}; existence boundary theta* = {b}\n")
        return EXIT_INFEASIBLE
    flag_names = sorted(report.rows[0].flag_rates) if report.rows else []
    header = ["n", "mse", "c_theta", "ci95"] + [f"rate_{f}" for f in flag_names]
    rows = [
        [r.n, r.mse, r.c_theta, r.ci95] + [r.flag_rates[f] for f in flag_names]
        for r in report.rows
    ]
    text = _csv_text("mse", header, rows)
    path = _emit(text, args.out, stdout)
    if path is None:
        return EXIT_OK
    outputs = {str(path): _digest(path)}
    if args.svg:
        svg = _svg(path, "n", "c_theta", None, logx=True)
        outputs[str(svg)] = _digest(svg)
    manifest = {
        "command": "mse",
        "config": cfg.to_dict(),
        "tool_version": __version__,
        "seed": cfg.seed,
        "started": started,
        "finished": _now(),
        "outputs": outputs,
    }
    doc = report.to_dict()
    doc["manifest"] = manifest
    json_path = Path(args.report) if args.report else path.with_suffix(".json")
    json_path.write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")
    return EXIT_OK


def cmd_verify(args, stdout):
    def show(r):
        if not args.json:
            status = "PASS" if r.passed else "FAIL"
            stdout.write(
                f"{status}  {r.name:<28} value={r.value:.3e}  tol={r.tolerance:.1e}  "
                f"{r.seconds:7.2f}s  {r.detail}\n"
            )

    results = run_checks(args.filter, on_result=show)
    failed = [r.name for r in results if not r.passed]
    if args.json:
        doc = {
            "passed": not failed,
            "results": [
                {
                    "name": r.name,
                    "passed": r.passed,
                    "value": r.value if math.isfinite(r.value) else None,
                    "tolerance": r.tolerance if math.isfinite(r.tolerance) else None,
                    "seconds": r.seconds,
                    "detail": r.detail,
                }
                for r in results
            ],
        }
        _emit(json.dumps(doc, indent=2) + "\n", args.out, stdout)
    else:
        stdout.write(f"{len(results) - len(failed)}/{len(results)} checks passed\n")
        if failed:
            stdout.write("failed: " + ", ".join(failed) + "\n")
    return EXIT_VERIFY if failed else EXIT_OK


# --- parser ---------------------------------------------------------------------

def _common(p):
    p.add_argument("--seed", type=int, default=20240601, help="master seed")
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--config", default=None, help="JSON file with option values")
    p.add_argument("--svg", action="store_true", help="also render an SVG plot")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="transense", description="Fisher information, receiver design and Monte Carlo studies for estimating channel transmittance."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pfie", help="photon Fisher information efficiency table")
    _common(p)
    p.add_argument("--methods", default="ub,tmsv,coh,opa,sp,her",
                   help="comma list of: " + ",".join(PFIE_METHODS) + ",fock<m>")
    p.add_argument("--theta", default="0.5")
    p.add_argument("--ns", default="0.01")
    p.add_argument("--nb", default="0.01,0.1,1,10")
    p.set_defaults(func=cmd_pfie)

    p = sub.add_parser("squeezing", help="receiver squeezing factor versus transmittance")
    _common(p)
    p.add_argument("--nb", default="1")
    p.add_argument("--ns", default="0.1,0.01,0.001")
    p.add_argument("--theta", default=",".join(f"{t:.2f}" for t in [i / 100 for i in range(1, 100)]))
    p.set_defaults(func=cmd_squeezing)

    p = sub.add_parser("mse", help="Monte Carlo MSE convergence study")
    _common(p)
    p.add_argument("--receiver", default="tmsv", help=", ".join(RECEIVERS))
    p.add_argument("--theta", default="0.5")
    p.add_argument("--ns", default="0.01")
    p.add_argument("--nb", default="1")
    p.add_argument("--n-grid", dest="n_grid", default=None, help="comma list of probe counts")
    p.add_argument("--trials", type=int, default=5000)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--cutoff", type=int, default=9, help="photon-number resolution per detector")
    p.add_argument("--max-deficit", dest="max_deficit", type=float, default=1e-2,
                   help="raise the cutoff per trial until the pair table misses at most this mass")
    p.add_argument("--homodyne", choices=("fisher", "literal"), default="fisher",
                   help="homodyne variance convention")
    p.add_argument("--report", default=None, help="JSON report path (default: next to --out)")
    p.set_defaults(func=cmd_mse)

    p = sub.add_parser("verify", help="run the invariant checks")
    _common(p)
    p.add_argument("--filter", default=None, help="tag or name substring")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify)
    return parser


def _apply_config(parser, args, argv):
    """Fill options from ``--config`` unless they were given as flags."""
    if not args.config:
        return args
    try:
        doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config!r}: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError("config must be a JSON object")
    given = set()
    for tok in argv:
        if tok.startswith("--"):
            given.add(tok[2:].split("=", 1)[0].replace("-", "_"))
    for key, val in doc.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest) or dest in ("command", "func", "config"):
            raise UsageError(f"unknown config key {key!r}")
        if dest in given:
            continue
        if isinstance(val, list):
            val = ",".join(str(v) for v in val)
        setattr(args, dest, val)
    return args


def main(argv=None, stdout=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    stdout = sys.stdout if stdout is None else stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        args = _apply_config(parser, args, argv)
        return args.func(args, stdout)
    except UsageError as exc:
        sys.stderr.write(f"transense: error: {exc}\n")
        return EXIT_USAGE
    except (DomainError, UnsupportedRangeError) as exc:
        sys.stderr.write(f"transense: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
