"""Command-line entry point: ``opi-triangle <command> [options]``.

Exit codes: 0 ok, 1 verify-theorem found a strategy, 2 usage error,
3 not converged or out of budget, 4 no certificate.
"""
import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, bounds, certify, constraints, local, opi, orbits

EXIT_OK = 0
EXIT_FOUND = 1
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3
EXIT_NO_CERTIFICATE = 4

MAX_POLYGON = 9
SIG_DIGITS = 9
SCHEMA_VERSION = 1
THREADS_ENV = "OPI_TRIANGLE_THREADS"
LEDGER_ENV = "OPI_TRIANGLE_LEDGER"
DEFAULT_LEDGER = "opi-results.jsonl"


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# serialisation
# ---------------------------------------------------------------------------


def _fmt_fraction(q):
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def stable(obj):
    """JSON-ready copy with floats at 9 significant digits and fractions as
    strings."""
    if isinstance(obj, dict):
        return {str(k): stable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [stable(v) for v in obj]
    if isinstance(obj, Fraction):
        return _fmt_fraction(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not np.isfinite(v):
            return str(v)
        return float(f"{v:.{SIG_DIGITS}g}")
    return obj


def dumps(obj):
    return json.dumps(stable(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_csv_cell(v) for v in row])
    return buf.getvalue()


def _csv_cell(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.{SIG_DIGITS}g}"
    if isinstance(v, Fraction):
        return _fmt_fraction(v)
    return v


def sha256(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class RunManifest:
    command: str
    parameters: dict
    seed: object = None
    version: str = __version__
    wall_time_s: float = 0.0
    input_digest: str = ""
    output_digest: str = ""
    schema: int = SCHEMA_VERSION
    extra: dict = field(default_factory=dict)

    @classmethod
    def create(cls, command, parameters, output, wall_time, seed=None):
        params = {k: v for k, v in sorted(parameters.items())}
        return cls(
            command=command,
            parameters=params,
            seed=seed,
            wall_time_s=wall_time,
            input_digest=sha256(json.dumps(stable(params), sort_keys=True)),
            output_digest=sha256(output),
        )


def _emit(args, text, manifest_params, t0, seed=None):
    """Write ``text`` to ``--out`` (or stdout) and the manifest if asked."""
    if getattr(args, "out", None):
        Path(args.out).write_text(text, encoding="utf-8", newline="")
    else:
        sys.stdout.write(text)
    if getattr(args, "manifest", None):
        m = RunManifest.create(args.command, manifest_params, text, time.perf_counter() - t0, seed)
        Path(args.manifest).write_text(dumps(asdict(m)), encoding="utf-8")


def _params(args, *names):
    return {n: getattr(args, n) for n in names}


def _check_polygon(n, upper=MAX_POLYGON):
    if n < orbits.MIN_POLYGON or n > upper:
        raise UsageError(f"--n must lie in {orbits.MIN_POLYGON}..{upper}, got {n}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def enumeration_record(n, split=constraints.OPEN_SPLIT):
    words = [w.display for w in orbits.enumerate_words(n)]
    outcomes = orbits.enumerate_outcome_orbits(n)
    cs = constraints.build_constraints(n, constraints.SINGLE, split)
    return {
        "schema": SCHEMA_VERSION,
        "polygon": n,
        "split": split,
        "correlators": words,
        "outcome_orbits": [o.canonical for o in outcomes],
        "linear": [c.display for c in cs.linear],
        "quadratic": [q.display for q in cs.quadratic],
        "counts": {
            "correlators": len(words),
            "outcomes": len(outcomes),
            "linear": len(cs.linear),
            "quadratic": len(cs.quadratic),
        },
    }


def cmd_enumerate(args):
    t0 = time.perf_counter()
    _check_polygon(args.n)
    rec = enumeration_record(args.n, args.split)
    if args.format == "text":
        lines = [f"# {args.n}-gon"]
        lines += [f"{k}: {v}" for k, v in sorted(rec["counts"].items())]
        lines.append("correlators: " + " ".join(rec["correlators"]))
        lines += ["linear:"] + [f"  {c}" for c in rec["linear"]]
        lines += ["quadratic:"] + [f"  {c}" for c in rec["quadratic"]]
        text = "\n".join(lines) + "\n"
    else:
        text = dumps(rec)
    _emit(args, text, _params(args, "n", "split", "format"), t0)
    return EXIT_OK


def _ledger_path(args):
    if getattr(args, "no_ledger", False):
        return None
    return args.ledger or os.environ.get(LEDGER_ENV) or DEFAULT_LEDGER


def read_ledger(path):
    """Bound records from a JSON-lines results ledger, latest per key."""
    latest = {}
    p = Path(path)
    if not p.exists():
        return []
    for line in p.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        latest[(rec["polygon"], rec["mode"], rec["direction"], rec.get("split"))] = rec
    return [latest[k] for k in sorted(latest, key=lambda k: tuple(str(x) for x in k))]


def _load_checkpoint(path):
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return data.get("start"), data.get("estimates")


def cmd_bound(args):
    t0 = time.perf_counter()
    _check_polygon(args.n)
    cs = constraints.build_constraints(args.n, args.mode, args.split)
    start, estimates = None, None
    if args.resume:
        start, estimates = _load_checkpoint(args.resume)
    if args.exact:
        if cs.quadratic:
            raise UsageError(f"--exact needs a system without quadratics (n <= 5), got n={args.n}")
        res = bounds.exact_lp_bound(cs, args.direction)
    else:
        opts = bounds.SlpOptions(
            tol=args.tol, max_iter=args.max_iter, start=start, estimates=estimates,
            time_limit=args.time_limit,
        )
        res = bounds.slp_bound(cs, args.direction, opts)
    rec = res.to_dict()
    rec["split"] = args.split
    rec["constraint_counts"] = cs.counts()
    text = dumps(rec)
    if args.checkpoint:
        ckpt = {
            "start": res.bound,
            "estimates": {name: float(v) for name, v in zip(cs.variables, res.point)},
        }
        Path(args.checkpoint).write_text(json.dumps(ckpt, sort_keys=True), encoding="utf-8")
    ledger = _ledger_path(args)
    if ledger:
        with open(ledger, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(stable(rec), sort_keys=True) + "\n")
    _emit(args, text, _params(args, "n", "mode", "direction", "tol", "split", "exact"), t0)
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_fit(args):
    t0 = time.perf_counter()
    recs = [
        r for r in read_ledger(args.ledger or os.environ.get(LEDGER_ENV) or DEFAULT_LEDGER)
        if r["mode"] == args.mode and r["direction"] == args.direction
        and r.get("split", constraints.OPEN_SPLIT) == args.split
    ]
    series = sorted((r["polygon"], r["bound"]) for r in recs)
    try:
        fit = bounds.fit_extrapolate(series)
    except bounds.FitFailed as exc:
        raise UsageError(str(exc)) from exc
    rec = {"series": series, "limit": fit.limit, "amplitude": fit.amplitude, "rate": fit.rate,
           "model": "a + b*exp(-c*n)"}
    _emit(args, dumps(rec), _params(args, "mode", "direction", "split"), t0)
    return EXIT_OK


def cmd_certify(args):
    t0 = time.perf_counter()
    _check_polygon(args.n)
    cs = constraints.build_constraints(args.n, constraints.SINGLE)
    if not cs.quadratic:
        res = bounds.exact_lp_bound(cs, "max")
        rec = {"polygon": args.n, "method": "exact_lp", "root": _fmt_fraction(res.exact),
               "root_value": float(res.exact)}
        text = dumps(rec) if args.format == "json" else (
            f"# exact bound, {args.n}-gon (rational LP)\nroot: {_fmt_fraction(res.exact)}\n"
        )
        _emit(args, text, _params(args, "n", "format"), t0)
        return EXIT_OK
    try:
        cert = certify.certify_polygon(args.n)
    except certify.NoCertificate as exc:
        sys.stderr.write(f"no certificate: {exc}\n")
        return EXIT_NO_CERTIFICATE
    rec = cert.to_dict()
    rec["method"] = "null_space"
    text = dumps(rec) if args.format == "json" else cert.to_text()
    _emit(args, text, _params(args, "n", "format"), t0)
    return EXIT_OK


def matrix_csv(n):
    m = orbits.build_matrix(n)
    words = {w.canonical: w.display for w in orbits.enumerate_words(n)}
    header = [""] + ["1"] + [words[w] for w in m.row_labels[1:]]
    rows = [[label] + [int(v) for v in m.entries[:, j]] for j, label in enumerate(m.col_labels)]
    return csv_text(header, rows)


def cmd_matrix(args):
    t0 = time.perf_counter()
    _check_polygon(args.n)
    _emit(args, matrix_csv(args.n), _params(args, "n"), t0)
    return EXIT_OK


def region_rows(bound_lines):
    """Rows ``kind,label,e2_start,e3o_start,e2_end,e3o_end`` for the OPI
    plane: positivity edges, the Finner segment and ``E2 = bound`` lines."""
    rows = []
    for label, (p, q) in opi.triangle_edges().items():
        rows.append(["positivity", label, p.e2, p.e3o, q.e2, q.e3o])
    a, b, c = opi.finner_line()
    p, q = opi.clip_line(a, b, c)
    rows.append(["finner", f"{a}*E2+{b}*E3o={c}", p.e2, p.e3o, q.e2, q.e3o])
    for label, value in bound_lines:
        seg = opi.clip_line(1, 0, value)
        if seg is None:
            continue
        p, q = seg
        rows.append(["bound", label, p.e2, p.e3o, q.e2, q.e3o])
    return rows


def cmd_region(args):
    t0 = time.perf_counter()
    lines = []
    ledger = args.ledger or os.environ.get(LEDGER_ENV) or DEFAULT_LEDGER
    seen = set()
    for rec in read_ledger(ledger):
        key = (rec["polygon"], rec["mode"], rec["direction"])
        seen.add(key)
        lines.append((f"n={rec['polygon']} {rec['mode']} {rec['direction']}", rec["bound"]))
    for n in range(orbits.MIN_POLYGON, args.max_n + 1):
        for direction in ("max", "min"):
            if (n, args.mode, direction) in seen:
                continue
            res = bounds.slp_bound(constraints.build_constraints(n, args.mode), direction)
            lines.append((f"n={n} {args.mode} {direction}", res.bound))
    lines.sort(key=lambda t: t[0])
    text = csv_text(["kind", "label", "e2_start", "e3o_start", "e2_end", "e3o_end"],
                    region_rows(lines))
    _emit(args, text, _params(args, "max_n", "mode"), t0)
    return EXIT_OK


def cmd_scan(args):
    t0 = time.perf_counter()
    if args.k < 1:
        raise UsageError("--k must be positive")
    if args.samples is None:
        if args.k > local.EXHAUSTIVE_MAX_K:
            raise UsageError(f"exhaustive scans need k <= {local.EXHAUSTIVE_MAX_K}; pass --samples")
        sampling = "exhaustive"
    else:
        sampling = "random"
    header = ["k", "strategy_hash", "e2_avg", "e3_avg", "opi_dev", "finner_margin"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for codes, e2, e3, dev, margin in local.scan_arrays(
        args.k, sampling, seed=args.seed, count=args.samples or 0
    ):
        if args.opi_only:
            keep = dev <= local.OPI_TOL
            codes = [c for c, k in zip(codes, keep) if k]
            e2, e3, dev, margin = e2[keep], e3[keep], dev[keep], margin[keep]
        for i in range(len(e2)):
            w.writerow([args.k, int(codes[i]), _csv_cell(e2[i]), _csv_cell(e3[i]),
                        _csv_cell(dev[i]), _csv_cell(margin[i])])
    _emit(args, buf.getvalue(), _params(args, "k", "samples", "seed", "opi_only"), t0,
          seed=args.seed if sampling == "random" else None)
    return EXIT_OK


def cmd_verify_theorem(args):
    t0 = time.perf_counter()
    checkpoint = None
    if args.resume:
        data = json.loads(Path(args.resume).read_text(encoding="utf-8"))
        checkpoint = local.SearchCheckpoint(
            data["k"], data["require_opi"], data["position"], [tuple(t) for t in data["triples"]]
        )
    try:
        found = local.search_finner_saturating(args.k, True, budget=args.time_limit,
                                               checkpoint=checkpoint)
    except local.BudgetExceeded as exc:
        if args.checkpoint:
            Path(args.checkpoint).write_text(json.dumps(asdict(exc.checkpoint)), encoding="utf-8")
        sys.stderr.write(f"{exc}\n")
        return EXIT_NOT_CONVERGED
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if not found:
        text = "EMPTY\n"
        code = EXIT_OK
    else:
        text = "".join(f"{s.code}\n" for s in found)
        code = EXIT_FOUND
    _emit(args, text, _params(args, "k"), t0)
    return code


def _parse_triple(text, size):
    try:
        vals = [Fraction(v.strip()) for v in text.split(",")]
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"malformed coordinates {text!r}") from exc
    if len(vals) != size:
        raise UsageError(f"expected {size} comma-separated values, got {text!r}")
    return vals


def cmd_finner(args):
    t0 = time.perf_counter()
    if (args.p is None) == (args.e is None):
        raise UsageError("give exactly one of --p and --e")
    if args.p is not None:
        d = opi.OpiDistribution(*_parse_triple(args.p, 3))
        try:
            c = opi.probs_to_correlators(d)
        except opi.NormalizationViolated as exc:
            raise UsageError(str(exc)) from exc
    else:
        c = opi.OpiCorrelators(*_parse_triple(args.e, 2))
        d = opi.correlators_to_probs(c)
    margin = opi.finner_margin_opi(d)
    rec = {
        "probs": {"p111": float(d.p111), "p112": float(d.p112), "p123": float(d.p123)},
        "probs_exact": {"p111": d.p111, "p112": d.p112, "p123": d.p123},
        "correlators": {"e2": float(c.e2), "e3o": float(c.e3o)},
        "finner_margin": float(margin),
        "finner_margin_exact": margin,
        "valid": d.valid,
    }
    _emit(args, dumps(rec), _params(args, "p", "e"), t0)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _common(p, out=True):
    if out:
        p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--manifest", help="write a RunManifest JSON here")


def build_parser():
    parser = argparse.ArgumentParser(prog="opi-triangle", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", help="word orbits, outcome orbits and constraints")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--split", choices=constraints.SPLITS, default=constraints.OPEN_SPLIT)
    _common(p)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("bound", help="bound E2 by successive linear programming")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mode", choices=constraints.MODES, default=constraints.SINGLE)
    p.add_argument("--direction", choices=("max", "min"), default="max")
    p.add_argument("--tol", type=float, default=bounds.DEFAULT_TOL)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--split", choices=constraints.SPLITS, default=constraints.OPEN_SPLIT)
    p.add_argument("--exact", action="store_true", help="rational LP (n <= 5)")
    p.add_argument("--time-limit", type=float, help="seconds before returning the best iterate")
    p.add_argument("--checkpoint", help="write the final estimates here")
    p.add_argument("--resume", help="start from a checkpoint written by --checkpoint")
    p.add_argument("--ledger", help=f"results ledger (default ${LEDGER_ENV} or {DEFAULT_LEDGER})")
    p.add_argument("--no-ledger", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("fit", help="extrapolate a bound series from the results ledger")
    p.add_argument("--mode", choices=constraints.MODES, default=constraints.CUMULATIVE)
    p.add_argument("--direction", choices=("max", "min"), default="max")
    p.add_argument("--split", choices=constraints.SPLITS, default=constraints.OPEN_SPLIT)
    p.add_argument("--ledger")
    _common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("certify", help="exact bound from the optimal zero pattern")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--format", choices=("json", "text"), default="json")
    _common(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("matrix", help="correlator matrix as CSV")
    p.add_argument("--n", type=int, required=True)
    _common(p)
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("region", help="OPI plane data: positivity, Finner and bound lines")
    p.add_argument("--max-n", type=int, default=6, help="compute bounds up to this size")
    p.add_argument("--mode", choices=constraints.MODES, default=constraints.CUMULATIVE)
    p.add_argument("--ledger", help="also draw every bound recorded in this ledger")
    _common(p)
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("scan", help="statistics of local grid strategies as CSV")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--samples", type=int, help="random strategies (default: exhaustive)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--opi-only", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("verify-theorem", help="search OPI Finner-saturating grid strategies")
    p.add_argument("--k", type=int, required=True, choices=(2, 4))
    p.add_argument("--time-limit", type=float)
    p.add_argument("--checkpoint", help="where to save progress when the time limit hits")
    p.add_argument("--resume")
    _common(p)
    p.set_defaults(func=cmd_verify_theorem)

    p = sub.add_parser("finner", help="coordinate conversion and Finner margin")
    p.add_argument("--p", help="p111,p112,p123")
    p.add_argument("--e", help="e2,e3o")
    _common(p)
    p.set_defaults(func=cmd_finner)
    return parser


def _set_threads():
    value = os.environ.get(THREADS_ENV)
    if not value:
        return
    try:
        import numba

        numba.set_num_threads(max(1, min(int(value), numba.config.NUMBA_NUM_THREADS)))
    except (ImportError, ValueError):
        pass


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        import logging

        logging.basicConfig(level=logging.INFO)
    _set_threads()
    try:
        return args.func(args)
    except (UsageError, orbits.UnsupportedSize) as exc:
        sys.stderr.write(f"opi-triangle {args.command}: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
