"""Command line entry point.

Every command reads a problem config (JSON), runs one pipeline and writes
CSV and/or JSON artifacts into ``--out``. Artifacts carry the seed, a hash of
the config, the tool version and the ``(n, m, delta)`` parameters, and never a
timestamp, so reruns with the same seed are byte-identical.

Exit codes: 0 success, 2 config error, 3 parameter error, 4 acceptance
failure, 5 truncation exceeded. Failures print a JSON object to stderr.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from . import error_lab, tract_probe
from .complexity import DELTA_EXP, complexity_table, m_of_n
from .errors import ConfigError, ParameterError, RanwlsError, TruncationError
from .rng import make_stream
from .sampler import SamplingDensity, draw_nodes
from .spectral import CoefficientFunction, ProblemInstance, WeightFamily
from .wls import draw_accepted, g_error, solve

TRUNCATED_MARKER = "truncated"
STOCHASTIC = {"sample", "approximate", "error-curve", "concentration", "exp-decay"}
ALL_NOTIONS = [f"{k}-{b}" for k in ("ALG", "EXP") for b in tract_probe.NOTIONS]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _family(config: dict, M: int):
    """Spectral family for the grid commands: an explicit ``family`` or the config weights."""
    fam = config.get("family")
    if fam is None:
        return tract_probe.ProductFamily(WeightFamily.from_dict(config["weights"]), M)
    fam = dict(fam)
    try:
        return tract_probe.SequenceFamily(fam.pop("kind"), int(fam.pop("M", M)), **fam)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad family entry: {exc}") from None


def _parse_function(text: str) -> CoefficientFunction:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--function is not valid JSON: {exc}") from None
    coeffs = {}
    for k, v in raw.items():
        coeffs[int(k)] = complex(v[0], v[1]) if isinstance(v, list) else float(v)
    return CoefficientFunction.from_dict(coeffs)


class Artifacts:
    def __init__(self, out: Path, provenance: dict):
        self.out = out
        self.provenance = provenance
        out.mkdir(parents=True, exist_ok=True)

    def write_json(self, name: str, payload: dict) -> Path:
        path = self.out / name
        doc = _clean({"provenance": self.provenance, **payload})
        path.write_text(json.dumps(doc, sort_keys=True, indent=1, default=_jsonable, allow_nan=False) + "\n")
        return path

    def write_csv(self, name: str, rows: list, columns: list) -> Path:
        buf = io.StringIO()
        for key in sorted(self.provenance):
            val = self.provenance[key]
            buf.write(f"# {key}={json.dumps(val, sort_keys=True, default=_jsonable)}\n")
        writer = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(_clean(row))
        path = self.out / name
        path.write_text(buf.getvalue())
        return path

    def write_text(self, name: str, text: str) -> Path:
        path = self.out / name
        path.write_text(text)
        return path


def _clean(obj):
    """Replaces infinities by the truncation marker and NaN by None."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (float, np.floating)):
        if math.isinf(obj):
            return TRUNCATED_MARKER
        if math.isnan(obj):
            return None
        return float(obj)
    return obj


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _m_for(args, n):
    m = args.m if args.m is not None else m_of_n(n, args.delta)
    if m < 1:
        raise ParameterError(f"n={n} gives m=0 at delta={args.delta}; pass -m or increase n")
    return m


def cmd_sample(args, instance, art):
    m = _m_for(args, args.n)
    if args.accepted:
        X, retries = draw_accepted(instance, m, args.n, make_stream(args.seed), args.max_retries, seed=args.seed)
    else:
        X, retries = draw_nodes(SamplingDensity(instance, m), args.n, make_stream(args.seed), seed=args.seed), 0
    art.provenance.update(n=args.n, m=m, delta=args.delta)
    art.write_json("sample.json", {"sample": json.loads(X.to_json()), "h_values": X.h_values, "retries": retries})
    return f"sample: n={args.n} m={m} retries={retries}"


def cmd_approximate(args, instance, art):
    m = _m_for(args, args.n)
    if args.function:
        f = _parse_function(args.function)
    else:
        f = error_lab.battery_functions(instance, m, args.seed)[-1][1]
    X, retries = draw_accepted(instance, m, args.n, make_stream(args.seed), args.max_retries, seed=args.seed)
    model = solve(instance, m, X, f(instance.basis, X.nodes), retries=retries)
    err = g_error(instance, model, f)
    rel = err / math.sqrt(f.g_norm_sq()) if f.g_norm_sq() > 0 else err
    art.provenance.update(n=args.n, m=m, delta=args.delta)
    art.write_json(
        "approximate.json",
        {
            "model": json.loads(model.to_json()),
            "g_error": err,
            "relative_g_error": rel,
            "function": {"support": f.support, "coeffs": [complex(c) for c in f.coeffs]},
        },
    )
    return f"approximate: n={args.n} m={m} retries={retries} deviation={model.deviation:.6g} g_error={err:.6g}"


ERROR_COLUMNS = ["n", "m", "delta", "label", "mean_sq", "std_err", "bound_sq", "retries_mean", "R", "within_bound"]


def cmd_error_curve(args, instance, art):
    rows = error_lab.error_curve(instance, args.n_grid, args.delta, args.replications, args.seed,
                                 args.threads, args.max_retries)
    if not rows:
        raise ParameterError("every n in the grid gives m=0; increase n or delta")
    table = [dict(r.row(), within_bound=r.within_bound) for r in rows]
    art.provenance.update(n=args.n_grid, m=sorted({r.m for r in rows}), delta=args.delta)
    art.write_csv("error_curve.csv", table, ERROR_COLUMNS)
    art.write_json("error_curve.json", {"rows": table})
    bad = sum(not r.within_bound for r in rows)
    return f"error-curve: {len(rows)} estimates, {bad} above bound+3se"


CONC_COLUMNS = ["m", "n", "t", "R", "empirical_prob", "bound", "raw_bound", "holds"]


def cmd_concentration(args, instance, art):
    reps = error_lab.concentration_grid(instance, args.m_grid, args.n_grid, args.t_grid, args.replications,
                                        args.seed, args.threads)
    rows = [dict(m=r.m, n=r.n, t=r.t, R=r.R, empirical_prob=r.empirical_prob, bound=r.bound,
                 raw_bound=r.raw_bound, holds=r.holds) for r in reps]
    art.provenance.update(n=args.n_grid, m=args.m_grid, delta=None)
    art.write_csv("concentration.csv", rows, CONC_COLUMNS)
    art.write_json("concentration.json", {"rows": rows})
    return f"concentration: {len(rows)} cells, {sum(r.holds for r in reps)} within bound"


COMPLEXITY_COLUMNS = ["eps", "d", "n_wor", "n_wor_quarter", "n_wor_scaled",
                      "bound_log", "bound_log_delta", "bound_power", "bound_power_delta"]


def _d_grid(args, config):
    return args.d_grid if args.d_grid else [config["d"]]


def cmd_complexity(args, instance, art, config):
    fam = _family(config, config["M"])
    spectra = {d: fam.spectrum(d) for d in _d_grid(args, config)}
    table = complexity_table(spectra, args.eps_grid, args.criterion, args.delta, args.omega)
    rows = table.rows()
    art.provenance.update(delta=args.delta, omega=args.omega, criterion=table.criterion)
    art.write_csv("complexity.csv", rows, COMPLEXITY_COLUMNS)
    art.write_json("complexity.json", {"rows": rows})
    truncated = sum(math.isinf(r["n_wor"]) for r in rows)
    if truncated and args.strict_truncation:
        raise TruncationError(f"{truncated} cells exceed the enumerated spectrum; enlarge M")
    return f"complexity: {len(rows)} cells, {truncated} truncated"


def cmd_tractability(args, instance, art, config):
    fam = _family(config, config["M"])
    table = tract_probe.probe_grid(fam, _d_grid(args, config), args.eps_grid, args.criterion, args.delta, args.omega)
    s, t = args.st
    reports = [
        tract_probe.classify(table, notion, {"s": s, "t": t} if "(S,T)" in notion.upper() else None)
        for notion in args.notions
    ]
    transfer = tract_probe.transfer_report(table)
    art.provenance.update(delta=args.delta, omega=args.omega, criterion=table.criterion)
    art.write_json("tractability.json", {"reports": [r.to_dict() for r in reports], "transfer": transfer})
    text = "\n".join(r.summary() for r in reports) + "\n"
    art.write_text("tractability.txt", text)
    counts = {v: sum(r.verdict == v for r in reports) for v in tract_probe.VERDICTS}
    return "tractability: " + ", ".join(f"{k}={v}" for k, v in counts.items())


DECAY_COLUMNS = ["n", "m", "rms", "rms_std_err", "bound_internal", "bound_decay", "retries_mean",
                 "within_internal", "within_decay"]


def cmd_exp_decay(args, instance, art):
    rep = error_lab.exp_decay_check(instance, args.n_grid, args.seed, args.replications, args.threads,
                                    args.max_retries)
    rows = [dict(asdict(r), within_internal=r.within_internal, within_decay=r.within_decay) for r in rep.rows]
    art.provenance.update(n=args.n_grid, m=[r.m for r in rep.rows], delta=DELTA_EXP)
    art.write_csv("exp_decay.csv", rows, DECAY_COLUMNS)
    art.write_json("exp_decay.json", {"q": rep.q, "A_decay": rep.A, "q2": rep.q2, "rows": rows,
                                      "curves_ordered": rep.curves_ordered})
    return f"exp-decay: {len(rows)} grid points, all within 4 e_wor: {rep.all_within}"


COMMANDS = {
    "sample": cmd_sample,
    "approximate": cmd_approximate,
    "error-curve": cmd_error_curve,
    "concentration": cmd_concentration,
    "complexity": cmd_complexity,
    "tractability": cmd_tractability,
    "exp-decay": cmd_exp_decay,
}

DEFAULT_DELTA = {"complexity": 0.01, "tractability": 0.01, "exp-decay": DELTA_EXP}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ranwls", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"ranwls {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", default=".")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--replications", type=int, default=2000 if name == "concentration" else 200)
        p.add_argument("--delta", type=float, default=DEFAULT_DELTA.get(name, 0.5))
        p.add_argument("--omega", type=float, default=0.5)
        p.add_argument("--criterion", choices=["abs", "nor", "ABS", "NOR"], default="abs")
        p.add_argument("--eps-grid", type=_floats, default=[0.5, 0.1, 0.01])
        p.add_argument("--d-grid", type=_ints, default=None)
        p.add_argument("-n", "--n", type=int, default=1024)
        p.add_argument("-m", "--m", type=int, default=None)
        p.add_argument("--n-grid", type=_ints, default=[200, 400, 800, 1600] if name == "exp-decay" else [512, 2048])
        p.add_argument("--m-grid", type=_ints, default=[2, 4, 8])
        p.add_argument("--t-grid", type=_floats, default=[0.3, 0.5])
        p.add_argument("--st", type=_floats, default=[1.0, 1.0], help="s,t for (s,t)-WT")
        p.add_argument("--notions", type=lambda s: [v.strip() for v in s.split(";")], default=ALL_NOTIONS,
                       help="semicolon-separated, e.g. 'ALG-PT;EXP-(s,t)-WT'")
        p.add_argument("--function", help='coefficients as JSON, e.g. {"1": 0.3, "5": 0.4}')
        p.add_argument("--max-retries", type=int, default=100)
        p.add_argument("--accepted", action="store_true", help="sample: redraw until accepted")
        p.add_argument("--strict-truncation", action="store_true")
    return parser


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command in STOCHASTIC and args.seed is None:
            raise ConfigError(f"--seed is required for {args.command}")
        if len(args.st) != 2:
            raise ConfigError("--st takes two numbers s,t")
        config = load_config(args.config)
        instance = ProblemInstance.from_config(config)
        provenance = {
            "tool": "ranwls",
            "version": __version__,
            "command": args.command,
            "seed": args.seed,
            "config_hash": config_hash(config),
        }
        art = Artifacts(Path(args.out), provenance)
        fn = COMMANDS[args.command]
        if args.command in ("complexity", "tractability"):
            summary = fn(args, instance, art, config)
        else:
            summary = fn(args, instance, art)
    except RanwlsError as exc:
        print(json.dumps(exc.to_dict(), sort_keys=True, default=_jsonable), file=sys.stderr)
        return exc.exit_code
    print(summary)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
