"""Command-line entry point: ``reusable-holdout {experiment,bounds,mm-demo,sparse-demo}``.

Exit status is 0 on success, 2 for usage errors and 3 when a run would
exceed a resource cap.
"""

import argparse
import csv
import datetime
import io
import sys

import numpy as np

from reusable_holdout import __version__, bounds
from reusable_holdout.errors import InvalidParameterError, ResourceError
from reusable_holdout.experiments import ExperimentConfig, SignalSpec, run_experiment
from reusable_holdout.mechanisms import EXHAUSTED, SparseValidate, sparse_validate_ell
from reusable_holdout.median_mechanism import hard_query_bound, mm_new
from reusable_holdout.queries import StatisticalQuery
from reusable_holdout.seeding import make_rng

EXIT_USAGE = 2
EXIT_RESOURCE = 3

CSV_HEADER = ("k", "series", "mean", "std", "reps")

# experiment parameters written to / read from the manifest, in order
_MANIFEST_KEYS = ("n", "d", "k", "reps", "signal", "mechanism", "T", "tau", "budget", "noise", "seed")


class UsageError(Exception):
    pass


def _fmt(x):
    return format(x, ".6g")


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


# -- experiment ---------------------------------------------------------------

def _experiment_config(args):
    if args.budget is not None and args.mechanism != "thresholdout":
        raise UsageError("--budget only applies to --mechanism thresholdout")
    return ExperimentConfig(
        n=args.n, d=args.d, k_values=args.k or (10, 50, 100, 200, 500),
        repetitions=args.reps, signal=SignalSpec.parse(args.signal),
        mechanism=args.mechanism, threshold=args.T, tau_noise=args.tau,
        budget=args.budget, noise=args.noise, seed=args.seed)


def _manifest_params(cfg):
    return {
        "n": cfg.n, "d": cfg.d, "k": " ".join(str(k) for k in cfg.k_values),
        "reps": cfg.repetitions, "signal": str(cfg.signal), "mechanism": cfg.mechanism,
        "T": repr(cfg.threshold), "tau": repr(cfg.tau_noise),
        "budget": cfg.effective_budget if cfg.mechanism == "thresholdout" else "",
        "noise": cfg.noise.value, "seed": cfg.seed,
    }


def read_manifest(path):
    values = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                key, _, value = line.partition("=")
                values[key.strip()] = value.strip()
    return values


def _apply_manifest(args, path):
    values = read_manifest(path)
    if values.get("subcommand", "experiment") != "experiment":
        raise UsageError(f"{path} is not an experiment manifest")
    missing = [key for key in _MANIFEST_KEYS if key not in values]
    if missing:
        raise UsageError(f"manifest {path} lacks {', '.join(missing)}")
    args.n, args.d = int(values["n"]), int(values["d"])
    args.k = [int(k) for k in values["k"].split()]
    args.reps, args.seed = int(values["reps"]), int(values["seed"])
    args.signal, args.mechanism, args.noise = values["signal"], values["mechanism"], values["noise"]
    args.T, args.tau = float(values["T"]), float(values["tau"])
    args.budget = int(values["budget"]) if values["budget"] else None


def write_csv(result, stream):
    writer = csv.writer(stream, lineterminator="\r\n")
    writer.writerow(CSV_HEADER)
    for k, series, mean, std, reps in result.rows():
        writer.writerow((k, series, repr(mean), repr(std), reps))


def cmd_experiment(args, out):
    if args.from_manifest:
        _apply_manifest(args, args.from_manifest)
    cfg = _experiment_config(args)
    started = _now()
    result = run_experiment(cfg)
    buf = io.StringIO(newline="")
    write_csv(result, buf)
    if args.out == "-":
        out.write(buf.getvalue())
        return 0
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    manifest = {"subcommand": "experiment", **_manifest_params(cfg),
                "version": __version__, "started": started, "finished": _now()}
    with open(args.out + ".manifest", "w", encoding="utf-8") as fh:
        for key, value in manifest.items():
            fh.write(f"{key}={value}\n")
    out.write(f"wrote {args.out} and {args.out}.manifest\n")
    return 0


# -- bounds -------------------------------------------------------------------

def _pair(text):
    try:
        a, b = text.split(",")
        return float(a), float(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A,B got {text!r}") from None


def _bounds_result(args):
    op = args.op
    if op == "dp-compose-basic":
        eps, delta = bounds.dp_compose_basic([bounds.PrivacyParams(*p) for p in args.param])
        return {"epsilon": eps, "delta": delta}
    if op == "dp-compose-advanced":
        eps, delta = bounds.dp_compose_advanced(args.eps, args.delta, args.m, args.delta_prime)
        return {"epsilon": eps, "delta": delta}
    if op == "mi-from-dp":
        k, beta = bounds.maxinfo_from_dp_pure(args.eps, args.n)
    elif op == "mi-from-dp-iid":
        k, beta = bounds.maxinfo_from_dp_iid(args.eps, args.n, args.beta)
    elif op == "mi-from-dl":
        k, beta = bounds.maxinfo_from_dl(args.range, args.beta)
    elif op == "mi-compose":
        k, beta = bounds.maxinfo_compose([bounds.MaxInfoBound(*b) for b in args.bound])
    elif op == "bad-event":
        return {"probability": bounds.bad_event_bound(bounds.MaxInfoBound(args.k, args.beta), args.p)}
    elif op == "mcdiarmid":
        return {"probability": bounds.mcdiarmid_bound(bounds.ConcentrationParams(args.c, args.n, args.alpha))}
    else:
        eps, fail = bounds.dp_generalization_bound(bounds.ConcentrationParams(args.c, args.n, args.tau))
        return {"required_epsilon": eps, "failure_probability": fail}
    return {"k_bits": k, "beta": beta}


def cmd_bounds(args, out):
    out.write(f"operation={args.op}\n")
    echoed = {}
    for key, value in vars(args).items():
        if key in ("command", "op", "func"):
            continue
        if isinstance(value, list):
            value = " ".join(",".join(_fmt(v) for v in item) for item in value)
        elif isinstance(value, float):
            value = _fmt(value)
        echoed[key] = str(value)
        out.write(f"{key}={value}\n")
    for key, value in _bounds_result(args).items():
        # a result equal to an echoed input (e.g. an unchanged beta) is not repeated
        if echoed.get(key) != _fmt(value):
            out.write(f"{key}={_fmt(value)}\n")
    return 0


# -- median mechanism demo ----------------------------------------------------

def _load_query_suite(spec, domain_size):
    """A deterministic analyst: ``analyst(prefix) -> query or None``."""
    top = max(domain_size - 1, 1)
    if spec == "constant":
        queries = [StatisticalQuery.constant(v) for v in (0.0, 0.5, 1.0)]
        return lambda prefix: queries[len(prefix)] if len(prefix) < len(queries) else None
    if spec == "builtin":
        first = StatisticalQuery(lambda x: x / top, label="scaled-value")

        def analyst(prefix):
            if not prefix:
                return first
            if len(prefix) >= domain_size + 1:
                return None
            # follow up on whichever end of the domain the last answer leans to
            last = prefix[-1][1]
            target = (len(prefix) - 1) % domain_size if last < 0.5 else top - (len(prefix) - 1) % domain_size
            return StatisticalQuery(lambda x, t=target: float(x == t), label=f"is[{target}]")
        return analyst
    tables = []
    with open(spec, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            values = [float(v) for v in line.split(",")]
            if len(values) != domain_size:
                raise UsageError(f"query {line!r} needs {domain_size} values")
            tables.append(StatisticalQuery.from_table(dict(enumerate(values))))
    return lambda prefix: tables[len(prefix)] if len(prefix) < len(tables) else None


def cmd_mm_demo(args, out):
    if args.domain_size < 2:
        raise UsageError("--domain-size must be at least 2")
    analyst = _load_query_suite(args.queries, args.domain_size)
    rng = make_rng(args.seed, "mm-demo")
    weights = rng.dirichlet(np.full(args.domain_size, 0.5))
    dataset = list(rng.choice(args.domain_size, size=args.n, p=weights))
    state = mm_new(range(args.domain_size), args.m, args.tau)
    out.write(f"alpha={_fmt(state.alpha)} t={state.t} candidates={len(state.counts)}\n")
    out.write("i,a_pub,a_priv,answer,hard\n")
    while state.queries_seen < args.m:
        query = analyst(state.transcript())
        if query is None:
            break
        state.answer(query, dataset)
        s = state.steps[-1]
        out.write(f"{state.queries_seen},{_fmt(s.public)},{_fmt(s.private)},{_fmt(s.answer)},{int(s.hard)}\n")
    out.write(f"hard_count={len(state.hard_records)}\n")
    out.write(f"hard_bound={_fmt(hard_query_bound(args.domain_size, args.m, args.tau))}\n")
    return 0


# -- sparse validate demo -----------------------------------------------------

def cmd_sparse_demo(args, out):
    mech = SparseValidate(args.m, args.budget)
    rng = make_rng(args.seed, "sparse-demo")
    train = rng.integers(0, 2, size=(args.n, args.m))
    holdout = rng.integers(0, 2, size=(args.n, args.m))
    if args.analyst == "zeros":
        make = lambda i: (lambda h: 0)
    elif args.analyst == "ones":
        make = lambda i: (lambda h: 1)
    else:
        # flags attribute i when its holdout frequency strays from the training one
        make = lambda i: (lambda h: abs(h[:, i].mean() - train[:, i].mean()) > args.threshold)
    bits = []
    for i in range(args.m):
        answer = mech.answer(make(i), holdout)
        if answer is EXHAUSTED:
            bits.append("X")
            break
        bits.append(str(answer))
    out.write(f"transcript={''.join(b for b in bits if b != 'X')}\n")
    out.write(f"ones_consumed={mech.ones_returned}\n")
    out.write(f"exhausted={'yes' if 'X' in bits else 'no'}\n")
    out.write("i,ell,ell_times_beta\n")
    for i in range(1, args.m + 1):
        ell = sparse_validate_ell(i, args.budget)
        out.write(f"{i},{ell},{_fmt(min(1.0, ell * args.beta))}\n")
    return 0


# -- parser -------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="reusable-holdout", description="Reusable holdout mechanisms, bounds and experiments.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("experiment", help="variable-selection overfitting study")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--d", type=int, default=1000)
    p.add_argument("--k", type=int, action="append", help="number of selected variables (repeatable)")
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--signal", default="none", help="none | biased:COUNT:BIAS")
    p.add_argument("--mechanism", choices=("standard", "thresholdout"), default="standard")
    p.add_argument("--T", type=float, default=0.04, help="Thresholdout threshold")
    p.add_argument("--tau", type=float, default=0.01, help="Thresholdout comparison-noise scale")
    p.add_argument("--budget", type=int, default=None, help="overfitting budget (default ceil(sqrt(n)))")
    p.add_argument("--noise", choices=("laplace", "gaussian"), default="gaussian")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="experiment.csv", help="CSV path, or - for stdout")
    p.add_argument("--from-manifest", help="rerun the experiment described by a manifest file")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("bounds", help="privacy and max-information calculators")
    ops = p.add_subparsers(dest="op", required=True)
    o = ops.add_parser("dp-compose-basic")
    o.add_argument("--param", type=_pair, action="append", required=True, metavar="EPS,DELTA")
    o = ops.add_parser("dp-compose-advanced")
    o.add_argument("--eps", type=float, required=True)
    o.add_argument("--delta", type=float, default=0.0)
    o.add_argument("--m", type=int, required=True)
    o.add_argument("--delta-prime", type=float, required=True)
    o = ops.add_parser("mi-from-dp")
    o.add_argument("--eps", type=float, required=True)
    o.add_argument("--n", type=int, required=True)
    o = ops.add_parser("mi-from-dp-iid")
    o.add_argument("--eps", type=float, required=True)
    o.add_argument("--n", type=int, required=True)
    o.add_argument("--beta", type=float, required=True)
    o = ops.add_parser("mi-from-dl")
    o.add_argument("--range", type=int, required=True)
    o.add_argument("--beta", type=float, required=True)
    o = ops.add_parser("mi-compose")
    o.add_argument("--bound", type=_pair, action="append", required=True, metavar="K,BETA")
    o = ops.add_parser("bad-event")
    o.add_argument("--k", type=float, required=True)
    o.add_argument("--beta", type=float, default=0.0)
    o.add_argument("--p", type=float, required=True)
    o = ops.add_parser("mcdiarmid")
    o.add_argument("--c", type=float, required=True)
    o.add_argument("--n", type=int, required=True)
    o.add_argument("--alpha", type=float, required=True)
    o = ops.add_parser("dp-gen")
    o.add_argument("--c", type=float, required=True)
    o.add_argument("--n", type=int, required=True)
    o.add_argument("--tau", type=float, required=True)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("mm-demo", help="noise-free Median Mechanism session")
    p.add_argument("--domain-size", type=int, default=2)
    p.add_argument("--m", type=int, default=8)
    p.add_argument("--tau", type=float, default=0.6)
    p.add_argument("--n", type=int, default=50, help="size of the private dataset")
    p.add_argument("--queries", default="builtin", help="builtin | constant | path to CSV query tables")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_mm_demo)

    p = sub.add_parser("sparse-demo", help="SparseValidate session with a builtin analyst")
    p.add_argument("--m", type=int, default=10)
    p.add_argument("--budget", type=int, default=2)
    p.add_argument("--n", type=int, default=100, help="holdout size")
    p.add_argument("--analyst", choices=("adversarial", "zeros", "ones"), default="adversarial")
    p.add_argument("--threshold", type=float, default=0.05)
    p.add_argument("--beta", type=float, default=0.01, help="per-query failure probability")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sparse_demo)
    return parser


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, out)
    except ResourceError as exc:
        print(f"reusable-holdout: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (UsageError, InvalidParameterError, OSError) as exc:
        print(f"reusable-holdout: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
