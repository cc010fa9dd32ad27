"""Command-line entry point.

Every output file embeds a manifest (command, parameters, version, seed and
input digests) so that ``qmd rerun --from FILE`` reproduces it byte for byte.
Exit codes: 0 success, 1 domain or usage error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import __version__, decompose as dec, density, multires
from .dyadic import GridGeometry
from .errors import DomainError, InvalidSpecError, QMDError
from .gridset import gen_family, load, measure, parse_balls, to_setfile

log = logging.getLogger("qmd")

# parameters that never affect the bytes of an output
NON_SEMANTIC = {"out", "threads", "func", "command", "verbose", "_parser"}


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# -- manifest helpers ---------------------------------------------------------------


def sha256_of(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def canonical_argv(parser: argparse.ArgumentParser, args: argparse.Namespace) -> list[str]:
    out = []
    for action in parser._actions:
        if action.dest in NON_SEMANTIC or not action.option_strings or action.dest == "help":
            continue
        val = getattr(args, action.dest, None)
        if val is None or val is False:
            continue
        flag = action.option_strings[-1]
        if isinstance(action, argparse._StoreTrueAction):
            out.append(flag)
        else:
            out.extend([flag, str(val)])
    return out


def manifest(args, inputs: dict[str, str]) -> dict:
    params = jsonable({k: v for k, v in sorted(vars(args).items()) if k not in NON_SEMANTIC})
    return {
        "command": args.command,
        "argv": canonical_argv(args._parser, args),
        "params": params,
        "version": __version__,
        "seed": getattr(args, "seed", 0),
        "inputs": {name: {"path": path, "sha256": sha256_of(path)} for name, path in sorted(inputs.items())},
    }


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def write_json(path: str | None, payload: dict, man: dict):
    payload = dict(payload)
    payload["manifest"] = man
    text = dumps(payload)
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def write_csv(path: str | None, header: list[str], rows: list, man: dict):
    buf = io.StringIO()
    buf.write("# " + json.dumps(man, sort_keys=True, separators=(",", ":")) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    if path:
        Path(path).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def read_manifest(path: str) -> dict:
    text = Path(path).read_text()
    if text.startswith("# "):
        return json.loads(text.splitlines()[0][2:])
    data = json.loads(text)
    if "manifest" not in data:
        raise InvalidSpecError(f"{path} carries no manifest")
    return data["manifest"]


def fraction_arg(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc


def bool_arg(text: str) -> bool:
    low = text.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def thread_count(args) -> int:
    if getattr(args, "threads", None):
        return int(args.threads)
    env = os.environ.get("QMD_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def ball_family(e, args) -> multires.MultiresFamily:
    nets = multires.build_nets(e.geometry)
    return multires.family(nets, A2=args.A2 if args.A2 is not None else Fraction(args.A) ** 2)


def jsonable(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    return obj


# -- commands -----------------------------------------------------------------------------


def cmd_gen(args) -> int:
    geom = GridGeometry(args.dimension, args.level)
    params = {"p": args.p, "seed": args.seed, "depth": args.depth, "k": args.k}
    if args.balls:
        params["balls"] = parse_balls(args.balls)
    e = gen_family(args.kind, geom, **params)
    payload = to_setfile(e, args.encoding)
    payload["kind"] = args.kind
    write_json(args.out, payload, manifest(args, {}))
    return 0


def geometry_arg(text: str) -> GridGeometry:
    try:
        d, L = (int(t) for t in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected 'd,L', got {text!r}") from exc
    return GridGeometry(d, L)


def cmd_nets(args) -> int:
    if (args.set is None) == (args.set_geometry is None):
        raise DomainError("give exactly one of --set and --set-geometry")
    geom = load(args.set).geometry if args.set else geometry_arg(args.set_geometry)
    inputs = {"set": args.set} if args.set else {}
    nets = multires.build_nets(geom)
    payload = nets.to_dict()
    fam = multires.family(nets, A2=args.A2 if args.A2 is not None else Fraction(args.A) ** 2)
    payload["A2"] = str(fam.A2)
    payload["maxOverlap"] = [int(multires.overlap_counts(fam, k).max()) for k in fam.levels()]
    payload["overlapBound"] = multires.theoretical_overlap_bound(geom.d, A2=fam.A2)
    if args.audit:
        rep = multires.audit_nets(nets)
        payload["audit"] = jsonable(rep)
        if not (rep["nested"] and rep["separated"] and rep["covering"]):
            write_json(args.out, payload, manifest(args, inputs))
            return 2
    write_json(args.out, payload, manifest(args, inputs))
    return 0


def cmd_analyze(args) -> int:
    e = load(args.set)
    threads = thread_count(args)
    if args.family == "cubes":
        rep = density.carleson_sum_cubes(e, args.epsilon, args.clip, threads)
        payload = rep.to_dict()
    else:
        fam = ball_family(e, args)
        levels = density.ball_levels(e, fam, threads)
        rep = density.carleson_sum_balls(e, args.epsilon, fam, levels=levels)
        payload = rep.to_dict()
        hit = density.dense_scale_search(e, args.epsilon, fam)
        payload["denseScale"] = None if hit is None else hit.to_dict()
    payload["lambdaE"] = str(measure(e))
    payload["unfilteredLowerBound"] = str((e.L + 1) * measure(e))
    write_json(args.out, payload, manifest(args, {"set": args.set}))
    return 0


def cmd_decompose(args) -> int:
    e = load(args.set)
    result = dec.decompose(e, args.alpha, args.delta, args.mode, args.seed, args.pair_limit, thread_count(args))
    write_json(args.out, result.to_dict(), manifest(args, {"set": args.set}))
    return 0


def parse_pairs(text: str):
    if text == "exhaustive":
        return "exhaustive"
    if text.startswith("sample:"):
        n = int(text.split(":", 1)[1])
        if n < 1:
            raise DomainError("sample size must be positive")
        return n
    raise DomainError(f"--pairs must be 'exhaustive' or 'sample:N', got {text!r}")


def cmd_verify(args) -> int:
    e = load(args.set)
    data = json.loads(Path(args.decomp).read_text())
    verdict = dec.verify_decomposition(data, e, parse_pairs(args.pairs), args.seed, not args.no_slack)
    write_json(args.out, verdict.to_dict(), manifest(args, {"set": args.set, "decomp": args.decomp}))
    return 0 if verdict.passed else 2


def cmd_counterexample(args) -> int:
    rep = density.counterexample_audit(args.k, args.level, args.epsilon)
    man = manifest(args, {})
    if args.out and args.out.endswith(".csv"):
        write_csv(args.out, ["r", "max_density"], [[str(r), str(v)] for r, v in rep.rows], man)
        sys.stdout.write(dumps(rep.to_dict()))
    else:
        write_json(args.out, rep.to_dict(), man)
    return 0 if rep.passed else 2


def cmd_report(args) -> int:
    e = load(args.set)
    man = manifest(args, {"set": args.set})
    threads = thread_count(args)
    if args.curve == "carleson":
        if args.family == "cubes":
            rep = density.carleson_sum_cubes(e, args.epsilon, args.clip, threads)
        else:
            fam = ball_family(e, args)
            rep = density.carleson_sum_balls(e, args.epsilon, fam, threads)
        rows, f_acc, u_acc = [], Fraction(0), Fraction(0)
        for row in rep.per_level:
            f_acc += Fraction(row["sum"])
            u_acc += Fraction(row["unfilteredSum"])
            rows.append([row["k"], float(f_acc), float(u_acc)])
        write_csv(args.out, ["level", "filtered_sum", "unfiltered_sum"], rows, man)
        return 0
    levels = density.bad_cubes(e, args.epsilon, args.clip, threads)
    counts = density.z_counts(levels, e.L, e.d)
    rows = []
    for j in range(0, 11):
        N = 1 << j
        z = density.z_set(e, args.epsilon, N, args.clip, counts=counts)
        bound = "" if z.bound is None else float(z.bound)
        rows.append([N, float(z.measure), bound])
    write_csv(args.out, ["N", "lambda_Z", "bound"], rows, man)
    return 0


def cmd_rerun(args) -> int:
    man = read_manifest(args.source)
    for name, info in man.get("inputs", {}).items():
        if sha256_of(info["path"]) != info["sha256"]:
            raise InvalidSpecError(f"input {name} ({info['path']}) changed since the original run")
    argv = [man["command"]] + list(man["argv"]) + ["--out", args.out]
    if args.threads:
        argv += ["--threads", str(args.threads)]
    return main(argv)


# -- parser --------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = Parser(prog="qmd", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log timing to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=Parser)

    def common(p, seed=True):
        p.add_argument("--out", help="output file (stdout if omitted)")
        p.add_argument("--threads", type=int, help="worker count (default: $QMD_THREADS or CPU count)")
        if seed:
            p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("gen", help="generate a grid set")
    p.add_argument("--kind", required=True, choices=["full", "bernoulli", "cantor", "ball-union", "counterexample"])
    p.add_argument("--dimension", type=int, default=1)
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--p", type=float, default=0.5, help="bernoulli occupancy probability")
    p.add_argument("--depth", type=int, default=1, help="cantor depth")
    p.add_argument("--k", type=int, default=1, help="counterexample index")
    p.add_argument("--balls", help="ball-union spec 'x,y:r;x,y:r'")
    p.add_argument("--encoding", default="cell-list", choices=["cell-list", "hex-bitset"])
    common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("nets", help="build nested nets")
    p.add_argument("--set", help="take the geometry from a set file")
    p.add_argument("--set-geometry", help="geometry as 'd,L'")
    p.add_argument("--A", type=fraction_arg, default=Fraction(1), help="ball radius constant")
    p.add_argument("--A2", type=fraction_arg, help="exact square of A (overrides --A)")
    p.add_argument("--audit", action="store_true")
    common(p, seed=False)
    p.set_defaults(func=cmd_nets)

    def family_flags(p):
        p.add_argument("--epsilon", type=fraction_arg, required=True)
        p.add_argument("--family", choices=["balls", "cubes"], default="cubes")
        p.add_argument("--A", type=fraction_arg, default=Fraction(1), help="ball radius constant")
        p.add_argument("--A2", type=fraction_arg, help="exact square of A (overrides --A)")
        p.add_argument("--clip", type=bool_arg, default=True)

    p = sub.add_parser("analyze", help="Carleson packing report")
    p.add_argument("--set", required=True)
    family_flags(p)
    common(p, seed=False)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("decompose", help="well-connected decomposition")
    p.add_argument("--set", required=True)
    p.add_argument("--alpha", type=fraction_arg, required=True)
    p.add_argument("--delta", type=fraction_arg, required=True)
    p.add_argument("--mode", choices=["empirical", "theoretical"], default="empirical")
    p.add_argument("--pair-limit", type=int, default=dec.PAIR_LIMIT)
    common(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("verify", help="re-check a decomposition")
    p.add_argument("--decomp", required=True)
    p.add_argument("--set", required=True)
    p.add_argument("--pairs", default="exhaustive", help="'exhaustive' or 'sample:N'")
    p.add_argument("--no-slack", action="store_true", help="drop the 2 sqrt(d) cell allowance")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("counterexample", help="density sweep for the interval sets E_k")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--epsilon", type=fraction_arg, default=Fraction(1, 10))
    common(p, seed=False)
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("report", help="CSV curves for plotting")
    p.add_argument("--set", required=True)
    p.add_argument("--curve", choices=["carleson", "zn"], required=True)
    family_flags(p)
    common(p, seed=False)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("rerun", help="replay the manifest embedded in an output file")
    p.add_argument("--from", dest="source", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_rerun)

    for name, sp in sub.choices.items():
        sp.set_defaults(_parser=sp)
    return parser


def _fail(code: int, payload: dict) -> int:
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail(1, {"error": "usage", "message": str(exc)})
    if not args.command:
        parser.print_help(sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    start = time.perf_counter()
    try:
        code = args.func(args)
    except QMDError as exc:
        return _fail(1, exc.to_dict())
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(1, {"error": "io-error", "message": str(exc)})
    log.info("%s finished in %.3fs", args.command, time.perf_counter() - start)
    return code


if __name__ == "__main__":
    sys.exit(main())
