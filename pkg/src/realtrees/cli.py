"""Command line entry point: ``realtrees {run,enumerate,report,gen}``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .data import SyntheticConfig, binarize, gen_parity, gen_xor_mixture, load_csv
from .errors import ConfigError, RealTreesError
from .experiment import ExperimentConfig, report, run_experiment
from .rashomon import DEFAULT_CAP, SearchConfig, enumerate_rashomon

EXIT_OK, EXIT_CONFIG, EXIT_FAILED = 0, 1, 2


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    if args.output:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "output_dir": args.output})
    records = run_experiment(cfg, jobs=args.jobs)
    failed = [r for r in records if not r.ok]
    for r in failed:
        print(f"failed: {r.dataset}/{r.strategy}/seed {r.seed}: {r.error}: {r.message}", file=sys.stderr)
    print(f"{len(records) - len(failed)}/{len(records)} runs finished; results in {cfg.output_dir}")
    return EXIT_FAILED if failed else EXIT_OK


def _cmd_enumerate(args) -> int:
    raw = load_csv(args.csv, args.label)
    ds, bmap = binarize(raw, args.max_thresholds, name=Path(args.csv).stem)
    rset = enumerate_rashomon(ds, SearchConfig(args.depth, args.lam, args.epsilon, args.cap))
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        rset.dump_tsv(out)
    finally:
        if args.output:
            out.close()
    print(f"{len(rset)} trees; optimum {rset.optimum:.17g}; features: {', '.join(bmap.feature_names)}",
          file=sys.stderr)
    return EXIT_OK


def _cmd_report(args) -> int:
    path = report(args.result_dir)
    print(f"wrote {path}")
    return EXIT_OK


def _parse_spec(text: str) -> dict:
    """Accept a JSON object, a path to one, or ``kind:key=value,...``."""
    if Path(text).is_file():
        text = Path(text).read_text()
    text = text.strip()
    if text.startswith("{"):
        return json.loads(text)
    kind, _, rest = text.partition(":")
    spec = {"kind": kind}
    for item in filter(None, rest.split(",")):
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"expected key=value, got {item!r}")
        spec[key] = json.loads(value)
    return spec


def _cmd_gen(args) -> int:
    spec = _parse_spec(args.spec)
    kind = spec.pop("kind", None)
    try:
        if kind == "xor":
            ds = gen_xor_mixture(SyntheticConfig(**spec))
        elif kind == "parity":
            ds = gen_parity(spec.get("n", 100), spec.get("noise_dims", 0), spec.get("seed", 0))
        else:
            raise ConfigError(f"unknown synthetic kind {kind!r}; valid kinds: xor, parity")
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(list(ds.feature_names) + ["label"])
        for x, y in zip(ds.X, ds.y):
            w.writerow([*map(int, x), ds.classes[y]])
    finally:
        if args.output:
            out.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="realtrees", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--jobs", type=int, default=1, help="parallel runs (REALTREES_JOBS overrides)")
    r.add_argument("--output", help="override output_dir")
    r.set_defaults(func=_cmd_run)

    e = sub.add_parser("enumerate", help="dump a Rashomon set as TSV")
    e.add_argument("csv")
    e.add_argument("--label", required=True, help="label column name")
    e.add_argument("--depth", type=int, default=3)
    e.add_argument("--lambda", dest="lam", type=float, default=0.01)
    e.add_argument("--epsilon", type=float, default=0.0)
    e.add_argument("--cap", type=int, default=DEFAULT_CAP)
    e.add_argument("--max-thresholds", type=int, default=16)
    e.add_argument("-o", "--output")
    e.set_defaults(func=_cmd_enumerate)

    rep = sub.add_parser("report", help="recompute aggregate.csv from run histories")
    rep.add_argument("result_dir")
    rep.set_defaults(func=_cmd_report)

    g = sub.add_parser("gen", help="write a synthetic dataset as CSV")
    g.add_argument("spec", help='e.g. "xor:n=500,phi=0.1,seed=3" or a JSON object/file')
    g.add_argument("-o", "--output")
    g.set_defaults(func=_cmd_gen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RealTreesError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
