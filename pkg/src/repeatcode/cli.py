"""Command-line interface.

Exit codes: 0 on success, 2 when the configuration cannot yield a working
code (bad wiring, infeasible parameters, budgets), 1 on any other failure,
including a message that does not decode.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .channels import ChannelError, ChannelModel, apply, make_deletion, make_deletion_flip, make_poisson
from .concat_codec import ConcatParams, ConcatParamsError, decode, encode
from .core import BitString
from .harness import (
    ConfigError, ExperimentConfig, info_rate_rows, run_lemma_checks, run_scaling_study,
    run_simulation, scaling_csv,
)
from .info_rate import ResourceBudgetError
from .inner_code import CodeBudgetError, InfeasibleParametersError, search_inner_code
from .outer_code import RSDecodeError

CONFIG_ERRORS = (ConfigError, ConcatParamsError, InfeasibleParametersError, CodeBudgetError,
                 ResourceBudgetError, ChannelError)


def parse_channel(spec: str) -> ChannelModel:
    """A channel from a JSON file, inline JSON, or ``deletion:d`` / ``poisson:lam`` / ``deletion_flip:d,p``."""
    path = Path(spec)
    if path.suffix == ".json" and path.exists():
        return ChannelModel.from_json(path.read_text())
    if spec.lstrip().startswith("{"):
        return ChannelModel.from_json(spec)
    kind, _, arg = spec.partition(":")
    try:
        if kind == "deletion":
            return make_deletion(float(arg))
        if kind == "poisson":
            return make_poisson(float(arg))
        if kind == "deletion_flip":
            d, p = arg.split(",")
            return make_deletion_flip(float(d), float(p))
    except ValueError as exc:
        raise ConfigError(f"bad channel spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unrecognized channel spec {spec!r}")


def _read_bits(arg) -> BitString:
    text = sys.stdin.read() if arg in (None, "-") else (
        Path(arg).read_text() if Path(arg).is_file() else arg)
    return BitString(text.strip())


def _load_params(path: str) -> ConcatParams:
    return ConcatParams.from_json(Path(path).read_text())


def cmd_simulate(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.trials is not None:
        cfg.trial_count = args.trials
    if args.seed is not None:
        cfg.master_seed = args.seed
    rep = run_simulation(cfg, out_dir=args.out)
    line = f"failure_rate={rep.failure_rate:.6g} stderr={rep.stderr:.3g} trials={rep.trials} rate={rep.realized_rate:.4g}"
    if rep.failure_bound is not None:
        line += f" bound={rep.failure_bound:g} within_bound={rep.within_bound}"
    print(line)
    return 0


def cmd_scaling(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.trials is not None:
        cfg.trial_count = args.trials
    rows = run_scaling_study(cfg, out_dir=args.out)
    sys.stdout.write(scaling_csv(rows))
    return 0


def cmd_search_inner(args) -> int:
    model = parse_channel(args.channel)
    code = search_inner_code(model, args.m, args.block_len, zeta=args.zeta, gamma=args.gamma,
                             num_candidates=args.candidates, mc_trials=args.trials, seed=args.seed,
                             max_zero_run=args.max_zero_run)
    doc = json.dumps(code.to_json())
    if args.out:
        Path(args.out).write_text(doc + "\n")
        print(f"est_failure_prob={code.est_failure_prob:.6g} stderr={code.est_stderr:.3g}")
    else:
        print(doc)
    return 0


def cmd_info_rate(args) -> int:
    model = parse_channel(args.channel)
    rows = info_rate_rows(model, range(args.n_min, args.n_max + 1))
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["n", "channel", "i_rc", "i_trc", "gap", "optimizer_entropy", "info_rate"])
    for r in rows:
        w.writerow([r["n"], r["channel"], f"{r['i_rc']:.12g}", f"{r['i_trc']:.12g}", f"{r['gap']:.12g}",
                    f"{r['optimizer_entropy']:.12g}", f"{r['info_rate']:.12g}"])
    return 0


def cmd_lemma_checks(args) -> int:
    cfg = ExperimentConfig.load(args.config) if args.config else None
    overrides = {}
    if args.density_trials is not None:
        overrides["density_trials"] = args.density_trials
    if args.max_n is not None:
        overrides["rc_ns"] = list(range(1, args.max_n + 1))
    report = run_lemma_checks(cfg, **overrides)
    text = json.dumps(report.to_json(), indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def cmd_encode(args) -> int:
    params = _load_params(args.code)
    print(encode(params, _read_bits(args.input)))
    return 0


def cmd_decode(args) -> int:
    params = _load_params(args.code)
    out = decode(params, _read_bits(args.input))
    if not out.success:
        print(f"decode failed: {out.error}", file=sys.stderr)
        return 1
    print(out.message)
    return 0


def cmd_transmit(args) -> int:
    print(apply(parse_channel(args.channel), _read_bits(args.input), args.seed))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="repeatcode", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="Monte Carlo end-to-end run")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="directory for trials.csv, summary.json, code.json")
    s.add_argument("--trials", type=int)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("scaling", help="failure rate over several outer-code sizes")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--trials", type=int)
    s.set_defaults(func=cmd_scaling)

    s = sub.add_parser("search-inner", help="random balanced inner code search")
    s.add_argument("--channel", required=True, help="JSON file, inline JSON, deletion:d, poisson:lam")
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--block-len", type=int, required=True)
    s.add_argument("--zeta", type=float, default=0.5)
    s.add_argument("--gamma", type=float, default=0.25)
    s.add_argument("--candidates", type=int, default=4)
    s.add_argument("--trials", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-zero-run", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_search_inner)

    s = sub.add_parser("info-rate", help="exact small-n information rates as CSV")
    s.add_argument("--channel", required=True)
    s.add_argument("--n-min", type=int, default=1)
    s.add_argument("--n-max", type=int, default=6)
    s.set_defaults(func=cmd_info_rate)

    s = sub.add_parser("lemma-checks", help="small-n verification checks")
    s.add_argument("--config")
    s.add_argument("--max-n", type=int)
    s.add_argument("--density-trials", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_lemma_checks)

    for name, func, what in (("encode", cmd_encode, "message"), ("decode", cmd_decode, "received word")):
        s = sub.add_parser(name, help=f"{name} with a saved parameter bundle")
        s.add_argument("--code", required=True, help="code.json written by simulate")
        s.add_argument("--input", help=f"{what} as a bit string, a file, or - for stdin")
        s.set_defaults(func=func)

    s = sub.add_parser("transmit", help="pass a bit string through a channel")
    s.add_argument("--channel", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--input")
    s.set_defaults(func=cmd_transmit)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RSDecodeError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
