"""Command-line entry point: ``coinconf {changepoint,run-csv,probe}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 invariant-probe failure.
Every command writes ``manifest.txt`` (``key=value`` lines) next to its outputs.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .engine import (
    ConformalStream,
    StreamConfig,
    StreamError,
    Trace,
    run_multi_horizon,
    run_scores,
)
from .experiments import coverage_metrics, run_changepoint, theorem_probe
from .experiments.probe import ADVERSARIES
from .forecasters import DEFAULT_DECAY, OnlineLinearForecaster, PersistenceForecaster
from .io import DataError, read_stream, write_manifest, write_rows, write_trace
from .updaters import GRADIENT_STRATEGIES, STRATEGIES, FixedState

log = logging.getLogger("coinconf")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PROBE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p, updater_nargs=None):
    p.add_argument("--alpha", type=float, default=0.1, help="target miscoverage level")
    if updater_nargs:
        p.add_argument("--updater", nargs="+", choices=STRATEGIES, default=["kt", "ons"])
        p.add_argument("--eta", type=float, nargs="+", help="learning rates for ogd/sfogd")
    else:
        p.add_argument("--updater", choices=STRATEGIES, default="kt")
        p.add_argument("--eta", type=float, help="learning rate for ogd/sfogd")
    p.add_argument("--fixed-radius", type=float)
    p.add_argument("--window", type=int, default=100, help="rolling coverage window")
    p.add_argument("--burn-in", type=int, default=50)
    p.add_argument("--out-dir", default="out")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="coinconf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    cp = sub.add_parser("changepoint", help="synthetic changepoint regression experiment")
    _common(cp, updater_nargs=True)
    cp.add_argument("--forecaster", choices=("ols", "wls"), default="ols")
    cp.add_argument("--decay", type=float, default=DEFAULT_DECAY)
    cp.add_argument("--seeds", type=int, default=200, help="number of seeds")
    cp.add_argument("--seed", type=int, default=0, help="first seed")
    cp.add_argument("--horizon", type=int, default=1)
    cp.add_argument("--no-traces", action="store_true", help="skip per-seed trace files")

    rc = sub.add_parser("run-csv", help="run on a user-supplied CSV stream")
    _common(rc)
    rc.add_argument("input", help="CSV with header t,y | t,y,x1..xd | t,score")
    rc.add_argument("--forecaster", default=None,
                    help="persistence, ols, wls or arP (e.g. ar3); default persistence, "
                         "or ar3 when --horizon > 1")
    rc.add_argument("--decay", type=float, default=DEFAULT_DECAY)
    rc.add_argument("--horizon", type=int, default=1)
    rc.add_argument("--scores-only", action="store_true",
                    help="consume the score column directly, bypassing the forecaster")
    rc.add_argument("--replay-radius", action="store_true",
                    help="with --updater fixed on a trace file, reuse each row's radius")
    rc.add_argument("--seed", type=int, default=0)

    pr = sub.add_parser("probe", help="check KT invariants on bounded score streams")
    pr.add_argument("--d", type=float, default=1.0, help="score bound D")
    pr.add_argument("--alpha", type=float, default=0.1)
    pr.add_argument("--t", type=int, default=10_000, help="stream length")
    pr.add_argument("--adversary", choices=ADVERSARIES, default="flipper")
    pr.add_argument("--streams", type=int, default=1)
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--out-dir", default="out")
    return parser


def _configs(args):
    updaters = args.updater if isinstance(args.updater, list) else [args.updater]
    etas = args.eta if isinstance(args.eta, list) else ([args.eta] if args.eta is not None else [])
    configs = []
    for u in updaters:
        if u in GRADIENT_STRATEGIES:
            if not etas:
                raise UsageError(f"updater {u!r} requires --eta")
            for e in etas:
                configs.append(StreamConfig(alpha=args.alpha, updater=u, eta=e,
                                            horizon=args.horizon, burn_in=args.burn_in))
        else:
            if (u == "fixed" and args.fixed_radius is None
                    and not getattr(args, "replay_radius", False)):
                raise UsageError("updater 'fixed' requires --fixed-radius")
            configs.append(StreamConfig(alpha=args.alpha, updater=u,
                                        fixed_radius=args.fixed_radius,
                                        horizon=args.horizon, burn_in=args.burn_in))
    return configs


def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9.]+", "_", label).strip("_")


def _manifest(out: Path, args, **extra):
    entries = {"command": args.command, "version": __version__}
    entries.update({k: v for k, v in vars(args).items() if k not in ("command",)})
    entries.update(extra)
    write_manifest(out / "manifest.txt", entries)


def _summary_row(label, trace, burn_in, step=None):
    covered = np.asarray(trace.covered, dtype=float)
    width = np.asarray(trace.width)
    tail_c, tail_w = covered[burn_in:], width[burn_in:]
    row = {} if step is None else {"step": step}
    row.update({
        "method": label,
        "n": len(covered),
        "coverage": covered.mean() if len(covered) else None,
        "mean_width": width.mean() if len(width) else None,
        "burn_in": burn_in,
        "coverage_after_burn_in": tail_c.mean() if len(tail_c) else None,
        "mean_width_after_burn_in": tail_w.mean() if len(tail_w) else None,
    })
    return row


def cmd_changepoint(args) -> int:
    if args.seeds < 1:
        raise UsageError("--seeds must be at least 1")
    if args.horizon != 1:
        raise UsageError("the changepoint experiment is one-step ahead; use --horizon 1")
    configs = _configs(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = list(range(args.seed, args.seed + args.seeds))
    t0 = time.perf_counter()
    run = run_changepoint(configs, seeds, forecaster=args.forecaster, decay=args.decay)
    log.info("changepoint: %d seeds x %d methods in %.2fs", len(seeds), len(configs),
             time.perf_counter() - t0)
    rows, rolling = [], {}
    T = run.scores.shape[1]
    window = min(args.window, T - args.burn_in)
    for label, res in run.results.items():
        cfg = run.configs[label]
        m = coverage_metrics(res, window=window, burn_in=args.burn_in)
        per_seed_cov = res["covered"][:, args.burn_in:].mean(axis=1)
        per_seed_w = 2.0 * np.maximum(res["radius"][:, args.burn_in:], 0).mean(axis=1)
        rows.append({
            "method": label, "updater": cfg.updater, "eta": cfg.eta,
            "coverage": m.coverage, "coverage_sd": per_seed_cov.std(ddof=1) if len(seeds) > 1 else 0.0,
            "mean_width": m.mean_width, "width_sd": per_seed_w.std(ddof=1) if len(seeds) > 1 else 0.0,
            "mean_width_deviation": float(np.mean(m.width_deviation)) if m.width_deviation is not None else None,
            "seeds": len(seeds), "burn_in": args.burn_in,
        })
        rolling[f"{_slug(label)}_coverage"] = m.rolling_coverage.mean(axis=0)
        rolling[f"{_slug(label)}_width"] = m.rolling_width.mean(axis=0)
        if not args.no_traces:
            tdir = out / "traces"
            tdir.mkdir(exist_ok=True)
            for i, seed in enumerate(seeds):
                nan = np.full(T, np.nan)
                tr = Trace(t=np.arange(1, T + 1), y=run.y[i], y_hat=run.y_hat[i],
                           score=run.scores[i], radius=res["radius"][i], covered=res["covered"][i],
                           g=res["g"][i], wealth=res["wealth"][i] if cfg.updater in ("kt", "ons") else nan)
                write_trace(tdir / f"{_slug(label)}_seed{seed}.csv", tr)
    write_rows(out / "metrics.csv", rows)
    n_roll = len(next(iter(rolling.values())))
    ends = np.arange(args.burn_in + window, args.burn_in + window + n_roll)
    write_rows(out / "rolling.csv", [{"t": int(ends[i]), **{k: v[i] for k, v in rolling.items()}}
                                     for i in range(n_roll)])
    _manifest(out, args, seed_list=f"{seeds[0]}..{seeds[-1]}", rolling_window=window,
              outputs="metrics.csv rolling.csv" + ("" if args.no_traces else " traces/"))
    for r in rows:
        print(f"{r['method']:<16} coverage={r['coverage']:.4f} mean_width={r['mean_width']:.4f}")
    return EXIT_OK


def _forecaster(name, horizon, dim, decay):
    if name is None:
        name = "ar3" if horizon > 1 else "persistence"
    m = re.fullmatch(r"ar(\d+)", name)
    if m:
        return "ar", int(m.group(1))
    if horizon > 1:
        raise UsageError("--horizon > 1 requires an AR forecaster (e.g. --forecaster ar3)")
    if name == "persistence":
        return "persistence", PersistenceForecaster()
    if name in ("ols", "wls"):
        if not dim:
            raise UsageError(f"forecaster {name!r} needs feature columns x1..xd")
        return name, OnlineLinearForecaster(dim, decay if name == "wls" else None)
    raise UsageError(f"unknown forecaster {name!r}")


def cmd_run_csv(args) -> int:
    if args.horizon < 1:
        raise UsageError("--horizon must be at least 1")
    (config,) = _configs(args)
    data = read_stream(args.input)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    if args.scores_only:
        if data.score is None:
            raise DataError("--scores-only needs a 't,score' file or a trace file")
        if args.horizon != 1:
            raise UsageError("--scores-only works with --horizon 1")
        if args.replay_radius:
            if data.radius is None or config.updater != "fixed":
                raise UsageError("--replay-radius needs --updater fixed and a trace file")
            stream = ConformalStream(config)
            rows = []
            for r, sc in zip(data.radius, data.score):
                stream.state = FixedState(radius=float(r))
                rows.append(stream.step_score(float(sc)))
            traces = [Trace.from_rows(rows)]
        else:
            traces = [run_scores(data.score, config)]
    else:
        if data.y is None:
            raise DataError("file has no response column 'y'; use --scores-only")
        dim = 0 if data.X is None else data.X.shape[1]
        kind, model = _forecaster(args.forecaster, args.horizon, dim, args.decay)
        if kind == "ar":
            traces = run_multi_horizon(data.y, config, p=model)
        else:
            stream = ConformalStream(config, model)
            rows = []
            for i in range(len(data)):
                x = None if data.X is None else data.X[i]
                try:
                    rows.append(stream.step(data.y[i], x)[1])
                except ValueError as exc:
                    raise DataError(str(exc), i + 2) from exc
            traces = [Trace.from_rows(rows)]
    if len(traces) == 1:
        traces[0].t = data.t[:len(traces[0])].astype(int)

    summary = []
    for k, tr in enumerate(traces, start=1):
        name = "trace.csv" if len(traces) == 1 else f"trace_h{k}.csv"
        write_trace(out / name, tr)
        summary.append(_summary_row(config.label, tr, args.burn_in, step=k))
        if len(tr) - args.burn_in >= args.window > 0:
            m = coverage_metrics(tr, window=args.window, burn_in=args.burn_in)
            write_rows(out / name.replace("trace", "rolling"),
                       [{"t": int(tr.t[args.burn_in + args.window - 1 + i]),
                         "coverage": c, "width": w}
                        for i, (c, w) in enumerate(zip(m.rolling_coverage, m.rolling_width))])
    write_rows(out / "metrics.csv", summary)
    _manifest(out, args, rows=len(data))
    for r in summary:
        cov = r["coverage"]
        print(f"step {r['step']}: n={r['n']} coverage={cov if cov is None else round(cov, 4)} "
              f"mean_width={r['mean_width'] if r['mean_width'] is None else round(r['mean_width'], 4)}")
    return EXIT_OK


def cmd_probe(args) -> int:
    if not 0.0 < args.alpha < 0.5:
        raise UsageError(f"--alpha must lie in (0, 1/2), got {args.alpha}")
    if not args.d > 0:
        raise UsageError("--d must be positive")
    if args.t < 1 or args.streams < 1:
        raise UsageError("--t and --streams must be positive")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = theorem_probe(D=args.d, alpha=args.alpha, T=args.t, adversary=args.adversary,
                           n_streams=args.streams, seed=args.seed)
    rows = report.summary_rows()
    write_rows(out / "probe.csv", rows,
               ["check", "status", "violations", "first_stream", "first_step"])
    ext = report.extrema
    write_rows(out / "extrema.csv",
               [{"t": i + 1, **{k: v[i] for k, v in ext.items()}} for i in range(report.steps)],
               ["t", "max_radius", "min_radius", "max_abs_step", "min_wealth"])
    _manifest(out, args, steps_completed=report.steps, passed=report.passed)
    for r in rows:
        print(f"{r['check']:<20} {r['status']:<34} {r['violations']}")
    return EXIT_OK if report.passed else EXIT_PROBE


COMMANDS = {"changepoint": cmd_changepoint, "run-csv": cmd_run_csv, "probe": cmd_probe}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"coinconf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, StreamError) as exc:
        print(f"coinconf: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        # configuration values rejected by StreamConfig and friends
        print(f"coinconf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"coinconf: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
