"""Command-line entry point: ``navgap <subcommand> [--config FILE] [--seed N] ...``.

Exit codes: 0 success, 2 configuration or input error, 3 stage failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from ..analysis import (BoundInputs, TrialRecord, a_distance, bound_terms, markov_chain_report, spl,
                        success_rate)
from ..analysis.adistance import ClassifierConfig
from ..policy import load_checkpoint, save_checkpoint, train
from ..representation import get_preset
from . import experiment as ex
from . import io
from .config import ConfigError, ExperimentConfig

EXIT_OK, EXIT_CONFIG, EXIT_STAGE = 0, 2, 3

log = logging.getLogger("navgap")


def default_config_path() -> Path:
    return Path(str(resources.files("navgap") / "configs" / "reference.json"))


def _load_cfg(args) -> ExperimentConfig:
    return ExperimentConfig.load(args.config or default_config_path(), seed=args.seed)


def _emit(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _read_json(path: str):
    try:
        with open(path) as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read {path}: {e}") from None


def _read_feature_file(path: str) -> np.ndarray:
    rows = []
    try:
        with open(path) as f:
            for n, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    rows.append([float(v) for v in json.loads(line)])
                except (json.JSONDecodeError, TypeError, ValueError):
                    raise ConfigError(f"{path}: line {n}: expected a JSON array of numbers") from None
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise ConfigError(f"{path}: need a non-empty file with rows of equal length")
    return np.array(rows)


def cmd_gen_worlds(args) -> int:
    cfg = _load_cfg(args)
    out = Path(args.out)
    worlds, _ = ex.build_source_worlds(cfg)
    io.save_worlds(out, "source", worlds)
    for env, ws in zip(cfg.environments, ex.build_env_worlds(cfg)):
        io.save_worlds(out, env.name, ws)
    print(f"wrote worlds to {out}")
    return EXIT_OK


def cmd_gen_demos(args) -> int:
    cfg = _load_cfg(args)
    worlds, themes = ex.build_source_worlds(cfg)
    ds = ex.make_demos(cfg, worlds, themes)
    io.save_dataset(ds, args.out)
    print(f"wrote {len(ds)} samples to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    ds = io.load_dataset(args.demos)
    channels = get_preset(args.preset)
    tcfg = ex.train_config(cfg)
    net, rep = train(ds, channels, tcfg, cfg.sensor.max_range)
    save_checkpoint(args.out, net, channels, tcfg)
    d = rep.to_dict()
    d.pop("wall_clock")
    _emit({"preset": args.preset, "checkpoint": args.out, **d}, None)
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    net, channels, _ = load_checkpoint(args.checkpoint)
    names = [e.name for e in cfg.environments]
    if args.env not in names:
        raise ConfigError(f"unknown environment {args.env!r}; have {names}")
    k = names.index(args.env)
    env = cfg.environments[k]
    worlds = ex.build_worlds(env, cfg.seed, ex.env_stream(k))
    eps = ex.eval_episodes(env, worlds, cfg, ex.env_stream(k))
    agent = ex.PolicyAgent(net, channels, cfg.sensor.max_range)
    trials, rows = ex.evaluate(agent, env, worlds, eps, cfg, ex.env_stream(k), args.label)
    if args.trajectories:
        io.write_jsonl(args.trajectories, (json.dumps(r) for r in rows))
    _emit({"environment": env.name, "preset": args.label, "N": len(trials),
           "SR": success_rate(trials), "SPL": spl(trials)}, args.out)
    return EXIT_OK


def cmd_adistance(args) -> int:
    clf = ClassifierConfig()
    if args.config:
        clf = _load_cfg(args).classifier
    u_s, u_t = _read_feature_file(args.source), _read_feature_file(args.target)
    if u_s.shape[1] != u_t.shape[1]:
        raise ConfigError(f"dimension mismatch: {u_s.shape[1]} vs {u_t.shape[1]}")
    res = a_distance(u_s, u_t, clf, holdout=args.holdout, seed=args.seed or 0)
    _emit(res.to_dict(clf), args.out)
    return EXIT_OK


def cmd_bound(args) -> int:
    raw = _read_json(args.input)
    if not isinstance(raw, dict):
        raise ConfigError("bound input must be a JSON object")
    try:
        inp = BoundInputs.from_dict(raw)
        terms = bound_terms(inp)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None
    out = {"bound": terms.total, "inputs": inp.to_dict(),
           "terms": {"eps_s_hat": terms.eps_s_hat, "d_a": terms.d_a, "lambda": terms.lam,
                     "source_complexity": terms.source_complexity,
                     "divergence_complexity": terms.divergence_complexity}}
    if "lambda" not in raw and "lam" not in raw:
        out["lambda_note"] = "lambda defaulted to 0; it is not estimable from unlabeled data"
        print("note: lambda defaulted to 0", file=sys.stderr)
    _emit(out, args.out)
    return EXIT_OK


def cmd_entropy(args) -> int:
    d = _read_json(args.input)
    joint = np.asarray(d["joint"] if isinstance(d, dict) else d, dtype=np.float64)
    try:
        rep = markov_chain_report(joint)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    _emit(rep.to_dict(), args.out)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load_cfg(args)
    run_dir = Path(args.out) / cfg.run_name()
    report = ex.run_experiment(cfg, run_dir)
    print(io.report_markdown(report))
    print(f"artifacts in {run_dir}")
    return EXIT_OK


def recompute_results(run_dir: Path) -> list[dict]:
    """SR / SPL per (environment, preset) from the stored trajectories."""
    groups: dict[tuple[str, str], list[TrialRecord]] = {}
    with open(run_dir / "trajectories.jsonl") as f:
        for line in f:
            r = json.loads(line)
            groups.setdefault((r["environment"], r["preset"]), []).append(
                TrialRecord(r["success"], r["optimal_length"], r["path_length"]))
    return [{"environment": e, "preset": p, "N": len(t), "SR": success_rate(t), "SPL": spl(t)}
            for (e, p), t in groups.items()]


def cmd_report(args) -> int:
    run_dir = Path(args.run)
    d = _read_json(run_dir / "report.json")
    report = ex.ExperimentReport.from_dict(d)
    if args.verify:
        got = {(r["environment"], r["preset"]): r for r in recompute_results(run_dir)}
        for r in report.results:
            g = got.get((r["environment"], r["preset"]))
            if g is None or any(g[k] != r[k] for k in ("N", "SR", "SPL")):
                print(f"mismatch for {r['environment']}/{r['preset']}", file=sys.stderr)
                return EXIT_STAGE
        print("report matches stored trajectories")
    fmt = args.format
    text = {"json": io.report_json, "csv": io.report_csv, "markdown": io.report_markdown}[fmt](report)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="navgap", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="experiment config JSON (default: bundled reference config)")
        sp.add_argument("--seed", type=int, help="override the global seed")
        sp.set_defaults(fn=fn)
        return sp

    sp = add("gen-worlds", cmd_gen_worlds, "generate source and environment maps")
    sp.add_argument("--out", required=True)
    sp = add("gen-demos", cmd_gen_demos, "generate expert demonstrations (JSONL)")
    sp.add_argument("--out", required=True)
    sp = add("train", cmd_train, "behavior-clone one channel preset")
    sp.add_argument("--demos", required=True)
    sp.add_argument("--preset", required=True)
    sp.add_argument("--out", required=True)
    sp = add("eval", cmd_eval, "evaluate a checkpoint in one environment")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--env", required=True)
    sp.add_argument("--label", default="policy")
    sp.add_argument("--trajectories")
    sp.add_argument("--out")
    sp = add("adistance", cmd_adistance, "proxy A-distance between two JSONL feature files")
    sp.add_argument("--source", required=True)
    sp.add_argument("--target", required=True)
    sp.add_argument("--holdout", action="store_true", help="score the classifier on held-out halves")
    sp.add_argument("--out")
    sp = add("bound", cmd_bound, "evaluate the target-error bound from a JSON input")
    sp.add_argument("--input", required=True)
    sp.add_argument("--out")
    sp = add("entropy", cmd_entropy, "entropy report for a joint table p(x, y, z)")
    sp.add_argument("--input", required=True)
    sp.add_argument("--out")
    sp = add("run", cmd_run, "full pipeline into <out>/<config-hash>-seed<seed>")
    sp.add_argument("--out", default="runs")
    sp = add("report", cmd_report, "re-emit a run's report")
    sp.add_argument("--run", required=True)
    sp.add_argument("--format", choices=("json", "csv", "markdown"), default="markdown")
    sp.add_argument("--verify", action="store_true", help="recompute SR/SPL from stored trajectories")
    sp.add_argument("--out")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (ConfigError, io.DatasetError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ex.StageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_STAGE
    except Exception as e:  # noqa: BLE001
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
