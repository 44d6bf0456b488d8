"""One binary for the whole pipeline: expert data, both training stages,
benchmark evaluation, ablations and mode-cloud export.

Only stdlib is imported at module level so `--threads` (or CENAV_THREADS)
can pin the math-library thread pools before numpy comes in.  Every
subcommand writes into its run directory: effective config, log, artifacts.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

log = logging.getLogger("cenav.cli")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _apply_threads(requested) -> None:
    n = requested
    if n is None:
        env = os.environ.get("CENAV_THREADS", "").strip()
        if env:
            try:
                n = int(env)
            except ValueError:
                raise UsageError(f"CENAV_THREADS={env!r} is not an integer")
    if n is None:
        return
    if n < 1:
        raise UsageError("--threads must be >= 1")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS", "NUMBA_NUM_THREADS"):
        os.environ[var] = str(n)


def _start_run(args):
    """Create the run directory, load config, echo it, wire logging."""
    from .config import RunConfig

    out = Path(args.out) if args.out else Path("runs") / args.command
    out.mkdir(parents=True, exist_ok=True)
    cfg = RunConfig.from_file(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.values["seed"] = args.seed
    (out / "config.txt").write_text(cfg.echo())
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        handlers=[logging.FileHandler(out / "run.log"),
                  logging.StreamHandler(sys.stderr)],
        force=True)
    log.info("command %s, out %s, seed %d", args.command, out, cfg["seed"])
    return out, cfg


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)


# ------------------------------------------------------------- subcommands


def cmd_gen_data(args) -> int:
    out, cfg = _start_run(args)
    from .dataset import generate_dataset, write_dataset

    n_worlds = args.n_worlds if args.n_worlds is not None else cfg["world.n_worlds"]
    target = cfg["world.target_samples"] or None
    obs, actions, stats = generate_dataset(
        cfg.dwa_params(), cfg.world_config(), n_worlds, cfg["seed"],
        target_samples=target)
    write_dataset(out / "dataset.bin", obs, actions)
    rate = stats.successes / stats.worlds if stats.worlds else 0.0
    line = (f"worlds={stats.worlds} successes={stats.successes} "
            f"samples={stats.samples} success_rate={rate:.3f}")
    (out / "stats.txt").write_text(
        "".join(f"{k} = {v}\n" for k, v in stats.as_dict().items()))
    print(line)
    print(f"dataset: {out / 'dataset.bin'}")
    return EXIT_OK


def cmd_train_expert(args) -> int:
    out, cfg = _start_run(args)
    from .dataset import read_dataset
    from .flow.train import train_expert

    if not Path(args.data).exists():
        raise FileNotFoundError(f"dataset not found: {args.data}")
    obs, actions = read_dataset(args.data)
    ecfg = cfg.expert_config()
    if args.epochs is not None:
        ecfg = ecfg.__class__(**{**ecfg.__dict__, "epochs": args.epochs})
    if args.lr is not None:
        ecfg = ecfg.__class__(**{**ecfg.__dict__, "lr": args.lr})
    model, nll = train_expert(obs, actions, ecfg)
    model.save(out / "expert.cenv")
    _write_rows(out / "nll.csv", ("epoch", "nll"),
                [(i, repr(float(v))) for i, v in enumerate(nll)])
    print(f"samples={obs.shape[0]} epochs={ecfg.epochs} "
          f"final_nll={nll[-1]:.6f}")
    print(f"checkpoint: {out / 'expert.cenv'}")
    return EXIT_OK


def cmd_train_refiner(args) -> int:
    out, cfg = _start_run(args)
    from .embodiment import save_embodiment
    from .flow.model import FlowModel
    from .rl.policy import PolicyNet
    from .rl.train import train_refiner

    expert = FlowModel.load(args.expert)
    emb = cfg.embodiment_spec(args.embodiment)
    n_updates = args.updates if args.updates is not None else cfg["rl.n_updates"]
    policy = PolicyNet(seed=cfg["seed"], embed_dim=cfg["rl.embed_dim"],
                       hidden=cfg["rl.hidden"], v_lim=emb.v_limits)
    result = train_refiner(
        expert, emb, env_cfg=cfg.env_config(), ppo_cfg=cfg.ppo_config(),
        sched=cfg.schedule(), n_updates=n_updates, seed=cfg["seed"],
        log_path=out / "train_log.csv", policy=policy)
    result.policy.save(out / "policy.cenv")
    save_embodiment(out / "embodiment.txt", emb)
    print(f"ETT: {result.ett_seconds:.1f} s "
          f"({result.ett_seconds / 3600.0:.4f} h)  "
          f"episodes={result.episodes} sr_rolling={result.sr_rolling:.3f}")
    print(f"checkpoint: {out / 'policy.cenv'}")
    return EXIT_OK


def _load_suite(path, cfg, out):
    from .eval.suite import BenchmarkSuite

    suite_path = Path(path) if path else out / "suite.txt"
    if suite_path.exists():
        log.info("loading suite %s", suite_path)
        return BenchmarkSuite.load(suite_path)
    log.info("building suite %s", suite_path)
    suite = BenchmarkSuite.build(cfg.suite_config())
    suite_path.parent.mkdir(parents=True, exist_ok=True)
    suite.save(suite_path)
    return suite


def cmd_eval(args) -> int:
    out, cfg = _start_run(args)
    import numpy as np

    from .embodiment import EXPERT_LIMITS, compute_scale
    from .eval.ablate import guidance_only_policy_fn, refined_policy_fn
    from .eval.bench import run_benchmark, write_trajectories
    from .flow.model import FlowModel

    if args.expert_only and args.policy:
        raise UsageError("--policy and --expert-only are mutually exclusive")
    suite = _load_suite(args.suite, cfg, out)
    emb = cfg.embodiment_spec(args.embodiment)
    if args.expert_only:
        if not args.expert:
            raise UsageError("--expert-only requires --expert")
        expert = FlowModel.load(args.expert)
        scale = compute_scale(EXPERT_LIMITS, emb.v_limits)
        policy_fn = guidance_only_policy_fn(expert, scale, emb.v_limits)
    elif args.policy == "zero":
        # plumbing stub: stand still, scores SR 0 by construction
        def policy_fn(obs, rng):
            return np.zeros((obs.shape[0], 3))
    elif args.policy:
        if not args.expert:
            raise UsageError("--policy needs --expert for reference proposals")
        from .rl.policy import PolicyNet

        policy = PolicyNet.load(args.policy)
        expert = FlowModel.load(args.expert)
        policy_fn = refined_policy_fn(policy, expert)
    else:
        raise UsageError("pick one of --policy PATH, --policy zero, "
                         "--expert-only")
    report = run_benchmark(
        policy_fn, suite, emb, seed=cfg["seed"],
        chunk_size=cfg["eval.chunk_size"],
        record_trajectories=args.dump_trajectories)
    report.write_csv(out / "report.csv")
    if args.dump_trajectories:
        paths = write_trajectories(report, out / "trajectories")
        log.info("wrote %d trajectory files", len(paths))
    print(report.summary())
    print(f"report: {out / 'report.csv'}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    out, cfg = _start_run(args)
    from .dataset import generate_dataset, read_dataset, write_dataset
    from .eval.ablate import AblationConfig, run_ablation
    from .flow.model import FlowModel, RegressorBaseline
    from .flow.train import RegressorTrainConfig, train_expert, train_regressor

    need_data = not (args.expert and args.regressor)
    obs = actions = None
    if need_data:
        if args.data and Path(args.data).exists():
            obs, actions = read_dataset(args.data)
        else:
            log.info("no dataset given, generating one")
            target = cfg["world.target_samples"] or None
            obs, actions, _ = generate_dataset(
                cfg.dwa_params(), cfg.world_config(), cfg["world.n_worlds"],
                cfg["seed"], target_samples=target)
            write_dataset(out / "dataset.bin", obs, actions)
    if args.expert:
        expert = FlowModel.load(args.expert)
    else:
        log.info("training expert for ablation")
        expert, _ = train_expert(obs, actions, cfg.expert_config())
        expert.save(out / "expert.cenv")
    if args.regressor:
        regressor = RegressorBaseline.load(args.regressor)
    else:
        log.info("training regressor baseline for ablation")
        ecfg = cfg.expert_config()
        regressor, _ = train_regressor(obs, actions, RegressorTrainConfig(
            lr=ecfg.lr, batch_size=ecfg.batch_size, epochs=ecfg.epochs,
            seed=ecfg.seed, embed_dim=ecfg.embed_dim,
            match_params=expert.n_params()))
        regressor.save(out / "regressor.cenv")
    suite = _load_suite(args.suite, cfg, out)
    emb = cfg.embodiment_spec(args.embodiment)
    acfg = AblationConfig(
        variants=cfg["eval.variants"], n_updates=cfg["rl.n_updates"],
        env=cfg.env_config(), ppo=cfg.ppo_config(), seed=cfg["seed"],
        bench_seed=cfg["seed"], chunk_size=cfg["eval.chunk_size"],
        embed_dim=cfg["rl.embed_dim"], hidden=cfg["rl.hidden"])
    result = run_ablation(expert, regressor, emb, suite, acfg)
    result.write_csv(out / "ablation.csv")
    for name, report in result.reports.items():
        report.write_csv(out / f"report_{name}.csv")
    for row in result.rows:
        print("  ".join(f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}"
                        for k, v in row.items()))
    print(f"table: {out / 'ablation.csv'}")
    return EXIT_OK


def cmd_export_modes(args) -> int:
    out, cfg = _start_run(args)
    import numpy as np

    from .dataset import build_tjunction_scene
    from .flow.model import FlowModel
    from .sim.env import AgentState, observe_single
    from .sim.world import generate_world

    expert = FlowModel.load(args.expert)
    if args.scene == "bimodal":
        world, agent, goal = build_tjunction_scene()
    elif args.scene == "open":
        world = generate_world("forest", 12.0, 0, 0)
        agent = AgentState(3.0, 6.0, 0.0, vx=1.0)
        goal = np.array([9.0, 6.0])
    else:
        raise UsageError(f"unknown scene {args.scene!r}")
    obs = observe_single(world, agent, goal)
    rng = np.random.default_rng(cfg["seed"])
    samples = expert.sample_rows(np.tile(obs, (args.n, 1)), rng)
    _write_rows(out / "modes.csv", ("vx", "vy", "vyaw"),
                [[repr(float(v)) for v in row] for row in samples])
    print(f"wrote {args.n} samples for scene {args.scene}: "
          f"{out / 'modes.csv'}")
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None,
                        help="flat 'section.key = value' config file")
    common.add_argument("--out", default=None,
                        help="run directory (default runs/<command>)")
    common.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    common.add_argument("--threads", type=int, default=None,
                        help="cap math threads (env CENAV_THREADS)")

    parser = _Parser(prog="cenav", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("gen-data", parents=[common],
                       help="harvest expert band demonstrations")
    p.add_argument("--n-worlds", type=int, default=None)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train-expert", parents=[common],
                       help="fit the flow expert on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.set_defaults(fn=cmd_train_expert)

    p = sub.add_parser("train-refiner", parents=[common],
                       help="guided PPO refinement against an embodiment")
    p.add_argument("--expert", required=True)
    p.add_argument("--embodiment", default=None,
                   help="preset name or spec file")
    p.add_argument("--updates", type=int, default=None)
    p.set_defaults(fn=cmd_train_refiner)

    p = sub.add_parser("eval", parents=[common],
                       help="run a policy over a benchmark suite")
    p.add_argument("--suite", default=None,
                   help="suite file; built from config when absent")
    p.add_argument("--policy", default=None,
                   help="policy checkpoint, or 'zero' for the stub")
    p.add_argument("--expert", default=None)
    p.add_argument("--expert-only", action="store_true",
                   help="execute scaled expert proposals directly")
    p.add_argument("--embodiment", default=None)
    p.add_argument("--dump-trajectories", action="store_true")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("ablate", parents=[common],
                       help="train and score the guidance variants")
    p.add_argument("--data", default=None)
    p.add_argument("--expert", default=None)
    p.add_argument("--regressor", default=None)
    p.add_argument("--suite", default=None)
    p.add_argument("--embodiment", default=None)
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("export-modes", parents=[common],
                       help="sample the expert at a probe scene")
    p.add_argument("--expert", required=True)
    p.add_argument("--scene", default="bimodal")
    p.add_argument("--n", type=int, default=100)
    p.set_defaults(fn=cmd_export_modes)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # -h / --help
        return int(exc.code or 0)
    if getattr(args, "command", None) is None or not hasattr(args, "fn"):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        _apply_threads(args.threads)
        return args.fn(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        from .config import ConfigError

        if isinstance(exc, ConfigError):
            print(f"usage error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        log.exception("run failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
