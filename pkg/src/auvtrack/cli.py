"""Command-line entry point: the full pipeline as subcommands with seeded,
manifest-tracked artifact directories.

Exit codes: 0 success, 1 failed check/run, 2 usage error. The FISHER_LOG
environment variable sets the log level.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import nn
from .env import (
    RewardWeights,
    ScenarioSpec,
    TrackingEnv,
    make_scenario,
    read_episodes,
    rollout_episode,
    write_episodes,
)
from .manifest import write_manifest

log = logging.getLogger("auvtrack")


def _setup_logging() -> None:
    level = os.environ.get("FISHER_LOG", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_spec(args) -> ScenarioSpec:
    return ScenarioSpec.load(args.scenario)


# ---------------------------------------------------------------------------
# subcommands


def cmd_scenario(args) -> int:
    started = time.time()
    out = _out_dir(args)
    if args.validate:
        spec = ScenarioSpec.load(args.validate)
        print(f"ok: scenario {spec.id}, {spec.n_agents} agents, "
              f"{len(spec.obstacles)} obstacles, {spec.duration_steps} steps")
        return 0
    spec = make_scenario(args.id, args.n, args.seed)
    path = out / f"scenario_{spec.id}_n{spec.n_agents}.json"
    spec.save(path)
    write_manifest(out, "scenario", {"id": args.id, "n": args.n}, args.seed,
                   inputs={}, outputs=[path], started=started)
    print(path)
    return 0


def cmd_expert(args) -> int:
    from .evaluation.metrics import compute_metrics
    from .expert import ApfParams, collect_demonstrations, train_waypoint_tracker
    from .expert.collect import buffer_manifest
    from .expert.tracker import TrackerPolicy

    started = time.time()
    out = _out_dir(args)
    spec = _load_spec(args)
    if args.tracker:
        tracker = TrackerPolicy.load(args.tracker, spec.auv_params)
    else:
        result = train_waypoint_tracker(args.seed, budget_steps=args.tracker_budget,
                                        params=spec.auv_params)
        if not result.ok:
            log.error("tracker missed the steady-state threshold: %.3f m "
                      "(curve: %s)", result.stationary_error, result.curve)
            return 1
        tracker = result.policy
        tracker.save(out / "tracker.ckpt")
    buffer = collect_demonstrations(spec, tracker, ApfParams(), args.episodes,
                                    args.seed)
    demo_path = out / "demos.jsonl"
    buffer.save(demo_path)
    metrics = compute_metrics(buffer.episodes, spec.hydro)
    (out / "buffer.json").write_text(json.dumps(
        buffer_manifest(buffer, {k: getattr(metrics, k) for k in
                                 ("mean_min_distance", "min_obstacle_distance",
                                  "danger_time_s", "mean_consistency")}),
        indent=2, sort_keys=True) + "\n")
    outputs = [demo_path, out / "buffer.json"]
    if not args.tracker:
        outputs.append(out / "tracker.ckpt")
    write_manifest(out, "expert", {"episodes": args.episodes,
                                   "scenario": spec.to_dict()},
                   args.seed, inputs={"scenario": args.scenario},
                   outputs=outputs, started=started)
    print(f"{demo_path} ({len(buffer.episodes)} episodes, "
          f"mean min-distance {metrics.mean_min_distance:.2f} m)")
    return 0


def cmd_train_madac(args) -> int:
    from .madac.trainer import MadacConfig, MadacTrainer, write_curve

    started = time.time()
    out = _out_dir(args)
    spec = _load_spec(args)
    demos = read_episodes(args.demos)
    cfg = MadacConfig(budget_steps=args.budget,
                      warmup_steps=min(5000, max(args.budget // 4, 256)),
                      explore_steps=min(1500, max(args.budget // 8, 128)),
                      decentralized=args.decentralized,
                      stop_at_normalized=args.stop_at)
    trainer = MadacTrainer(spec, demos, cfg, args.seed)
    result = trainer.train()
    paths = trainer.save_policies(out)
    curve_path = out / "curve.csv"
    write_curve(curve_path, result.curve)
    summary = {
        "final_normalized": result.final_normalized,
        "env_steps": result.env_steps,
        "random_return": result.random_return,
        "expert_return": result.expert_return,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_manifest(out, "train-madac",
                   {"budget": args.budget, "decentralized": args.decentralized,
                    "scenario": spec.to_dict()},
                   args.seed,
                   inputs={"scenario": args.scenario, "demos": args.demos},
                   outputs=paths + [curve_path, out / "summary.json"], started=started)
    print(f"final normalized reward: {result.final_normalized:.3f}")
    return 0


def cmd_export_offline(args) -> int:
    from .madac.trainer import export_offline, load_policies

    started = time.time()
    out = _out_dir(args)
    specs = [ScenarioSpec.load(p) for p in args.scenarios]
    policy_paths = sorted(Path(args.policies).glob("agent_*.ckpt"))
    if not policy_paths:
        log.error("no agent_*.ckpt found under %s", args.policies)
        return 1
    agents, amap = load_policies(specs[0], policy_paths)
    episodes, manifest = export_offline(agents, amap, specs,
                                        args.episodes_per_scenario, args.seed)
    data_path = out / "offline.jsonl"
    write_episodes(data_path, episodes)
    (out / "dataset.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    write_manifest(out, "export-offline",
                   {"episodes_per_scenario": args.episodes_per_scenario,
                    "scenarios": [s.id for s in specs]},
                   args.seed,
                   inputs={f"scenario_{i}": p for i, p in enumerate(args.scenarios)},
                   outputs=[data_path, out / "dataset.json"], started=started)
    print(f"{data_path} ({manifest['episodes']} episodes)")
    return 0


def cmd_train_maigdt(args) -> int:
    from .maigdt import GdtConfig, train

    started = time.time()
    out = _out_dir(args)
    episodes = read_episodes(args.dataset)
    n_agents = episodes[0].n_agents
    cfg = GdtConfig(embed_dim=args.embed, context=args.context)
    result = train(episodes, n_agents, steps=args.steps, seed=args.seed, cfg=cfg)
    outputs = []
    for i, policy in enumerate(result.policies):
        path = out / f"gdt_agent_{i}.ckpt"
        nn.save_checkpoint(path, policy.state_dict())
        outputs.append(path)
    losses_path = out / "losses.json"
    losses_path.write_text(json.dumps({"final_losses": result.final_losses},
                                      indent=2, sort_keys=True) + "\n")
    write_manifest(out, "train-maigdt",
                   {"steps": args.steps, "embed": args.embed, "context": args.context},
                   args.seed, inputs={"dataset": args.dataset},
                   outputs=outputs + [losses_path], started=started)
    print(f"trained {n_agents} agents; final losses "
          f"{[round(x, 5) for x in result.final_losses]}")
    return 0


def cmd_eval(args) -> int:
    from .evaluation.metrics import (
        compute_metrics,
        episode_metric_return,
        normalized_reward,
    )

    started = time.time()
    out = _out_dir(args)
    outputs = []

    if args.baseline:
        from .evaluation.baseline import sac_ctde_baseline
        spec = _load_spec(args)
        _, report, curve = sac_ctde_baseline(spec, args.setting, args.budget,
                                             args.seed)
        path = out / f"baseline_{args.setting}.json"
        path.write_text(report.to_json() + "\n")
        outputs.append(path)
        print(report.csv_row() if args.format == "csv" else report.to_json())
    elif args.maigdt:
        from .maigdt import GdtConfig, GdtPolicy, maigdt_rollout
        from .maigdt.model import GdtModel, HimEncoder
        spec = _load_spec(args)
        demo_path, _, demo_idx = args.demo.partition("#")
        demos = read_episodes(demo_path)
        demo = demos[int(demo_idx or 0)]
        cfg = GdtConfig(embed_dim=args.embed, context=args.context)
        env = TrackingEnv(spec)
        policies = []
        for i in range(spec.n_agents):
            rng = np.random.default_rng(0)
            him = HimEncoder(env.obs_dim, cfg, rng)
            model = GdtModel(env.obs_dim, 2, cfg, rng)
            policy = GdtPolicy(model, him, cfg)
            policy.load_state_dict(nn.load_checkpoint(Path(args.maigdt) / f"gdt_agent_{i}.ckpt"))
            policies.append(policy)
        records = [maigdt_rollout(spec, policies, demo, episode_seed=args.seed + k)
                   for k in range(args.episodes)]
        rec_path = out / "rollouts.jsonl"
        write_episodes(rec_path, records)
        outputs.append(rec_path)
        report = compute_metrics(records, spec.hydro)
        print(report.csv_row() if args.format == "csv" else report.to_json())
    else:
        episodes = read_episodes(args.episodes_file)
        hydro = None
        report = compute_metrics(episodes, hydro)
        path = out / "metrics.json"
        path.write_text(report.to_json() + "\n")
        outputs.append(path)
        line = report.csv_row() if args.format == "csv" else report.to_json()
        if args.random_cal is not None and args.expert_cal is not None:
            weights = RewardWeights.named(args.setting)
            returns = [episode_metric_return(ep, weights) for ep in episodes]
            norm = normalized_reward(returns, args.random_cal, args.expert_cal)
            line += f"\nnormalized_reward: {norm:.4f}"
        print(line)

    write_manifest(out, "eval", {"format": args.format}, args.seed,
                   inputs={}, outputs=outputs, started=started)
    return 0


def cmd_check(args) -> int:
    failures: list[str] = []
    suites = {
        "sonar": _check_sonar,
        "gradient": _check_gradient,
        "laplacian": _check_laplacian,
        "bellman": _check_bellman,
    }
    names = list(suites) if args.suite == "all" else [args.suite]
    for name in names:
        failures.extend(suites[name]())
    if failures:
        print("FAILED properties:")
        for f in failures:
            print(f"  - {f}")
        return 1
    return 0


def _check_sonar() -> list[str]:
    from .acoustics import HydroParams, active_echo_margin, detection_radius, thorp_alpha

    out = []
    alpha = thorp_alpha(10.0)
    if abs(alpha - 1.18703) > 1e-5:
        out.append(f"absorption at 10 kHz: {alpha}")
    hp = HydroParams()
    r_c = detection_radius(hp)
    print(f"sonar: alpha(10 kHz) = {alpha:.5f} dB/km, r_c = {r_c:.2f} m")
    if abs(r_c - 25.03) > 0.05:
        out.append(f"detection radius: {r_c}")
    if abs(active_echo_margin(r_c, hp)) > 1e-2:
        out.append("echo margin at the detection radius not ~0")
    return out


def _check_gradient() -> list[str]:
    rng = np.random.default_rng(0)
    out = []
    mlp = nn.MLP([5, 16, 1], rng, act="tanh")
    x = rng.normal(size=(12, 5))

    loss = (mlp(nn.tensor(x)) ** 2).mean()
    nn.backward(loss)
    analytic = {k: p.grad.copy() for k, p in mlp.parameters()}
    for k, p in mlp.parameters():
        fd = np.zeros_like(p.data)
        flat, fdf = p.data.reshape(-1), fd.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + 1e-5
            hi = (mlp.forward_np(x) ** 2).mean()
            flat[i] = orig - 1e-5
            lo = (mlp.forward_np(x) ** 2).mean()
            flat[i] = orig
            fdf[i] = (hi - lo) / 2e-5
        err = np.abs(analytic[k] - fd).max() / max(np.abs(fd).max(), 1e-8)
        if err > 1e-4:
            out.append(f"gradient mismatch on {k}: rel err {err:.2e}")
    print("gradient: analytic vs central finite differences on a tanh MLP ok"
          if not out else "gradient: FAILED")
    return out


def _check_laplacian() -> list[str]:
    from .acoustics import HydroParams
    from .formation import slot_positions
    from .swarm import consistency

    out = []
    hp = HydroParams()
    lam = consistency([(0.0, 0.0), (12.0, 0.0)], hp)
    print(f"laplacian: lambda2 at 12 m spacing = {lam:.3f}")
    if abs(lam - 102.804) > 0.02:
        out.append(f"two-agent connectivity: {lam}")
    for n, target in ((2, 100.1), (3, 150.2), (4, 200.2)):
        got = consistency(slot_positions(n, 12.0, np.zeros(2), 0.0), hp)
        if abs(got - target) > 3.0:
            out.append(f"formation consistency n={n}: {got} vs {target}")
    return out


def _check_bellman() -> list[str]:
    from .evaluation.markov_games import policy_value_gap, random_game, random_policies

    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):
        game = random_game(rng)
        pol = random_policies(rng, game)
        worst = max(worst, abs(policy_value_gap(game, pol)))
    print(f"bellman: worst |value-consistency gap| over 100 games = {worst:.2e}")
    return [] if worst < 1e-8 else [f"value-consistency gap {worst}"]


def cmd_plot_data(args) -> int:
    from .evaluation.metrics import DANGER_RADIUS
    from .swarm import algebraic_connectivity, build_laplacian
    from .acoustics import HydroParams

    started = time.time()
    out = _out_dir(args)
    episodes = read_episodes(args.episodes_file)
    hydro = HydroParams()
    outputs = []
    for k, rec in enumerate(episodes):
        path = out / f"episode_{k:03d}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["t"]
            for i in range(rec.n_agents):
                header += [f"agent{i}_x", f"agent{i}_y", f"agent{i}_theta"]
            header += ["target_x", "target_y", "lambda", "min_distance", "danger"]
            writer.writerow(header)
            obst = np.asarray(rec.obstacles) if rec.obstacles else None
            for t in range(1, rec.steps + 1):
                pos = rec.agent_states[t, :, :2]
                row = [round(t * rec.dt, 6)]
                for i in range(rec.n_agents):
                    row += [rec.agent_states[t, i, 0], rec.agent_states[t, i, 1],
                            rec.agent_states[t, i, 2]]
                lam = algebraic_connectivity(build_laplacian(pos, hydro))
                dmin = float(np.hypot(*(pos - rec.target[t, :2]).T).min())
                if obst is not None:
                    clear = (np.hypot(pos[:, None, 0] - obst[None, :, 0],
                                      pos[:, None, 1] - obst[None, :, 1])
                             - obst[None, :, 2]).min()
                    danger = int(clear < DANGER_RADIUS)
                else:
                    danger = 0
                row += [rec.target[t, 0], rec.target[t, 1], lam, dmin, danger]
                writer.writerow(row)
        outputs.append(path)
    write_manifest(out, "plot-data", {"episodes": len(episodes)}, args.seed,
                   inputs={"episodes": args.episodes_file}, outputs=outputs,
                   started=started)
    print(f"wrote {len(outputs)} csv files to {out}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="auvtrack",
                                     description=__doc__.split("\n")[0])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="runs/out")
    parser.add_argument("--config", default=None,
                        help="optional JSON file of defaults merged into args")
    parser.add_argument("--jobs", type=int, default=1,
                        help="episode-level parallelism (1 = serial)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scenario", help="emit or validate scenario JSON")
    p.add_argument("--id", default="1")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--validate", default=None)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("expert", help="train the waypoint tracker and collect demos")
    p.add_argument("--scenario", required=True)
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--tracker", default=None, help="existing tracker checkpoint")
    p.add_argument("--tracker-budget", type=int, default=40000)
    p.set_defaults(func=cmd_expert)

    p = sub.add_parser("train-madac", help="adversarial imitation stage")
    p.add_argument("--scenario", required=True)
    p.add_argument("--demos", required=True)
    p.add_argument("--budget", type=int, default=60000)
    p.add_argument("--decentralized", action="store_true")
    p.add_argument("--stop-at", type=float, default=None)
    p.set_defaults(func=cmd_train_madac)

    p = sub.add_parser("export-offline", help="roll trained policies into a dataset")
    p.add_argument("--policies", required=True)
    p.add_argument("--scenarios", nargs="+", required=True)
    p.add_argument("--episodes-per-scenario", type=int, default=50)
    p.set_defaults(func=cmd_export_offline)

    p = sub.add_parser("train-maigdt", help="offline conditioned-policy stage")
    p.add_argument("--dataset", required=True)
    p.add_argument("--steps", type=int, default=400)
    p.add_argument("--embed", type=int, default=128)
    p.add_argument("--context", type=int, default=20)
    p.set_defaults(func=cmd_train_maigdt)

    p = sub.add_parser("eval", help="metrics, normalized reward, baseline, rollouts")
    p.add_argument("--episodes-file", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--setting", choices=("cooperative", "mixed", "split"),
                   default="cooperative")
    p.add_argument("--random-cal", type=float, default=None)
    p.add_argument("--expert-cal", type=float, default=None)
    p.add_argument("--baseline", action="store_true")
    p.add_argument("--budget", type=int, default=20000)
    p.add_argument("--scenario", default=None)
    p.add_argument("--maigdt", default=None, help="directory of gdt_agent_*.ckpt")
    p.add_argument("--demo", default=None, help="<path>#<episode-index>")
    p.add_argument("--episodes", type=int, default=3)
    p.add_argument("--embed", type=int, default=128)
    p.add_argument("--context", type=int, default=20)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("check", help="property suites")
    p.add_argument("--suite", choices=("sonar", "gradient", "laplacian",
                                       "bellman", "all"), default="all")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("plot-data", help="per-step trajectory CSVs")
    p.add_argument("--episodes-file", required=True)
    p.set_defaults(func=cmd_plot_data)
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except Exception:
        log.exception("command failed")
        return 1


if __name__ == "__main__":
    sys.exit(main())
