"""
Planner command line
Subcommands: worldgen, plan, bench and plot. Exit codes: 0 ok, 1 usage, 2 runtime failure
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import settings
from bench import (DEFAULT_PERIOD_US, RandomWorldSpec, aggregate_by_world, gen_random_world, initial_solution_stats,
                   make_planner, planner_names, read_aggregate_csv, read_initial_csv, run_trials,
                   write_aggregate_csv, write_initial_csv,
                   write_trials_csv, TrialRecord)
from bitstar import StopCondition
from plots import plot_files, render_world_svg
from sampling import derive_seed
from space import ContractViolation, WorldFormatError, load_world, save_world

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    """Bad flags or inputs detected after parsing"""


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that exits with the usage code instead of argparse's 2"""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_USAGE)


@dataclass
class RunManifest:
    command: str
    output_dir: str
    config_path: Optional[str] = None
    master_seed: Optional[int] = None
    seeds: List[int] = field(default_factory=list)
    planners: List[str] = field(default_factory=list)
    planner_options: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    world_paths: List[str] = field(default_factory=list)
    budget_ms: Optional[int] = None
    max_batches: Optional[int] = None
    max_iterations: Optional[int] = None
    jobs: int = 1
    notes: List[str] = field(default_factory=list)

    def write(self):
        os.makedirs(self.output_dir, exist_ok=True)
        with open(os.path.join(self.output_dir, 'manifest.json'), 'w', encoding='utf-8') as f:
            f.write(json.dumps(asdict(self), indent=2, sort_keys=True) + '\n')


# Configuration resolution: flag > config file > environment > default

def load_config(path: Optional[str]) -> Dict[str, Any]:
    if not path:
        return {}
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except FileNotFoundError as e:
        raise UsageError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise UsageError(f"config file {path}: line {e.lineno}: invalid JSON: {e.msg}") from e
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must contain a JSON object")
    return data


def resolve(args: argparse.Namespace, config: Dict[str, Any], name: str, default: Any = None) -> Any:
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in config:
        return config[name]
    return default


def _stop(args, config) -> StopCondition:
    budget_ms = resolve(args, config, 'budget_ms', settings.DEFAULT_BUDGET_MS)
    try:
        return StopCondition(time_budget=budget_ms / 1000.0,
                             max_batches=resolve(args, config, 'max_batches'),
                             max_iterations=resolve(args, config, 'max_iterations'))
    except ContractViolation as e:
        raise UsageError(str(e)) from e


def _planner_list(value: Any) -> List[str]:
    if isinstance(value, str):
        names = [p.strip() for p in value.split(',') if p.strip()]
    else:
        names = list(value or [])
    for name in names:
        if name.partition(':')[0] not in planner_names():
            raise UsageError(f"unknown planner {name!r}; valid names: {', '.join(planner_names())}")
    return names


# Subcommands

def cmd_worldgen(args, config) -> int:
    dim = resolve(args, config, 'dim')
    count = resolve(args, config, 'count', 1)
    master = resolve(args, config, 'seed', settings.DEFAULT_MASTER_SEED)
    out = resolve(args, config, 'out', settings.OUTPUT_DIR)
    if dim is None or dim < 1:
        raise UsageError("--dim must be a positive integer")
    if count < 1:
        raise UsageError("--count must be a positive integer")

    os.makedirs(out, exist_ok=True)
    manifest = RunManifest('worldgen', out, args.config, master)
    for i in range(count):
        seed = derive_seed(master, i)
        world = gen_random_world(RandomWorldSpec(dimension=dim, seed=seed))
        path = os.path.join(out, f'world_{dim}d_{master}_{i:03d}.json')
        save_world(world, path)
        manifest.seeds.append(seed)
        manifest.world_paths.append(path)
        logger.info(f"📝 Wrote {path} with {len(world.obstacles)} obstacles")
    manifest.write()
    return EXIT_OK


def cmd_plan(args, config) -> int:
    world_path = resolve(args, config, 'world')
    if not world_path:
        raise UsageError("--world is required")
    planner_name = resolve(args, config, 'planner', 'bitstar')
    _planner_list([planner_name])
    seed = resolve(args, config, 'seed', settings.DEFAULT_MASTER_SEED)
    out = resolve(args, config, 'out', settings.OUTPUT_DIR)
    stop = _stop(args, config)
    options = config.get('options', {}).get(planner_name.partition(':')[0], {})

    try:
        world = load_world(world_path)
    except FileNotFoundError as e:
        raise UsageError(f"world file not found: {world_path}") from e

    os.makedirs(out, exist_ok=True)
    planner = make_planner(planner_name, world, seed, stop, options)
    result = planner.plan()

    record = TrialRecord(planner_name, os.path.basename(world_path), seed, result.events, result.elapsed_us)
    write_trials_csv([record], os.path.join(out, 'events.csv'))
    with open(os.path.join(out, 'path.json'), 'w', encoding='utf-8') as f:
        payload = {'cost': result.path.cost, 'waypoints': result.path.as_lists()} if result.solved else None
        f.write(json.dumps(payload, indent=2) + '\n')

    manifest = RunManifest('plan', out, args.config, seed, [seed], [planner_name],
                           {planner_name: options}, [world_path], resolve(args, config, 'budget_ms'),
                           stop.max_batches, stop.max_iterations)
    if result.solved:
        manifest.notes.append(f"solution cost {result.best_cost!r}")
        logger.info(f"✅ {planner_name} solved with cost {result.best_cost:.6f}")
    else:
        manifest.notes.append("no solution")
        logger.info(f"❌ {planner_name} found no solution")

    if args.svg:
        if world.dimension == 2:
            with open(os.path.join(out, 'plan.svg'), 'w', encoding='utf-8') as f:
                f.write(render_world_svg(world, result))
        else:
            manifest.notes.append("svg skipped: world is not 2-D")
    manifest.write()
    return EXIT_OK


def cmd_bench(args, config) -> int:
    planners = _planner_list(resolve(args, config, 'planners', []))
    if not planners:
        raise UsageError("--planners must name at least one planner")
    master = resolve(args, config, 'seed', settings.DEFAULT_MASTER_SEED)
    trials = resolve(args, config, 'trials', 10)
    jobs = resolve(args, config, 'jobs', settings.DEFAULT_JOBS)
    out = resolve(args, config, 'out', settings.OUTPUT_DIR)
    period_ms = resolve(args, config, 'period_ms', DEFAULT_PERIOD_US / 1000.0)
    stop = _stop(args, config)
    options = config.get('options', {})
    if trials < 1 or jobs < 1 or period_ms <= 0:
        raise UsageError("--trials, --jobs and --period-ms must be positive")

    os.makedirs(out, exist_ok=True)
    world_paths = resolve(args, config, 'world', None) or []
    world_paths = [world_paths] if isinstance(world_paths, str) else list(world_paths)
    if not world_paths:
        dim = resolve(args, config, 'dim', 2)
        count = resolve(args, config, 'count', 1)
        world_dir = os.path.join(out, 'worlds')
        os.makedirs(world_dir, exist_ok=True)
        for i in range(count):
            path = os.path.join(world_dir, f'world_{dim}d_{master}_{i:03d}.json')
            save_world(gen_random_world(RandomWorldSpec(dimension=dim, seed=derive_seed(master, i))), path)
            world_paths.append(path)
    try:
        worlds = [(os.path.basename(p), load_world(p)) for p in world_paths]
    except FileNotFoundError as e:
        raise UsageError(f"world file not found: {e.filename}") from e

    seeds = [derive_seed(master, 1000 + i) for i in range(trials)]
    manifest = RunManifest('bench', out, args.config, master, seeds, planners,
                           {p: options.get(p.partition(':')[0], {}) for p in planners}, world_paths,
                           resolve(args, config, 'budget_ms', settings.DEFAULT_BUDGET_MS),
                           stop.max_batches, stop.max_iterations, jobs)
    manifest.write()

    records = run_trials(planners, worlds, seeds, stop, jobs=jobs, options=options)
    write_trials_csv(records, os.path.join(out, 'trials.csv'))

    horizon_us = int(round(stop.time_budget * 1e6)) if stop.time_budget else max(
        (r.wall_time_us for r in records), default=0)
    period_us = int(round(period_ms * 1000))
    if len(seeds) >= 2:
        for world_id, stats in aggregate_by_world(records, period_us, horizon_us).items():
            stem = os.path.splitext(world_id)[0]
            aggregate_path = os.path.join(out, f'aggregate_{stem}.csv')
            write_aggregate_csv(stats, aggregate_path)
            write_initial_csv(initial_solution_stats([r for r in records if r.world_id == world_id]),
                              os.path.join(out, f'initial_{stem}.csv'))
            _write_plots(aggregate_path, out)
    else:
        manifest.notes.append("aggregate skipped: fewer than two trials per planner and world")

    for world_id, _ in worlds:
        group = [r for r in records if r.world_id == world_id]
        for planner, summary in initial_solution_stats(group).items():
            manifest.notes.append(f"{world_id} {planner}: {summary['solved']}/{summary['trials']} solved, "
                                  f"median first solution {summary['median_time_ms']} ms, "
                                  f"cost {summary['median_cost']}")
    failed = [r for r in records if r.error]
    if failed:
        manifest.notes.append(f"{len(failed)} trial(s) failed")
    manifest.write()

    if len(failed) == len(records):
        logger.error("❌ Every trial failed")
        return EXIT_RUNTIME
    logger.info(f"✅ Benchmark written to {out}")
    return EXIT_OK


def _write_plots(aggregate_path: str, out: str):
    """aggregate_<world>.csv gives success_<world>.svg and cost_<world>.svg, with dots from initial_<world>.csv"""
    rows = read_aggregate_csv(aggregate_path)
    stem = os.path.splitext(os.path.basename(aggregate_path))[0]
    suffix = stem[len('aggregate'):] if stem.startswith('aggregate') else f'_{stem}'
    initial_path = os.path.join(os.path.dirname(aggregate_path), f'initial{suffix}.csv')
    initial = read_initial_csv(initial_path) if os.path.exists(initial_path) else None
    for name, text in plot_files(rows, initial, suffix).items():
        with open(os.path.join(out, name), 'w', encoding='utf-8') as f:
            f.write(text)


def cmd_plot(args, config) -> int:
    aggregate_path = resolve(args, config, 'aggregate')
    out = resolve(args, config, 'out', settings.OUTPUT_DIR)
    if not aggregate_path:
        raise UsageError("--aggregate is required")
    if not os.path.exists(aggregate_path):
        raise UsageError(f"aggregate file not found: {aggregate_path}")
    os.makedirs(out, exist_ok=True)
    _write_plots(aggregate_path, out)
    manifest = RunManifest('plot', out, args.config)
    manifest.notes.append(f"plots from {aggregate_path}")
    manifest.write()
    return EXIT_OK


COMMANDS = {
    'worldgen': cmd_worldgen,
    'plan': cmd_plan,
    'bench': cmd_bench,
    'plot': cmd_plot,
}


def build_parser() -> CliParser:
    parser = CliParser(prog='planner', description='Sampling-based path planning benchmarks')
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, help='seed or master seed')
    common.add_argument('--budget-ms', dest='budget_ms', type=int, help='time budget per run in milliseconds')
    common.add_argument('--out', help='output directory')
    common.add_argument('--jobs', type=int, help='parallel trial workers')
    common.add_argument('--config', help='JSON config file; flags override it')
    common.add_argument('--log-level', dest='log_level', help='DEBUG, INFO, WARNING or ERROR')

    sub = parser.add_subparsers(dest='command', parser_class=CliParser)
    sub.required = True

    worldgen = sub.add_parser('worldgen', parents=[common], help='generate random box worlds')
    worldgen.add_argument('--dim', type=int)
    worldgen.add_argument('--count', type=int)

    plan = sub.add_parser('plan', parents=[common], help='run one planner on one world')
    plan.add_argument('--world')
    plan.add_argument('--planner', help=f"one of {', '.join(planner_names())} or fmtstar:<count>")
    plan.add_argument('--max-batches', dest='max_batches', type=int)
    plan.add_argument('--max-iterations', dest='max_iterations', type=int)
    plan.add_argument('--svg', action='store_true', help='write plan.svg for 2-D worlds')

    bench = sub.add_parser('bench', parents=[common], help='run a seeded benchmark sweep')
    bench.add_argument('--planners', help='comma separated planner names')
    bench.add_argument('--world', action='append', help='world file (repeatable)')
    bench.add_argument('--dim', type=int, help='generate worlds of this dimension when no --world is given')
    bench.add_argument('--count', type=int, help='number of generated worlds')
    bench.add_argument('--trials', type=int, help='seeds per planner and world')
    bench.add_argument('--period-ms', dest='period_ms', type=float)
    bench.add_argument('--max-batches', dest='max_batches', type=int)
    bench.add_argument('--max-iterations', dest='max_iterations', type=int)

    plot = sub.add_parser('plot', parents=[common], help='redraw plots from an aggregate CSV')
    plot.add_argument('--aggregate')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        settings.setup_logging(level=resolve(args, config, 'log_level', settings.LOG_LEVEL))
        return COMMANDS[args.command](args, config)
    except (UsageError, ContractViolation, WorldFormatError) as e:
        sys.stderr.write(f"planner {args.command}: error: {e}\n")
        return EXIT_USAGE
    except Exception as e:
        logger.error(f"planner {args.command} failed: {e}", exc_info=True)
        return EXIT_RUNTIME


if __name__ == '__main__':
    sys.exit(main())
