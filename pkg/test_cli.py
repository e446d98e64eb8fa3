"""
Tests for the planner command line
Run each subcommand in a temporary directory and check exit codes and outputs
"""

import csv
import json
import os

import pytest

from cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from space import load_world, save_world


def read_csv(path):
    with open(path, newline='', encoding='utf-8') as f:
        return list(csv.DictReader(f))


def read_json(path):
    with open(path, encoding='utf-8') as f:
        return json.load(f)


def read_text(path):
    with open(path, encoding='utf-8') as f:
        return f.read()


# worldgen

def test_worldgen_writes_loadable_worlds(chdir_tmp):
    assert main(['worldgen', '--dim', '2', '--seed', '1', '--count', '2', '--out', 'a']) == EXIT_OK
    assert main(['worldgen', '--dim', '2', '--seed', '1', '--count', '2', '--out', 'b']) == EXIT_OK
    for name in ('world_2d_1_000.json', 'world_2d_1_001.json'):
        world = load_world(os.path.join('a', name))
        assert world.dimension == 2
        assert read_text(os.path.join('a', name)) == read_text(os.path.join('b', name))
    manifest = read_json(os.path.join('a', 'manifest.json'))
    assert manifest['command'] == 'worldgen'
    assert len(manifest['seeds']) == 2


def test_worldgen_rejects_bad_dimension(chdir_tmp):
    assert main(['worldgen', '--dim', '0', '--out', 'w']) == EXIT_USAGE


def test_unknown_subcommand_is_usage_error(chdir_tmp):
    with pytest.raises(SystemExit) as exc:
        main(['explore'])
    assert exc.value.code == EXIT_USAGE


# plan

def test_plan_bitstar(chdir_tmp, empty_world):
    save_world(empty_world, 'empty.json')
    code = main(['plan', '--world', 'empty.json', '--planner', 'bitstar', '--max-batches', '2',
                 '--seed', '4', '--out', 'run', '--svg'])
    assert code == EXIT_OK
    rows = read_csv(os.path.join('run', 'events.csv'))
    assert len(rows) >= 1
    costs = [float(r['cost']) for r in rows]
    assert costs == sorted(costs, reverse=True)
    path = read_json(os.path.join('run', 'path.json'))
    assert path['cost'] == pytest.approx(costs[-1])
    assert path['waypoints'][0] == [0.0, 0.0]
    assert read_text(os.path.join('run', 'plan.svg')).startswith('<svg')


def test_plan_single_shot_planner(chdir_tmp, empty_world):
    save_world(empty_world, 'empty.json')
    code = main(['plan', '--world', 'empty.json', '--planner', 'rrtconnect', '--max-iterations', '2000',
                 '--out', 'run'])
    assert code == EXIT_OK
    assert len(read_csv(os.path.join('run', 'events.csv'))) <= 1


def test_plan_without_solution(chdir_tmp, sealed_world):
    save_world(sealed_world, 'sealed.json')
    code = main(['plan', '--world', 'sealed.json', '--max-batches', '2', '--out', 'run'])
    assert code == EXIT_OK
    assert read_csv(os.path.join('run', 'events.csv')) == []
    assert read_json(os.path.join('run', 'path.json')) is None
    assert 'no solution' in read_json(os.path.join('run', 'manifest.json'))['notes']


def test_plan_usage_errors(chdir_tmp, empty_world):
    save_world(empty_world, 'empty.json')
    assert main(['plan', '--world', 'empty.json', '--planner', 'prm', '--out', 'run']) == EXIT_USAGE
    assert main(['plan', '--world', 'missing.json', '--out', 'run']) == EXIT_USAGE
    assert main(['plan', '--out', 'run']) == EXIT_USAGE


def test_plan_rejects_malformed_world(chdir_tmp):
    with open('bad.json', 'w', encoding='utf-8') as f:
        f.write('{"dimension": 2,\n "bounds": ')
    assert main(['plan', '--world', 'bad.json', '--max-batches', '1', '--out', 'run']) == EXIT_USAGE


def test_config_file_and_flag_precedence(chdir_tmp, empty_world):
    save_world(empty_world, 'empty.json')
    with open('config.json', 'w', encoding='utf-8') as f:
        json.dump({'planner': 'rrt', 'max_iterations': 3000, 'seed': 8}, f)
    code = main(['plan', '--config', 'config.json', '--world', 'empty.json', '--seed', '9', '--out', 'run'])
    assert code == EXIT_OK
    manifest = read_json(os.path.join('run', 'manifest.json'))
    assert manifest['planners'] == ['rrt']
    assert manifest['seeds'] == [9]
    assert manifest['max_iterations'] == 3000


def test_missing_config_file(chdir_tmp):
    assert main(['worldgen', '--dim', '2', '--config', 'nope.json']) == EXIT_USAGE


# bench and plot

def test_bench_then_plot(chdir_tmp, wall_world):
    save_world(wall_world, 'wall.json')
    code = main(['bench', '--planners', 'bitstar,rrtconnect', '--world', 'wall.json', '--trials', '5',
                 '--budget-ms', '200', '--max-batches', '3', '--max-iterations', '3000', '--out', 'bench'])
    assert code == EXIT_OK
    rows = read_csv(os.path.join('bench', 'aggregate_wall.csv'))
    assert {r['planner'] for r in rows} == {'bitstar', 'rrtconnect'}
    for r in rows:
        assert r['regime'] in ('solid', 'dashed', '')
        assert (r['regime'] == '') == (r['median_cost'] == '')
        assert 0.0 <= float(r['success_fraction']) <= 1.0
    initial = read_csv(os.path.join('bench', 'initial_wall.csv'))
    assert {r['planner'] for r in initial} == {'bitstar', 'rrtconnect'}
    assert all(r['trials'] == '5' for r in initial)
    solved = sum(r['median_cost'] != '' for r in initial)
    assert read_text(os.path.join('bench', 'cost_wall.svg')).count('class="initial"') == solved
    manifest = read_json(os.path.join('bench', 'manifest.json'))
    assert len(manifest['seeds']) == 5
    assert not os.path.exists(os.path.join('bench', 'aggregate.csv'))

    assert main(['plot', '--aggregate', os.path.join('bench', 'aggregate_wall.csv'), '--out', 'replot']) == EXIT_OK
    for name in ('success_wall.svg', 'cost_wall.svg'):
        assert read_text(os.path.join('bench', name)) == read_text(os.path.join('replot', name))


def test_bench_generates_worlds(chdir_tmp):
    code = main(['bench', '--planners', 'rrt', '--dim', '2', '--count', '1', '--trials', '1',
                 '--max-iterations', '500', '--seed', '1', '--out', 'bench'])
    assert code == EXIT_OK
    assert os.path.exists(os.path.join('bench', 'worlds', 'world_2d_1_000.json'))
    assert not [name for name in os.listdir('bench') if name.startswith('aggregate')]


def test_bench_keeps_worlds_apart(chdir_tmp, empty_world, wall_world):
    save_world(empty_world, 'empty.json')
    save_world(wall_world, 'wall.json')
    code = main(['bench', '--planners', 'rrtconnect', '--world', 'empty.json', '--world', 'wall.json',
                 '--trials', '3', '--max-iterations', '3000', '--seed', '2', '--out', 'bench'])
    assert code == EXIT_OK
    for stem in ('empty', 'wall'):
        rows = read_csv(os.path.join('bench', f'aggregate_{stem}.csv'))
        assert {r['planner'] for r in rows} == {'rrtconnect'}
        # three trials per world, not six pooled ones
        assert [r['trials'] for r in read_csv(os.path.join('bench', f'initial_{stem}.csv'))] == ['3']
        assert read_text(os.path.join('bench', f'cost_{stem}.svg')).startswith('<svg')
    assert not os.path.exists(os.path.join('bench', 'aggregate.csv'))
    notes = read_json(os.path.join('bench', 'manifest.json'))['notes']
    assert any(n.startswith('empty.json rrtconnect: 3/3') for n in notes)


def test_bench_needs_planners(chdir_tmp, empty_world):
    save_world(empty_world, 'empty.json')
    assert main(['bench', '--planners', ',', '--world', 'empty.json', '--out', 'bench']) == EXIT_USAGE
    assert main(['bench', '--planners', 'bitstar,prm', '--world', 'empty.json', '--out', 'bench']) == EXIT_USAGE


def test_bench_all_trials_failing(chdir_tmp, empty_world, mocker):
    save_world(empty_world, 'empty.json')
    mocker.patch('bench.make_planner', side_effect=RuntimeError('boom'))
    code = main(['bench', '--planners', 'bitstar', '--world', 'empty.json', '--trials', '2',
                 '--max-batches', '1', '--jobs', '1', '--out', 'bench'])
    assert code == EXIT_RUNTIME
    assert '2 trial(s) failed' in read_json(os.path.join('bench', 'manifest.json'))['notes']


def test_plot_missing_aggregate(chdir_tmp):
    assert main(['plot', '--aggregate', 'nope.csv', '--out', 'plots']) == EXIT_USAGE
