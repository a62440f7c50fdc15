import argparse
import importlib
import io
import os

import mock
import numpy as np
import pytest

import unitnorm.main
from unitnorm.commands import UNITNORM_MANAGEMENT_COMMANDS
from unitnorm.commands.evaluate import Evaluate
from unitnorm.commands.gendata import GenData
from unitnorm.commands.gradcheck import Gradcheck
from unitnorm.commands.normalize import Normalize
from unitnorm.commands.runrecipe import RunRecipe
from unitnorm.commands.schedule import Schedule
from unitnorm.commands.showconfig import ShowConfig
from unitnorm.core.commands import BaseCommand
from unitnorm.core.config import Config
from unitnorm.core.exceptions import CommandError
from unitnorm.corpus import storage
from unitnorm.pipeline.report import MetricsReport, read_rows, write_units
from unitnorm.tensor.gradcheck import GradcheckResult
from unitnorm.utils.imports import import_object


def make_command(command_cls, **args):
    namespace = argparse.Namespace(seed=None, **args)
    config = Config(importlib.import_module('tests.settings5'), namespace)
    command = command_cls(config)
    command.stdout = io.StringIO()
    return command


def run_command(command_cls, **args):
    command = make_command(command_cls, **args)
    with mock.patch('logging.config.dictConfig'):
        command()
    return command


def test_unitnorm_management_commands():
    assert set(UNITNORM_MANAGEMENT_COMMANDS) == set([
        'unitnorm.commands.gendata.GenData',
        'unitnorm.commands.trainvae.TrainVae',
        'unitnorm.commands.traindiffusion.TrainDiffusion',
        'unitnorm.commands.normalize.Normalize',
        'unitnorm.commands.trains2ut.TrainS2ut',
        'unitnorm.commands.trainar.TrainAr',
        'unitnorm.commands.decode.Decode',
        'unitnorm.commands.decodear.DecodeAr',
        'unitnorm.commands.evaluate.Evaluate',
        'unitnorm.commands.benchmark.Benchmark',
        'unitnorm.commands.schedule.Schedule',
        'unitnorm.commands.runrecipe.RunRecipe',
        'unitnorm.commands.showconfig.ShowConfig',
        'unitnorm.commands.gradcheck.Gradcheck',
    ])


def test_management_command_names():
    commands = [import_object(name) for name in UNITNORM_MANAGEMENT_COMMANDS]
    assert all(issubclass(cls, BaseCommand) for cls in commands)
    assert all(cls.help for cls in commands)
    assert sorted(cls.name for cls in commands) == sorted([
        'gen-data', 'train-vae', 'train-diffusion', 'normalize',
        'train-s2ut', 'train-ar', 'decode', 'decode-ar', 'evaluate',
        'benchmark', 'schedule', 'run-recipe', 'showconfig', 'gradcheck'])


def test_showconfig():
    command = run_command(ShowConfig)
    output = command.stdout.getvalue()
    assert "name: 'test-unitnorm-tiny'" in output
    assert "'timesteps': 20" in output
    assert "fingerprint: '" in output


def test_schedule_dump_to_stdout():
    command = run_command(Schedule, dump='-')
    lines = command.stdout.getvalue().splitlines()
    assert lines[0] == ('t,beta,alpha,alpha_bar,sqrt_alpha_bar,'
                        'sqrt_one_minus_alpha_bar')
    assert len(lines) == 22
    assert lines[1].startswith('0,')
    assert lines[-1].startswith('20,')


def test_schedule_dump_to_file(tmpdir):
    path = str(tmpdir.join('schedule.csv'))
    run_command(Schedule, dump=path)
    rows = read_rows(path)
    assert len(rows) == 21
    assert float(rows[0]['alpha_bar']) == 1.0
    alpha_bars = [float(row['alpha_bar']) for row in rows]
    assert alpha_bars == sorted(alpha_bars, reverse=True)


def test_gen_data_and_evaluate_references(tmpdir):
    corpus_dir = str(tmpdir.join('data'))
    run_command(GenData, out=corpus_dir)

    manifest = storage.read_manifest(corpus_dir)
    assert manifest['splits'] == {'train': 12, 'valid': 4, 'test': 4}
    assert len(manifest['fingerprint']) == 16
    assert len(storage.read_kmeans(corpus_dir).centroids) == 8

    test = storage.read_split(corpus_dir, 'test')
    hyp = str(tmpdir.join('test.units'))
    write_units(hyp, dict((u.uid, u.target_units) for u in test))
    out = str(tmpdir.join('metrics.csv'))
    run_command(Evaluate, hyp=hyp, system='reference', data=corpus_dir,
                split=None, normalized=None, out=out)

    report = MetricsReport.read_csv(out)
    assert len(report) == 1
    row = report.rows[0]
    assert row['system'] == 'reference'
    assert row['split'] == 'test'
    assert float(row['unit_bleu']) == pytest.approx(100.0)


def test_gen_data_is_deterministic(tmpdir):
    first = str(tmpdir.join('first'))
    second = str(tmpdir.join('second'))
    run_command(GenData, out=first)
    run_command(GenData, out=second)
    for a, b in zip(storage.read_split(first, 'train'),
                    storage.read_split(second, 'train')):
        assert a.uid == b.uid
        assert np.array_equal(a.target_units, b.target_units)
        assert np.array_equal(a.source_features, b.source_features)


@mock.patch('unitnorm.commands.normalize.normalize_dataset')
def test_normalize_options(m):
    m.return_value = {'train': 3}
    run_command(Normalize, vae='vae.dnck', diff='diff.dnck', t_start=None,
                step_size=2, data='data', out='norm')
    args, kwargs = m.call_args
    assert args[:4] == ('data', 'norm', 'vae.dnck', 'diff.dnck')
    assert args[4].timesteps == 20
    assert args[5] == 5
    assert kwargs['step_size'] == 2
    assert kwargs['workers'] == 1


@mock.patch('unitnorm.commands.normalize.normalize_dataset')
def test_normalize_accepts_t_start_zero(m):
    m.return_value = {'train': 3}
    with mock.patch('logging.config.dictConfig'):
        with pytest.raises(SystemExit) as e:
            unitnorm.main.main([
                '-s', 'tests.settings5', 'normalize', '--vae', 'vae.dnck',
                '--diff', 'diff.dnck', '--t-start', '0', '--data', 'data',
                '--out', 'norm'])
    assert e.value.code == 0
    args, _ = m.call_args
    assert args[5] == 0


def test_gradcheck_writes_csv(tmpdir):
    good = GradcheckResult('add', (2, 3), 1e-6, 6, True)
    out = str(tmpdir.join('gradcheck.csv'))
    with mock.patch('unitnorm.commands.gradcheck.run_cases',
                    return_value=[good]), \
            mock.patch('unitnorm.commands.gradcheck.run_model_cases',
                       return_value=[good._replace(name='vae_loss')]):
        run_command(Gradcheck, seeds=2, tolerance=1e-3, out=out)
    rows = read_rows(out)
    assert len(rows) == 4
    assert set(row['name'] for row in rows) == {'add', 'vae_loss'}
    assert rows[0]['shape'] == '2x3'
    assert len(set(row['seed'] for row in rows)) == 2


def test_gradcheck_fails_on_bad_gradient(tmpdir):
    bad = GradcheckResult('mul', (2,), 0.5, 2, False)
    with mock.patch('unitnorm.commands.gradcheck.run_cases',
                    return_value=[bad]), \
            mock.patch('unitnorm.commands.gradcheck.run_model_cases',
                       return_value=[]):
        with pytest.raises(CommandError) as e:
            run_command(Gradcheck, seeds=1, tolerance=1e-3,
                        out=str(tmpdir.join('gradcheck.csv')))
    assert 'mul' in str(e.value)


@mock.patch('unitnorm.commands.runrecipe.Recipe')
def test_run_recipe_copies_report(m, tmpdir):
    workdir = tmpdir.mkdir('work')
    workdir.join('report.csv').write('system\n')
    m.return_value.workdir = str(workdir)
    m.return_value.run.return_value = MetricsReport()
    out = str(tmpdir.join('copy.csv'))
    command = run_command(RunRecipe, workdir=str(workdir), out=out)
    m.assert_called_once_with(command.context, workdir=str(workdir))
    assert os.path.isfile(out)
