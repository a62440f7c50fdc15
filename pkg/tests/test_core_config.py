import importlib

import mock
import pytest

from unitnorm.core.cmdlineparser import ArgumentParser
from unitnorm.core.config import (
    BASE_LOGGING, SCHEMA, Config, fingerprint, make_section, parse_value)
from unitnorm.core.context import Context
from unitnorm.core.exceptions import ImproperlyConfiguredError


class ContextTest(Context):
    pass


def make_config(settings='tests.settings1', **args):
    parser = ArgumentParser()
    parser.add_argument('--seed', dest='seed', type=int, default=None)
    namespace = parser.parse_args(
        ['--seed', str(args['seed'])] if 'seed' in args else [])
    return Config(importlib.import_module(settings), namespace)


def test_config_cls():
    config = Config(1, 2)
    assert "<unitnorm.core.config.Config: 0x" in repr(config)
    assert config.settings == 1
    assert config.args_parser == 2


def test_config_context_class_default():
    config = make_config('tests.settings1')
    assert config.context_class is Context


def test_config_context_class_user():
    config = make_config('tests.settings2')
    assert config.context_class is not Context
    assert config.context_class is ContextTest


def test_config_sections_from_settings():
    config = make_config('tests.settings1')

    assert config.name == 'test-unitnorm-experiment'
    assert config.experiment.seed == 7
    assert config.experiment.workdir == '/tmp/unitnorm-test'
    assert config.corpus.units == 32
    assert config.corpus.train_utterances == 40
    assert config.normalize.t_start_grid == (50, 100)
    assert config.decode.omega_grid == (0.0, 1.5)
    assert config.evaluation.dedup is True
    # defaults
    assert config.schedule.timesteps == 200
    assert config.schedule.offset == 0.008
    assert config.cmlm.cg_dropout == 0.15
    assert config.evaluation.systems == (
        'cmlm', 'cmlm_cg', 'cmlm_norm', 'cmlm_norm_cg')


def test_config_sections_are_immutable():
    config = make_config('tests.settings1')
    with pytest.raises(AttributeError):
        config.vae.latent_dim = 8


def test_config_seed_argument():
    assert make_config('tests.settings1', seed=3).experiment.seed == 3


def test_config_fail_when_negative_seed():
    config = make_config('tests.settings3', seed=-1)
    with pytest.raises(ImproperlyConfiguredError) as e:
        _ = config.experiment
    assert "Seed must be >= 0" in str(e.value)


def test_config_fail_when_invalid_value():
    config = make_config('tests.settings2')
    with pytest.raises(ImproperlyConfiguredError) as e:
        _ = config.vae
    assert "'latent_dim' in section 'vae'" in str(e.value)


def test_config_fail_when_invalid_choice():
    config = make_config('tests.settings4')
    with pytest.raises(ImproperlyConfiguredError) as e:
        _ = config.decode
    assert "must be one of predicted, oracle" in str(e.value)


@pytest.mark.parametrize('experiment, message', [
    ({'vocoder': {}}, "Unknown configuration section 'vocoder'"),
    ({'diffusion': {'unknown_option': 1}},
     "Unknown option 'unknown_option' in section 'diffusion'"),
])
def test_config_fail_when_unknown_names(experiment, message):
    settings = mock.Mock(spec=['EXPERIMENT'], EXPERIMENT=experiment)
    config = Config(settings, mock.Mock(seed=None))
    with pytest.raises(ImproperlyConfiguredError) as e:
        _ = config.sections
    assert message in str(e.value)


def test_config_get_config_items():
    config = make_config('tests.settings1')
    items = dict(config.get_config_items())
    assert items['name'] == 'test-unitnorm-experiment'
    assert items['fingerprint'] == config.fingerprint()
    assert items['corpus'].units == 32
    assert set(SCHEMA) < set(items)


def test_config_default_logging():
    config = make_config('tests.settings1')
    with mock.patch('logging.config.dictConfig') as m:
        config.configure_logging()
    m.assert_called_once_with(BASE_LOGGING)


def test_config_init_handler():
    config = make_config('tests.settings1')
    assert config.init_handler == 'tests.test_core_commands.init_handler'
    assert make_config('tests.settings3').init_handler is None


def test_config_as_dict_is_json_ready():
    config = make_config('tests.settings1')
    document = config.as_dict('normalize')
    assert document == {'normalize': {
        't_start': 100, 'step_size': 1, 't_start_grid': [50, 100]}}


def test_config_fingerprint_depends_on_sections():
    first = make_config('tests.settings1')
    second = make_config('tests.settings3')
    assert len(first.fingerprint()) == 16
    assert first.fingerprint('vae') == second.fingerprint('vae')
    assert first.fingerprint('corpus') != second.fingerprint('corpus')
    assert first.fingerprint() != second.fingerprint()


def test_fingerprint_ignores_key_order():
    assert fingerprint({'a': 1, 'b': [1, 2]}) == \
        fingerprint({'b': [1, 2], 'a': 1})
    assert fingerprint({'a': 1}) != fingerprint({'a': 2})


@pytest.mark.parametrize('kind, value, expected', [
    ('int', '12', 12),
    ('int', 3.0, 3),
    ('float', '0.5', 0.5),
    ('bool', 'off', False),
    ('bool', 'Yes', True),
    ('str', ' cosine ', 'cosine'),
    ('ints', '10, 30,50', (10, 30, 50)),
    ('floats', (0, 1.5), (0.0, 1.5)),
    ('strs', 'cmlm,ar', ('cmlm', 'ar')),
])
def test_parse_value(kind, value, expected):
    assert parse_value(kind, value) == expected


@pytest.mark.parametrize('kind, value', [
    ('int', 2.5),
    ('int', 'ten'),
    ('bool', 'maybe'),
    ('complex', '1'),
])
def test_parse_value_fail(kind, value):
    with pytest.raises(ValueError):
        parse_value(kind, value)


def test_make_section():
    section = make_section('decode', iterations=5, omega='1.5')
    assert section.iterations == 5
    assert section.omega == 1.5
    assert section.length_mode == 'predicted'


def test_make_section_fail_when_unknown_option():
    with pytest.raises(ImproperlyConfiguredError) as e:
        make_section('decode', beam=4)
    assert "beam" in str(e.value)
