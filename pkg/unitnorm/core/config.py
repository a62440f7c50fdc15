"""
Module :module:`unitnorm.core.config` provides base class which
encapsulates experiment configuration.
"""

import collections
import hashlib
import json
import logging.config
import sys

from unitnorm.core.cmdlineparser import argument, non_negative_int
from unitnorm.core.context import Context
from unitnorm.core.exceptions import ImproperlyConfiguredError
from unitnorm.utils.imports import import_object

__all__ = ['Config', 'SCHEMA', 'argument', 'parse_value', 'fingerprint']

BASE_LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'default': {
            'format': '%(asctime)s %(name)s %(levelname)s %(message)s',
            'datefmt': '%Y-%m-%d %H:%M:%S',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'level': 'NOTSET',
            'formatter': 'default',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'INFO',
    },
}


def _section(*items):
    return collections.OrderedDict(
        (name, (kind, default)) for name, kind, default in items)


SCHEMA = collections.OrderedDict([
    ('experiment', _section(
        ('seed', 'int', 1),
        ('workdir', 'str', 'work'),
        ('workers', 'int', 1),
        ('log_interval', 'int', 100),
    )),
    ('corpus', _section(
        ('phonemes', 'int', 24),
        ('units', 'int', 64),
        ('feature_dim', 'int', 64),
        ('source_feature_dim', 'int', 48),
        ('train_utterances', 'int', 3000),
        ('valid_utterances', 'int', 300),
        ('test_utterances', 'int', 300),
        ('speakers', 'int', 8),
        ('min_duration', 'int', 1),
        ('max_duration', 'int', 4),
        ('min_source_duration', 'int', 4),
        ('max_source_duration', 'int', 8),
        ('min_phonemes', 'int', 12),
        ('max_phonemes', 'int', 24),
        ('speaker_sigma', 'float', 0.5),
        ('frame_sigma', 'float', 0.1),
        ('kmeans_iterations', 'int', 30),
    )),
    ('vae', _section(
        ('latent_dim', 'int', 16),
        ('channels', 'int', 64),
        ('stacks', 'int', 2),
        ('layers', 'int', 3),
        ('kernel_size', 'int', 3),
        ('model_dim', 'int', 128),
        ('heads', 'int', 4),
        ('refiner_layers', 'int', 2),
        ('ffn_dim', 'int', 256),
        ('dropout', 'float', 0.1),
        ('recon_weight', 'float', 100.0),
        ('nll_weight', 'float', 1.0),
        ('kl_weight', 'float', 0.001),
        ('logvar_min', 'float', -12.0),
        ('logvar_max', 'float', 6.0),
        ('steps', 'int', 2000),
        ('batch_size', 'int', 16),
        ('lr', 'float', 5e-4),
        ('clip_norm', 'float', 2.0),
        ('warmup_steps', 'int', 200),
    )),
    ('schedule', _section(
        ('kind', 'str', 'cosine'),
        ('timesteps', 'int', 200),
        ('offset', 'float', 0.008),
        ('max_beta', 'float', 0.999),
    )),
    ('diffusion', _section(
        ('model_dim', 'int', 128),
        ('stacks', 'int', 2),
        ('layers', 'int', 3),
        ('kernel_size', 'int', 3),
        ('heads', 'int', 4),
        ('transformer_layers', 'int', 3),
        ('ffn_dim', 'int', 256),
        ('dropout', 'float', 0.1),
        ('noise_weight', 'float', 1.0),
        ('recon_weight', 'float', 0.25),
        ('nll_weight', 'float', 0.005),
        ('clip_latent', 'float', 10.0),
        ('steps', 'int', 3000),
        ('batch_size', 'int', 16),
        ('lr', 'float', 5e-4),
        ('clip_norm', 'float', 2.0),
        ('warmup_steps', 'int', 300),
    )),
    ('normalize', _section(
        ('t_start', 'int', 100),
        ('step_size', 'int', 1),
        ('t_start_grid', 'ints', (10, 30, 50, 100, 120, 150)),
    )),
    ('cmlm', _section(
        ('model_dim', 'int', 128),
        ('heads', 'int', 4),
        ('encoder_layers', 'int', 3),
        ('decoder_layers', 'int', 3),
        ('ffn_dim', 'int', 256),
        ('dropout', 'float', 0.1),
        ('cg_dropout', 'float', 0.15),
        ('label_smoothing', 'float', 0.2),
        ('length_bucket', 'int', 4),
        ('max_length', 'int', 512),
        ('length_loss_weight', 'float', 0.1),
        ('stop_length_gradient', 'bool', False),
        ('steps', 'int', 3000),
        ('batch_size', 'int', 16),
        ('lr', 'float', 5e-4),
        ('clip_norm', 'float', 10.0),
        ('warmup_steps', 'int', 300),
    )),
    ('ar', _section(
        ('model_dim', 'int', 128),
        ('heads', 'int', 4),
        ('encoder_layers', 'int', 3),
        ('decoder_layers', 'int', 3),
        ('ffn_dim', 'int', 256),
        ('dropout', 'float', 0.1),
        ('label_smoothing', 'float', 0.1),
        ('max_length', 'int', 512),
        ('steps', 'int', 3000),
        ('batch_size', 'int', 16),
        ('lr', 'float', 5e-4),
        ('clip_norm', 'float', 10.0),
        ('warmup_steps', 'int', 300),
    )),
    ('decode', _section(
        ('iterations', 'int', 15),
        ('omega', 'float', 0.5),
        ('length_mode', 'str', 'predicted'),
        ('batch_size', 'int', 32),
        ('omega_grid', 'floats', (0.0, 0.5, 1.0, 2.0, 3.0)),
        ('guidance_iterations', 'ints', (5, 10, 15)),
        ('iteration_grid', 'ints', (3, 5, 7, 10, 15)),
    )),
    ('evaluation', _section(
        ('systems', 'strs', ('cmlm', 'cmlm_cg', 'cmlm_norm', 'cmlm_norm_cg')),
        ('split', 'str', 'test'),
        ('dedup', 'bool', False),
        ('select_t_start', 'bool', False),
        ('downstream_steps', 'int', 1000),
        ('benchmark_utterances', 'int', 50),
        ('ablations', 'bool', False),
        ('ablation_latent_dims', 'ints', (8, 16, 32)),
        ('ablation_t_starts', 'ints', (100, 150)),
    )),
])
"""
Sections of the experiment configuration. Every key maps to a pair of
value type and default value.
"""

CHOICES = {
    ('schedule', 'kind'): ('cosine', 'linear'),
    ('decode', 'length_mode'): ('predicted', 'oracle'),
    ('evaluation', 'split'): ('train', 'valid', 'test'),
}

TRUE_VALUES = ('1', 'yes', 'true', 'on')
FALSE_VALUES = ('0', 'no', 'false', 'off')


def _split_list(value):
    if isinstance(value, str):
        return [item.strip() for item in value.split(',') if item.strip()]
    return list(value)


def parse_value(kind, value):
    """
    Convert *value* (either string read from configuration file or
    Python value from settings module) into the type *kind*. Raise
    :exc:`ValueError` when conversion is not possible.
    """
    if kind == 'int':
        if isinstance(value, float) and not value.is_integer():
            raise ValueError("'%s' is not an integer" % value)
        return int(value)
    if kind == 'float':
        return float(value)
    if kind == 'bool':
        if isinstance(value, bool):
            return value
        if str(value).strip().lower() in TRUE_VALUES:
            return True
        if str(value).strip().lower() in FALSE_VALUES:
            return False
        raise ValueError("'%s' is not a boolean" % value)
    if kind == 'str':
        return str(value).strip()
    if kind == 'ints':
        return tuple(int(item) for item in _split_list(value))
    if kind == 'floats':
        return tuple(float(item) for item in _split_list(value))
    if kind == 'strs':
        return tuple(str(item) for item in _split_list(value))
    raise ValueError("Unknown value type '%s'" % kind)


def fingerprint(document):
    """
    Return first 16 hexadecimal characters of SHA-256 hash of canonical
    JSON form of *document*.
    """
    canonical = json.dumps(document, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:16]


class Config(object):
    """
    Class which encapsulates configuration. It joins schema defaults,
    **EXPERIMENT** dictionary from the settings module and command line
    arguments. *settings* is a Python's module defined by either
    **UNITNORM_SETTINGS_MODULE** environment variable or **-s/--settings**
    command line argument and *args_parser* is a
    :class:`argparse.Namespace` instance.

    Every section is available as an immutable namedtuple, e.g.
    ``config.vae.latent_dim``.
    """

    arguments = (
        argument(
            '--seed',
            dest='seed', action='store', type=non_negative_int, default=None,
            help='override [experiment] seed'
        ),
    )
    """
    Command line arguments of the Config class.
    """

    def __init__(self, settings, args_parser):
        self._settings = settings
        self._args_parser = args_parser
        self._cached_values = {}
        self.initialize()

    def __repr__(self):
        return "<{}.{}: {:#x}>".format(
            self.__class__.__module__, self.__class__.__name__, id(self)
        )

    def initialize(self):
        """
        Initialize instance attributes. You can override this method in
        the subclasses.
        """
        pass

    def configure_logging(self):
        """
        Configure Python's logging according to configuration *config*.
        """
        logging.config.dictConfig(self.logging or BASE_LOGGING)

    def get_config_items(self):
        """
        Return current configuration as a :class:`tuple` with
        option-value pairs.

        ::
            (('option1', value1), ('option2', value2))
        """
        return (
            ('settings', self.settings),
            ('context_class', self.context_class),
            ('logging', self.logging),
            ('name', self.name),
            ('fingerprint', self.fingerprint()),
        ) + tuple((name, self.get_section(name)) for name in SCHEMA)

    def get_raw_values(self):
        """
        Return :class:`dict` ``{section: {key: value}}`` of values which
        override the schema defaults. Base class reads **EXPERIMENT**
        dictionary of the settings module, subclasses add other sources.
        """
        experiment = getattr(self.settings, 'EXPERIMENT', None) or {}
        return dict(
            (section, dict(values)) for section, values in experiment.items())

    def _build_sections(self):
        raw = self.get_raw_values()
        for section, values in raw.items():
            if section not in SCHEMA:
                raise ImproperlyConfiguredError(
                    "Unknown configuration section '%s'" % section)
            for key in values:
                if key not in SCHEMA[section]:
                    raise ImproperlyConfiguredError(
                        "Unknown option '%s' in section '%s'" % (key, section))
        sections = collections.OrderedDict()
        for section, keys in SCHEMA.items():
            values = collections.OrderedDict()
            for key, (kind, default) in keys.items():
                value = raw.get(section, {}).get(key, default)
                try:
                    values[key] = parse_value(kind, value)
                except (TypeError, ValueError) as e:
                    raise ImproperlyConfiguredError(
                        "Invalid value of '%s' in section '%s': %s"
                        % (key, section, e))
                choices = CHOICES.get((section, key))
                if choices and values[key] not in choices:
                    raise ImproperlyConfiguredError(
                        "Option '%s' in section '%s' must be one of %s"
                        % (key, section, ', '.join(choices)))
            sections[section] = values
        seed = getattr(self.args_parser, 'seed', None)
        if seed is not None:
            sections['experiment']['seed'] = seed
        if sections['experiment']['seed'] < 0:
            raise ImproperlyConfiguredError("Seed must be >= 0")
        return sections

    @property
    def sections(self):
        """
        Typed configuration document ``{section: {key: value}}``.
        """
        if 'sections' not in self._cached_values:
            self._cached_values['sections'] = self._build_sections()
        return self._cached_values['sections']

    def get_section(self, name):
        """
        Return section *name* as an immutable namedtuple.
        """
        key = 'section_%s' % name
        if key not in self._cached_values:
            values = self.sections[name]
            cls = collections.namedtuple(
                '%sSection' % name.capitalize(), list(values))
            self._cached_values[key] = cls(**values)
        return self._cached_values[key]

    def as_dict(self, *names):
        """
        Return typed document of sections *names* (all when empty) with
        lists converted for JSON serialization.
        """
        names = names or tuple(SCHEMA)
        return dict(
            (name, dict((key, list(value) if isinstance(value, tuple)
                         else value)
                        for key, value in self.sections[name].items()))
            for name in names)

    def fingerprint(self, *names):
        """
        Fingerprint of sections *names* (whole configuration when empty).
        """
        return fingerprint(self.as_dict(*names))

    @property
    def settings(self):
        """
        Settings module of the application.
        """
        return self._settings

    @property
    def args_parser(self):
        """
        Command line arguments as a **argparse**.
        """
        return self._args_parser

    @property
    def context_class(self):
        """
        Context as a :class:`unitnorm.core.context.Context` class or
        subclass.
        """
        if 'context_class' not in self._cached_values:
            context_cls_name = getattr(self.settings, 'CONTEXT_CLASS', '')
            if context_cls_name:
                context_class = import_object(context_cls_name)
            else:
                context_class = Context
            self._cached_values['context_class'] = context_class
        return self._cached_values['context_class']

    @property
    def logging(self):
        """
        *Python's logging* configuration or :const:`None`.
        """
        return getattr(self.settings, 'LOGGING', None)

    @property
    def init_handler(self):
        """
        Either :const:`None` or name of the function (or :class:`list`
        of names) which is called with the context before the command.
        """
        return getattr(self.settings, 'INIT_HANDLER', None)

    @property
    def command_name(self):
        """
        Name of the current management command.
        """
        return self._args_parser.action

    @property
    def name(self):
        """
        Experiment name. It's used as a process name.
        """
        return getattr(self.settings, 'NAME', sys.argv[0])

    @property
    def experiment(self):
        return self.get_section('experiment')

    @property
    def corpus(self):
        return self.get_section('corpus')

    @property
    def vae(self):
        return self.get_section('vae')

    @property
    def schedule(self):
        return self.get_section('schedule')

    @property
    def diffusion(self):
        return self.get_section('diffusion')

    @property
    def normalize(self):
        return self.get_section('normalize')

    @property
    def cmlm(self):
        return self.get_section('cmlm')

    @property
    def ar(self):
        return self.get_section('ar')

    @property
    def decode(self):
        return self.get_section('decode')

    @property
    def evaluation(self):
        return self.get_section('evaluation')


def make_section(name, **overrides):
    """
    Return section *name* with schema defaults and *overrides*, without
    a settings module. Used by the library API and tests.
    """
    keys = SCHEMA[name]
    unknown = set(overrides) - set(keys)
    if unknown:
        raise ImproperlyConfiguredError(
            "Unknown option(s) %s in section '%s'"
            % (', '.join(sorted(unknown)), name))
    values = collections.OrderedDict(
        (key, parse_value(kind, overrides.get(key, default)))
        for key, (kind, default) in keys.items())
    cls = collections.namedtuple('%sSection' % name.capitalize(), list(values))
    return cls(**values)
