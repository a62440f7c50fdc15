"""
Module :module:`unitnorm.contrib.config.iniconfig` provides **INI files**
experiment configuration.
"""

import configparser
import glob
import logging.config
import os.path

from gettext import gettext as _

from unitnorm.core.config import SCHEMA, Config, argument
from unitnorm.core.exceptions import ImproperlyConfiguredError

__all__ = ['IniConfig']

logger = logging.getLogger(__name__)

CONFIGPARSER_EXC = (
    configparser.NoSectionError,
    configparser.NoOptionError,
)

LOGGING_SECTIONS = ('loggers', 'handlers', 'formatters')
LOGGING_PREFIXES = ('logger_', 'handler_', 'formatter_')
APPLICATION_SECTION = 'application'


def get_conf_d_files(path):
    """
    Return alphabetical ordered :class:`list` of the *.conf* files
    placed in the path. *path* is a directory path.

    ::

        >>> get_conf_d_files('conf/unitnorm.conf.d/')
        ['conf/unitnorm.conf.d/10-corpus.conf',
         'conf/unitnorm.conf.d/99-quick.conf']
    """
    if not os.path.isdir(path):
        raise ValueError("'%s' is not a directory" % path)
    files_mask = os.path.join(path, "*.conf")
    return [f for f in sorted(glob.glob(files_mask)) if os.path.isfile(f)]


def get_conf_files(filename):
    """
    Return :class:`list` of the all configuration files. *filename* is a
    path of the main configuration file.

    ::

        >>> get_conf_files('unitnorm.conf')
        ['unitnorm.conf', 'unitnorm.conf.d/10-corpus.conf']
    """
    if not os.path.isfile(filename):
        raise ValueError("'%s' is not a file" % filename)
    conf_d_path = "%s.d" % filename
    if not os.path.exists(conf_d_path):
        return [filename]
    return [filename] + get_conf_d_files(conf_d_path)


def get_configparser(filename=''):
    """
    Read main configuration file and all files from *conf.d* subdirectory
    and return parsed configuration as a **configparser.RawConfigParser**
    instance. When neither *filename* nor **UNITNORM_CONFIG_FILENAME**
    environment variable is set, return empty parser, all options then
    keep their default values.
    """
    filename = filename or os.environ.get('UNITNORM_CONFIG_FILENAME', '')
    parser = configparser.RawConfigParser()
    if not filename:
        logger.info("Configuration file is not defined, using defaults")
        return parser
    for conf_file in get_conf_files(filename):
        logger.info("Found config '%s'", conf_file)
        if not parser.read(conf_file):
            logger.warning("Error while parsing config '%s'", conf_file)
    return parser


def is_logging_section(name):
    """
    :const:`True` when section *name* belongs to the
    :func:`logging.config.fileConfig` format.
    """
    return name in LOGGING_SECTIONS or name.startswith(LOGGING_PREFIXES)


class IniConfig(Config):
    """
    Class which extends base :class:`unitnorm.core.config.Config`.
    Provides configuration from **INI** files. Configuration file is
    specified either by 'UNITNORM_CONFIG_FILENAME' environment variable
    or '-c/--config' command line argument.

    First, main configuration file is read. Then all configuration files
    from `file.conf.d` subdirectory are read in alphabetical order. E.g.
    if `-c conf/unitnorm.conf` is handled, first `conf/unitnorm.conf` file
    is read and then all `conf/unitnorm.conf.d/*.conf` files. Value in
    later configuration file overrides previous defined value. Values
    from the file override **EXPERIMENT** dictionary of the settings.

    ::

        [experiment]
        seed = 3
        workdir = /tmp/unitnorm

        [normalize]
        t_start_grid = 30, 100
    """

    arguments = (
        argument(
            '-c', '--config',
            dest='config', action='store', type=str, default=None,
            help=_('configuration file')
        ),
    ) + Config.arguments

    def __init__(self, settings, args_parser):
        try:
            self._config_parser = get_configparser(
                getattr(args_parser, 'config', None))
        except (ValueError, configparser.Error) as e:
            raise ImproperlyConfiguredError(str(e))
        super(IniConfig, self).__init__(settings, args_parser)

    def configure_logging(self):
        """
        Configure Python's logging according to configuration placed in
        configuration file. Without logging sections in the file fall
        back to the settings.
        """
        if self.config_parser.has_section('loggers'):
            logging.config.fileConfig(
                self.config_parser, disable_existing_loggers=False)
        else:
            super(IniConfig, self).configure_logging()

    def get_raw_values(self):
        raw = super(IniConfig, self).get_raw_values()
        defaults = set(self.config_parser.defaults())
        for section in self.config_parser.sections():
            if section == APPLICATION_SECTION or is_logging_section(section):
                continue
            if section not in SCHEMA:
                raise ImproperlyConfiguredError(
                    "Unknown configuration section '%s'" % section)
            values = raw.setdefault(section, {})
            for key, value in self.config_parser.items(section, raw=True):
                if key not in defaults:
                    values[key] = value
        return raw

    @property
    def config_parser(self):
        """
        Parsed configuration file as a **configparser.RawConfigParser**
        instance.
        """
        return self._config_parser

    @property
    def name(self):
        """
        Experiment name. It's used as a process name.
        """
        try:
            return self.config_parser.get(APPLICATION_SECTION, 'name')
        except CONFIGPARSER_EXC:
            return super(IniConfig, self).name
