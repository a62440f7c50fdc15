"""
Default settings module of the ``unitnorm-admin`` command. Experiment
options are read from INI file ``-c/--config`` (or the file named by
**UNITNORM_CONFIG_FILENAME**), missing options keep their defaults.
"""

NAME = 'unitnorm'

CONFIG_CLASS = 'unitnorm.contrib.config.IniConfig'
