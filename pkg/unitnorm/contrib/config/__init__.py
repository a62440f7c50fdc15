"""
Extended classes which encapsulates configuration.
"""

from unitnorm.contrib.config.iniconfig import IniConfig

__all__ = ['IniConfig']
