"""
Module :module:`unitnorm.core.context` provides base class which
encapsulates data shared by management commands and worker processes.
"""

import os

__all__ = ['Context']


class Context(object):
    """
    Class which encapsulates data (configuration, working directory,
    loaded checkpoints...) for management commands and workers.

    .. warning::

       Instance is created in the parent process and it is pickled into
       the workers. Do not load large resources in constructor, it is
       necessary initialize them lazy!
    """

    def __init__(self, config):
        self._config = config
        self._cache = {}
        self.initialize()

    @classmethod
    def from_config(cls, config):
        """
        According to experiment configuration *config* create and return
        new instance of the **Context**.
        """
        return cls(config)

    def initialize(self):
        """
        Initialize instance attributes. This method is called when instance
        is initialized. You can override this method in the subclasses.
        """
        pass

    def initialize_child(self, process_type, **kwargs):
        """
        Initialize instance attributes, it is similar to :meth:`initialize`.
        However, method is called only in the worker processes before the
        first task is processed. *process_type* indicates type of the
        process, e.g. :data:`unitnorm.core.constants.NORMALIZE_WORKER`.
        *kwargs* contains additional data according to *process_type*.
        You can override this method in the subclasses.
        """
        pass

    def __getstate__(self):
        state = self.__dict__.copy()
        state['_cache'] = {}
        return state

    @property
    def config(self):
        """
        Experiment configuration.
        """
        return self._config

    @property
    def workdir(self):
        """
        Absolute path of the experiment working directory.
        """
        return os.path.abspath(self.config.experiment.workdir)

    def cached(self, key, factory):
        """
        Return value stored under *key*, call *factory* to create it
        when it is missing. Cache is not shared with the workers.
        """
        if key not in self._cache:
            self._cache[key] = factory()
        return self._cache[key]
