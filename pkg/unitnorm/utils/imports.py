"""
Module :module:`unitnorm.utils.imports` resolves dotted paths written in
settings modules: management commands, config, context and init handler.
"""

import importlib

__all__ = ['import_object']


def import_object(name):
    """
    Import module and return object from it. *name* is :class:`str` in
    format ``module.path.ObjectName``. Raise :exc:`ValueError` when
    *name* has no module part, :exc:`ImportError` when the module does
    not exist or lacks the object.

    ::
        >>> import_object('unitnorm.commands.gendata.GenData')
        <class 'unitnorm.commands.gendata.GenData'>
    """
    module_name, dummy_dot, obj_name = name.rpartition('.')
    if not module_name or not obj_name:
        raise ValueError("Invalid name '%s'" % name)
    module = importlib.import_module(module_name)
    try:
        return getattr(module, obj_name)
    except AttributeError:
        raise ImportError("Module '%s' has no object '%s'"
                          % (module_name, obj_name))
