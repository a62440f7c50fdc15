"""
Module :module:`unitnorm.core.constants` contains constants shared by
the commands, the recipe and the worker processes.
"""

__all__ = [
    'NORMALIZE_WORKER', 'SPLITS', 'SYSTEMS', 'CHECKPOINT_SUFFIX',
]

NORMALIZE_WORKER = 'normalize_worker'
"""
Indicates that type of the process is a corpus normalization worker.
*kwargs* argument in method :meth:`unitnorm.core.context.initialize_child`
contains *process*, which holds instance of the worker.
"""

SPLITS = ('train', 'valid', 'test')
"""
Corpus splits, in the order they are generated.
"""

SYSTEMS = ('cmlm', 'cmlm_cg', 'cmlm_norm', 'cmlm_norm_cg')
"""
Speech-to-unit systems compared by the recipe: vanilla CMLM, CMLM
regularized by source dropout, CMLM trained on normalized units and
both combined.
"""

CHECKPOINT_SUFFIX = '.dnck'
