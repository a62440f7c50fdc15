# -*- coding: utf-8 -*-
#
# Configuration file for the Sphinx documentation builder.

import os
import sys

sys.path.insert(0, os.path.abspath('..'))

from unitnorm import __version__ as UNITNORM_VERSION  # noqa: E402

# -- Project information -----------------------------------------------------

project = 'unitnorm'
author = 'unitnorm developers'
version = '.'.join(UNITNORM_VERSION.split('.')[:2])
release = UNITNORM_VERSION

# -- General configuration ---------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.viewcode',
]
templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'
language = 'en'
exclude_patterns = ['_build']
pygments_style = 'sphinx'

# -- Options for HTML output -------------------------------------------------

html_theme = 'alabaster'
htmlhelp_basename = 'unitnormdoc'

# -- Options for manual page output ------------------------------------------

man_pages = [
    (master_doc, 'unitnorm', 'unitnorm Documentation', [author], 1)
]
