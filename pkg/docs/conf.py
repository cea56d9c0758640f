# -*- coding: utf-8 -*-
#
# Workflow Recognition documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.

import sys
import os
from unittest import mock

# If extensions (or modules to document with autodoc) are in another directory,
# add these directories to sys.path here.
sys.path.insert(0, os.path.abspath('..'))

# Read the docs builds without the numerical stack.
MOCK_MODULES = [
    'numpy',
    'scipy',
    'scipy.special',
    'pandas',
    'sklearn',
    'sklearn.metrics',
    'yaml',
]

for mod_name in MOCK_MODULES:
    if mod_name not in sys.modules:
        sys.modules[mod_name] = mock.Mock()

import workflowrecognition

# -- General configuration ------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.doctest',
    'sphinx.ext.napoleon',
]

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'Workflow Recognition'
copyright = u'2026, the workflowrecognition developers'
author = u'the workflowrecognition developers'

# The short X.Y version and the full version.
version = workflowrecognition.__version__.split('+')[0]
release = workflowrecognition.__version__.split('+')[0]

language = None
exclude_patterns = ['_build']
add_module_names = False
pygments_style = 'sphinx'
todo_include_todos = False

# -- Options for HTML output ----------------------------------------------

html_theme = 'sphinx_rtd_theme'
html_static_path = []
html_domain_indices = False
htmlhelp_basename = 'WorkflowRecognitiondoc'

# -- Options for LaTeX output ---------------------------------------------

latex_elements = {
}

latex_documents = [
  (master_doc, 'WorkflowRecognition.tex',
   u'Workflow Recognition Documentation', author, 'manual'),
]
latex_domain_indices = False

# -- Options for manual page output ---------------------------------------

man_pages = [
    (master_doc, 'workflowrecognition',
     u'Workflow Recognition Documentation', [author], 1)
]

# -- Autodoc and napoleon -------------------------------------------------

autodoc_member_order = 'bysource'

napoleon_google_docstring = False
napoleon_numpy_docstring = True
napoleon_include_private_with_doc = False
napoleon_include_special_with_doc = False
napoleon_use_admonition_for_examples = False
napoleon_use_admonition_for_notes = True
napoleon_use_admonition_for_references = True
napoleon_use_ivar = False
napoleon_use_param = True
napoleon_use_rtype = False
