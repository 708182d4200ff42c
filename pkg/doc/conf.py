#!/usr/bin/env python
# -*- coding: utf-8 -*-

## Copyright (C) 2026 The asyncran developers
##
## Copying and distribution of this file, with or without modification,
## are permitted in any medium without royalty provided the copyright
## notice and this notice are preserved.  This file is offered as-is,
## without any warranty.

import datetime
import sys


sys.path.insert(0, "..")


# This should be read from setup.py.
author = "The asyncran developers"
project = "asyncran"

copyright = "%s, %s" % (datetime.datetime.now().year, author)

master_doc = "index"
nitpicky = True


extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.napoleon",
    "sphinx.ext.todo",
    "sphinx.ext.viewcode",
]

# The solver is not needed to read the docstrings.
autodoc_mock_imports = ["cvxpy"]

# Configuration for sphinx.ext.todo
todo_include_todos = True

# Configuration for sphinx.ext.napoleon
napoleon_google_docstring = True
napoleon_include_private_with_doc = True
napoleon_include_special_with_doc = True


#
# Options for HTML output
#

html_theme = "agogo"
html_title = "asyncran documentation"
html_short_title = "import asyncran"
html_show_copyright = False
html_show_sphinx = False
html_copy_source = False
html_show_sourcelink = False
