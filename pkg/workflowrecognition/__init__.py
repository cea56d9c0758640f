# pylint: disable=wildcard-import,g-bad-import-order,g-import-not-at-top

from workflowrecognition.base import *
from workflowrecognition.models import *
from workflowrecognition.training import *
from workflowrecognition.measures import *
from workflowrecognition.evaluation import *
from workflowrecognition.splitting import *
from workflowrecognition.fileio import *

from workflowrecognition import wr_logging as logging

from workflowrecognition._version import get_versions
__version__ = get_versions()['version']
del get_versions

__all__ = ['datasets']
