from workflowrecognition.datasets.external import *
from workflowrecognition.datasets.generate import *
