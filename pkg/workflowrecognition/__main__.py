import sys

from workflowrecognition.cli import main

sys.exit(main())
