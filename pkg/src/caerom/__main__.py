import sys

from caerom.pipeline.cli import main

sys.exit(main())
