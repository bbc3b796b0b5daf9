import sys

from rsp_lab.cli import main

sys.exit(main())
