import sys

from pycoefid.main import main

sys.exit(main())
