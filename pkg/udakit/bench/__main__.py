import sys
from udakit.bench.cli import main


sys.exit(main())
