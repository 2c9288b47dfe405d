import sys

from stratsched.cli import main

sys.exit(main())
