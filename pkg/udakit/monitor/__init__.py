from .skeleton import Monitor
from .runlog import COLUMNS, RunLog
