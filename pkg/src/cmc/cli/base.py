import logging
from dataclasses import dataclass


from cmc.config import Settings
from cmc.term import Console

logger = logging.getLogger("cmc.cli")

EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


@dataclass
class CLIContext:
    """Context shared by the cmc commands."""

    console: Console
    settings: Settings
