"""
Shared plumbing for the workbench management commands: exit codes and
scenario loading with errors mapped to CommandError.
"""

import logging

from django.core.management.base import BaseCommand, CommandError

from flight.scenario import ConfigError, ScenarioConfig, load_scenario
from flight.services import ABORT_ERRORS

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_MONITOR = 3
EXIT_CERTIFICATE = 4
EXIT_AUDIT = 5


class ScenarioCommand(BaseCommand):
    """Base for commands driven by a scenario file."""

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help='Scenario TOML file')

    def load(self, path) -> ScenarioConfig:
        try:
            return load_scenario(path)
        except ConfigError as exc:
            raise CommandError(str(exc), returncode=EXIT_CONFIG)

    def guarded(self, func, *args, **kwargs):
        """Call func, mapping configuration, I/O and numerical errors to exit codes."""
        try:
            return func(*args, **kwargs)
        except ConfigError as exc:
            raise CommandError(str(exc), returncode=EXIT_CONFIG)
        except OSError as exc:
            raise CommandError(f"I/O error: {exc}", returncode=EXIT_CONFIG)
        except ABORT_ERRORS as exc:
            raise CommandError(f"Numerical abort: {exc}", returncode=EXIT_NUMERICAL)

    def emit(self, lines):
        for line in lines:
            self.stdout.write(line)
