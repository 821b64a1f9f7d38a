from django.core.management.base import BaseCommand, CommandError

from flight.management.base import EXIT_CONFIG
from flight.telemetry import write_thrust_sweep


class Command(BaseCommand):
    help = 'Write f/|f_d| of each thrust strategy against the thrust-axis angle'

    def add_arguments(self, parser):
        parser.add_argument('--out', required=True, help='Sweep CSV path')

    def handle(self, *args, **options):
        try:
            rows = write_thrust_sweep(options['out'])
        except OSError as exc:
            raise CommandError(f"I/O error: {exc}", returncode=EXIT_CONFIG)
        self.stdout.write(self.style.SUCCESS(f"Wrote {rows} rows to {options['out']}"))
