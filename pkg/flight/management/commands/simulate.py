from django.core.management.base import CommandError

from flight.management.base import (
    EXIT_MONITOR,
    EXIT_NUMERICAL,
    EXIT_OK,
    ScenarioCommand,
)
from flight.services import SimulationService


class Command(ScenarioCommand):
    help = 'Run a closed-loop simulation and write per-step telemetry CSV'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--out', required=True, help='Telemetry CSV path')
        parser.add_argument('--record', action='store_true', help='Store the run in the registry')

    def handle(self, *args, **options):
        scenario = self.load(options['config'])
        service = SimulationService()
        result = self.guarded(service.run, scenario, options['out'])

        certificate = result.certificate
        if certificate is not None and not certificate.report.passed:
            self.stderr.write(
                self.style.WARNING(f"Certificate failed: {', '.join(certificate.report.failing)}")
            )
        self.emit(result.summary.lines())

        if result.aborted:
            exit_code = EXIT_NUMERICAL
        elif result.summary.monitors_enabled and result.summary.violations:
            exit_code = EXIT_MONITOR
        else:
            exit_code = EXIT_OK

        if options['record']:
            service.record(scenario, result, 'SIMULATE', exit_code, options['out'])

        if exit_code == EXIT_NUMERICAL:
            raise CommandError(f"Run aborted: {result.error}", returncode=exit_code)
        if exit_code == EXIT_MONITOR:
            raise CommandError(
                f"{result.summary.violations} monitor violations", returncode=exit_code
            )
        self.stdout.write(self.style.SUCCESS(f"Telemetry written to {options['out']}"))
