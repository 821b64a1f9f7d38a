from django.core.management.base import CommandError

from certification.services import CertificationService, report_lines, write_report
from flight.management.base import EXIT_CERTIFICATE, ScenarioCommand


class Command(ScenarioCommand):
    help = 'Evaluate the gain conditions of a scenario and print its certificate'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--out', help='Also write the report to this file')
        parser.add_argument('--record', action='store_true', help='Store the certificate')

    def handle(self, *args, **options):
        scenario = self.load(options['config'])
        service = CertificationService()
        certificate = self.guarded(service.certify, scenario)
        report = certificate.report

        lines = report_lines(report)
        self.emit(lines)
        if options['out']:
            self.guarded(write_report, lines, options['out'])
        if options['record']:
            service.record(scenario, report)

        if not report.passed:
            raise CommandError(
                f"Gain conditions failed: {', '.join(report.failing)}", returncode=EXIT_CERTIFICATE
            )
        self.stdout.write(self.style.SUCCESS(f"All gain conditions hold for {scenario.name}"))
