from django.conf import settings
from django.core.management.base import CommandError

from certification.monitors import MONITOR_IDS
from certification.services import write_report
from flight.controller import RunMode
from flight.management.base import EXIT_AUDIT, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, ScenarioCommand
from flight.services import SimulationService


class Command(ScenarioCommand):
    help = 'Run a scenario with every monitor on and report the minimum slack of each bound'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--out', required=True, help='Slack report path')
        parser.add_argument('--record', action='store_true', help='Store the run in the registry')

    def handle(self, *args, **options):
        scenario = self.load(options['config'])
        if scenario.sim.run_mode != RunMode.ORACLE:
            raise CommandError(
                f"{scenario.path} [sim.run_mode]: lemma audit needs the oracle run mode",
                returncode=EXIT_CONFIG,
            )
        if not scenario.trajectory.smooth:
            raise CommandError(
                f"{scenario.path} [trajectory.kind]: lemma audit needs a smooth reference",
                returncode=EXIT_CONFIG,
            )

        service = SimulationService()
        result = self.guarded(service.run, scenario, None, force_monitors=True)
        monitor = result.monitor
        float_format = settings.WORKBENCH_FLOAT_FORMAT

        slacks = monitor.min_slacks()
        failed = monitor.failed()
        lines = [f"scenario = {scenario.name}", f"steps = {result.summary.steps}"]
        report = result.certificate.report
        verdict = "pass" if report.passed else f"FAIL ({', '.join(report.failing)})"
        lines.append(f"certificate = {verdict}")
        for monitor_id in MONITOR_IDS:
            if monitor_id in slacks:
                verdict = 'FAIL' if monitor_id in failed else 'ok'
                lines.append(f"{monitor_id} = {float_format % slacks[monitor_id]}  # {verdict}")
            else:
                lines.append(f"{monitor_id} = not_evaluated")
        lines.append(f"omega_c_sup = {float_format % result.summary.omega_c_sup}")
        lines.append(f"omega_c_bound_source = {report.omega_c_source}")
        self.emit(lines)
        self.guarded(write_report, lines, options['out'])

        if result.aborted:
            exit_code = EXIT_NUMERICAL
        elif failed:
            exit_code = EXIT_AUDIT
        else:
            exit_code = EXIT_OK
        if options['record']:
            service.record(scenario, result, 'LEMMA_AUDIT', exit_code, options['out'])

        if exit_code == EXIT_NUMERICAL:
            raise CommandError(f"Run aborted: {result.error}", returncode=exit_code)
        if exit_code == EXIT_AUDIT:
            raise CommandError(f"Negative slack: {', '.join(failed)}", returncode=exit_code)
        self.stdout.write(self.style.SUCCESS("All audited bounds hold"))
