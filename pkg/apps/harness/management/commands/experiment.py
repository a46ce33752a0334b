import json
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from apps.harness.registry import build_config, registered
from apps.harness.report import emit_report
from apps.harness.runner import output_directory, run_experiment

from ._options import CONFIG_ERROR, VERDICT_FAILED, exits_on_analysis_error, write_json


class Command(BaseCommand):
    help = "Run a registered experiment from a JSON config (experiment run NAME) or list them (experiment list)."

    def add_arguments(self, parser):
        actions = parser.add_subparsers(dest="action", required=True)
        run = actions.add_parser("run", help="run one experiment and write its report")
        run.add_argument("name")
        run.add_argument("--config", help="JSON config document; omitted keys take the defaults")
        run.add_argument("--out", help="output directory (default: the config's output_dir, "
                                       "else ANALYSIS['OUTPUT_DIR']/<name>)")
        run.add_argument("--format", choices=["json", "csv"], action="append", default=None)
        actions.add_parser("list", help="names, summaries and default configs")

    @exits_on_analysis_error
    def handle(self, *args, **options):
        if options["action"] == "list":
            write_json(self.stdout, [e.as_dict() for e in registered()])
            return

        data = {}
        if options["config"]:
            try:
                data = json.loads(Path(options["config"]).read_text())
            except (OSError, ValueError) as exc:
                raise CommandError(f"cannot read config {options['config']}: {exc}", returncode=CONFIG_ERROR)
            if not isinstance(data, dict):
                raise CommandError("the config must be a JSON object", returncode=CONFIG_ERROR)
        config = build_config(options["name"], data)
        report = run_experiment(config)
        out_dir = output_directory(config, options["out"])
        emit_report(report, out_dir, options["format"] or ("json", "csv"))

        for name, verdict in sorted(report.verdicts.items()):
            mark = "ok  " if verdict.passed else "FAIL"
            self.stdout.write(f"{mark} {name}: {verdict.metric} = {verdict.value:.6g} "
                              f"{verdict.relation} {verdict.limit:.6g}")
        self.stdout.write(f"report written to {out_dir}")
        if not report.passed:
            raise CommandError(f"{config.name}: verdicts failed", returncode=VERDICT_FAILED)
