from django.core.management.base import BaseCommand, CommandError

from apps.decomposition.cz import cz_decompose, verify_cz
from apps.field.io import load_binary
from apps.harness.experiments.decomposition import cz_field, cz_report
from apps.harness.report import emit_report

from ._options import (CONFIG_ERROR, VERDICT_FAILED, add_grid_arguments, add_group_arguments,
                       exits_on_analysis_error, grid_from_options, group_from_options, write_json)


class Command(BaseCommand):
    help = "Calderon-Zygmund decomposition at height beta, dumped and verified: cz run --beta 1 --out DIR"

    def add_arguments(self, parser):
        actions = parser.add_subparsers(dest="action", required=True)
        run = actions.add_parser("run", help="decompose, dump the parts and verify them")
        run.add_argument("--input", help="field in the binary format, supported away from the box faces")
        run.add_argument("--height", type=float, default=4.0, help="height of the default bump")
        run.add_argument("--radius", type=float, default=1.0, help="rho-radius of the default bump")
        run.add_argument("--beta", type=float, required=True)
        run.add_argument("--lp", type=float, default=1.0, help="exponent p of the level set M(|f|^p) > beta^p")
        run.add_argument("--dilate", type=float, default=1.0, help="cover dilation factor (>= 1)")
        run.add_argument("--out", required=True, help="output directory")
        add_group_arguments(run)
        add_grid_arguments(run, shape=(64, 64))

    @exits_on_analysis_error
    def handle(self, *args, **options):
        group = group_from_options(options)
        if options["input"]:
            f = load_binary(options["input"])
            if f.grid.dimension != group.dimension:
                raise CommandError(f"input field has {f.grid.dimension} axes, the group {group.dimension}",
                                   returncode=CONFIG_ERROR)
        else:
            f = cz_field(grid_from_options(options, group), group, options["height"], options["radius"])
        dec = cz_decompose(f, options["beta"], options["lp"], group, dilate=options["dilate"])
        dec.dump(options["out"])
        verification = verify_cz(dec, f)
        report = cz_report(verification)
        report.config["exponents"] = list(group.exponents)
        emit_report(report, options["out"])
        write_json(self.stdout, {"bad_parts": len(dec.bad), "passed": report.passed,
                                 "metrics": report.as_dict()["metrics"]})
        if not verification.passed:
            failed = verification.failed()
            raise CommandError(f"verification failed: {', '.join(failed)}", returncode=VERDICT_FAILED)
