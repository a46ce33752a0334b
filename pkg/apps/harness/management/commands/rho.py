import json
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from ._options import CONFIG_ERROR, add_group_arguments, exits_on_analysis_error, group_from_options, write_json


class Command(BaseCommand):
    help = "Evaluate the homogeneous quasi-norm rho at points: rho eval --point 1 0 --point 3 4"

    def add_arguments(self, parser):
        actions = parser.add_subparsers(dest="action", required=True)
        evaluate = actions.add_parser("eval", help="rho(x) for each point")
        add_group_arguments(evaluate)
        evaluate.add_argument("--point", type=float, nargs="+", action="append", default=[],
                              help="one point; repeat for more")
        evaluate.add_argument("--points-file", help="JSON list of points")

    @exits_on_analysis_error
    def handle(self, *args, **options):
        group = group_from_options(options)
        points = list(options["point"])
        if options["points_file"]:
            points += json.loads(Path(options["points_file"]).read_text())
        if not points:
            raise CommandError("no points given", returncode=CONFIG_ERROR)
        if any(len(point) != group.dimension for point in points):
            raise CommandError(f"every point needs {group.dimension} coordinates", returncode=CONFIG_ERROR)
        rho = group.rho([[float(c) for c in point] for point in points])
        write_json(self.stdout, {
            "exponents": list(group.exponents),
            "gamma": group.gamma,
            "rho": [float(r) for r in rho],
        })
