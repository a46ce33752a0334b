"""Arguments shared by the analysis commands and the error-to-exit-status mapping."""

import functools
import json

from django.core.management.base import CommandError

from apps.core.exceptions import AnalysisError
from apps.dilation.geometry import DilationGroup
from apps.field.grid import GridSpec

CONFIG_ERROR = 2
VERDICT_FAILED = 1


def add_group_arguments(parser):
    parser.add_argument("--exponents", type=float, nargs="+", default=[1.0, 2.0],
                        help="dilation exponents a_1 ... a_n (each >= 1)")
    parser.add_argument("--root-tolerance", type=float, default=None)


def add_grid_arguments(parser, shape=(256, 256), extent=(16.0, 16.0)):
    parser.add_argument("--shape", type=int, nargs="+", default=list(shape), help="sample counts N_j")
    parser.add_argument("--extent", type=float, nargs="+", default=list(extent), help="box side lengths L_j")


def group_from_options(options):
    data = {"exponents": options["exponents"]}
    if options.get("root_tolerance") is not None:
        data["root_tolerance"] = options["root_tolerance"]
    return DilationGroup.from_config(data)


def grid_from_options(options, group):
    grid = GridSpec(tuple(options["shape"]), tuple(options["extent"]))
    if grid.dimension != group.dimension:
        raise CommandError(f"grid has {grid.dimension} axes but the group {group.dimension}",
                           returncode=CONFIG_ERROR)
    return grid


def exits_on_analysis_error(handle):
    """AnalysisError -> CommandError with exit status 2 and the error payload."""
    @functools.wraps(handle)
    def wrapper(self, *args, **options):
        try:
            return handle(self, *args, **options)
        except AnalysisError as exc:
            raise CommandError(json.dumps(exc.as_dict(), default=str), returncode=CONFIG_ERROR) from exc
    return wrapper


def write_json(stdout, payload):
    stdout.write(json.dumps(payload, sort_keys=True, indent=2, default=str))
