import logging

from django.core.management.base import BaseCommand, CommandError

from apps.field.grid import lp_norm, make_band_limited, remove_mean
from apps.field.io import dump_field, load_binary
from apps.operators.maximal import hl_maximal, m_s
from apps.operators.multipliers import (lp_block, poisson_semigroup, q_semigroup, riesz_potential,
                                        subordination)
from apps.operators.partition import LPPartition
from apps.operators.square import DyadicQuadrature, g_q, marcinkiewicz_d_alpha, t_j_square_function

from ._options import (CONFIG_ERROR, add_grid_arguments, add_group_arguments, exits_on_analysis_error,
                       grid_from_options, group_from_options, write_json)

logger = logging.getLogger(__name__)

OPERATORS = ("riesz", "poisson", "q", "subordination", "d_alpha", "t_j", "g_q", "maximal", "m_s", "block")


def _quadrature(f, group, options):
    if options["shell_range"]:
        return DyadicQuadrature(f.grid, group, *options["shell_range"])
    return DyadicQuadrature.for_grid(f.grid, group)


def apply_operator(name, f, group, options):
    alpha, t, j = options["alpha"], options["time"], options["j"]
    if name == "riesz":
        return riesz_potential(f, group, alpha)
    if name == "poisson":
        return poisson_semigroup(f, group, t)
    if name == "q":
        return q_semigroup(f, group, t)
    if name == "subordination":
        return subordination(f, group, alpha, t)
    if name == "d_alpha":
        return marcinkiewicz_d_alpha(f, group, alpha, _quadrature(f, group, options))
    if name == "t_j":
        return t_j_square_function(f, group, j, alpha, _quadrature(f, group, options),
                                   LPPartition(*options["block_range"]))
    if name == "g_q":
        return g_q(f, group)
    if name == "maximal":
        return hl_maximal(f, group, centered=options["centered"])
    if name == "m_s":
        return m_s(f, group, options["power"])
    return lp_block(f, group, j, LPPartition(*options["block_range"]))


class Command(BaseCommand):
    help = "Apply one operator to a field read from disk or to a seeded band-limited field: op apply NAME"

    def add_arguments(self, parser):
        actions = parser.add_subparsers(dest="action", required=True)
        apply = actions.add_parser("apply", help="apply an operator and dump the result")
        apply.add_argument("operator", choices=OPERATORS)
        apply.add_argument("--input", help="field in the binary format; its grid overrides --shape/--extent")
        apply.add_argument("--seed", type=int, default=0, help="seed of the band-limited input")
        apply.add_argument("--remove-mean", action="store_true", help="project out the zero frequency first")
        apply.add_argument("--alpha", type=float, default=0.5)
        apply.add_argument("--time", type=float, default=1.0, help="semigroup parameter t")
        apply.add_argument("--j", type=int, default=0)
        apply.add_argument("--power", type=float, default=2.0, help="exponent s of M_s")
        apply.add_argument("--shell-range", type=int, nargs=2, default=None)
        apply.add_argument("--block-range", type=int, nargs=2, default=[-2, 1])
        apply.add_argument("--centered", action="store_true", help="maximal function over centred rectangles")
        apply.add_argument("--out", help="result file (.ahf or .csv)")
        add_group_arguments(apply)
        add_grid_arguments(apply)

    @exits_on_analysis_error
    def handle(self, *args, **options):
        group = group_from_options(options)
        if options["input"]:
            f = load_binary(options["input"])
            if f.grid.dimension != group.dimension:
                raise CommandError(f"input field has {f.grid.dimension} axes, the group {group.dimension}",
                                   returncode=CONFIG_ERROR)
        else:
            f = make_band_limited(grid_from_options(options, group), group, options["seed"])
        if options["remove_mean"]:
            f = remove_mean(f)
        result = apply_operator(options["operator"], f, group, options)
        logger.info("%s applied on %s", options["operator"], f.grid.shape)
        summary = {
            "operator": options["operator"],
            "shape": list(result.grid.shape),
            "extent": list(result.grid.extent),
            "input_l2": lp_norm(f, 2),
            "output_l2": lp_norm(result, 2),
        }
        if options["out"]:
            summary["written"] = str(dump_field(result, options["out"]))
        write_json(self.stdout, summary)
