import json
import logging
from pathlib import Path

from django.core.management.base import BaseCommand

from apps.field.io import dump_field
from apps.kernels.synthesis import decay_profile, synthesize_kind

from ._options import (add_grid_arguments, add_group_arguments, exits_on_analysis_error,
                       grid_from_options, group_from_options, write_json)

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = "Synthesise a kernel on a grid (kernel synth) or write its weighted decay profile (kernel decay)."

    def add_arguments(self, parser):
        actions = parser.add_subparsers(dest="action", required=True)
        for name, text in (("synth", "sample the kernel and dump the field"),
                           ("decay", "per-shell sup of the weighted kernel")):
            action = actions.add_parser(name, help=text)
            action.add_argument("kind", help="K, Q, deriv:k, deriv_rho:k, deriv2:k,l, rho_tilde:m[,k] or riesz")
            action.add_argument("--alpha", type=float, default=None, help="for rho_tilde and riesz")
            action.add_argument("--nyquist-tolerance", type=float, default=None)
            action.add_argument("--out", required=True,
                                help="field file (.ahf or .csv) for synth, directory for decay")
            add_group_arguments(action)
            add_grid_arguments(action)

    @exits_on_analysis_error
    def handle(self, *args, **options):
        group = group_from_options(options)
        grid = grid_from_options(options, group)
        kernel = synthesize_kind(options["kind"], group, grid, alpha=options["alpha"],
                                 tolerance=options["nyquist_tolerance"])
        summary = {
            "kind": kernel.kind.label,
            "exponent": kernel.exponent,
            "boundary_sup": kernel.boundary_sup,
        }
        if options["action"] == "synth":
            summary["written"] = str(dump_field(kernel.field, options["out"]))
        else:
            profile = decay_profile(kernel)
            out_dir = Path(options["out"])
            out_dir.mkdir(parents=True, exist_ok=True)
            profile.to_csv(out_dir / "profile.csv")
            summary.update(profile.as_dict())
            summary.update(core_max=profile.core_max(), excess=profile.excess())
            (out_dir / "profile.json").write_text(
                json.dumps(summary, sort_keys=True, indent=2) + "\n")
            logger.info("decay profile of %s written to %s", kernel.kind.label, out_dir)
        write_json(self.stdout, summary)
