import json
import math
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.db import connections
from django.test import SimpleTestCase
from rest_framework import status
from rest_framework.test import APIClient

from apps.core.exceptions import HypothesisViolated, InvalidParameter, UnknownExperiment
from apps.decomposition.cz import cz_decompose, verify_cz
from apps.dilation.geometry import DilationGroup
from apps.field.grid import GridSpec, lp_norm
from apps.field.io import load_binary

from .experiments.decomposition import cz_field, cz_report
from .experiments.weak import critical_exponent, focusing_dipole, weak_quotient
from .registry import build_config, experiment, get_experiment, registered
from .report import ExperimentReport, emit_report, loglog_slope, series_filename
from .runner import run_experiment

EUCLIDEAN = DilationGroup((1, 1))
PARABOLIC = DilationGroup((1, 2))
SMALL_GRID = {"shape": [64, 64], "extent": [8.0, 8.0]}

EXPERIMENTS = [
    "cz-suite", "d-alpha-l2", "gq-domination", "kernel-decay", "parseval", "rho-axioms",
    "rho-tilde-uniformity", "semigroup-law", "sharpness", "subordination", "theorem-a",
    "tj-decay", "w-alpha", "weak-type", "whitney",
]


def run(name, **data):
    return run_experiment(build_config(name, data))


class ConfigValidationTests(SimpleTestCase):
    def assert_rejected(self, data, key, name="parseval"):
        with self.assertRaises(InvalidParameter) as raised:
            build_config(name, data)
        self.assertIn(key, raised.exception.context["errors"])

    def test_defaults_are_merged(self):
        config = build_config("sharpness", {"seed": 4})
        self.assertEqual(config["p_values"], [1.2, 1.8])
        self.assertEqual(config["seed"], 4)
        self.assertEqual(config.group.exponents, (1.0, 2.0))

    def test_unknown_keys(self):
        self.assert_rejected({"bogus": 1}, "bogus")
        self.assert_rejected({"grid": {"shape": [8, 8], "extent": [1, 1], "spacing": 2}}, "grid")

    def test_ranges(self):
        self.assert_rejected({"alpha": 1.2}, "alpha")
        self.assert_rejected({"alpha_values": [0.5, 0.0]}, "alpha_values")
        self.assert_rejected({"p": 0.5}, "p")
        self.assert_rejected({"exponents": [0.5, 1.0]}, "exponents")
        self.assert_rejected({"grid": {"shape": [48, 64], "extent": [8, 8]}}, "grid")
        self.assert_rejected({"grid": {"shape": [64, 64], "extent": [8, -8]}}, "grid")
        self.assert_rejected({"j_range": [3, -3]}, "j_range")
        self.assert_rejected({"t_values": [1.0, 0.0]}, "t_values")
        self.assert_rejected({"kernels": ["K", "nope"]}, "kernels")

    def test_grid_dimension_must_match_group(self):
        with self.assertRaises(InvalidParameter):
            build_config("parseval", {"exponents": [1, 1, 2], "grid": SMALL_GRID})
        with self.assertRaises(InvalidParameter):
            build_config("parseval", {"exponents": [1], "grid": SMALL_GRID})

    def test_config_for_another_experiment(self):
        with self.assertRaises(InvalidParameter):
            build_config("parseval", {"experiment": "whitney"})

    def test_echo_leaves_out_output_dir(self):
        config = build_config("parseval", {"output_dir": "/tmp/somewhere"})
        echo = config.echo()
        self.assertNotIn("output_dir", echo)
        self.assertEqual(echo["experiment"], "parseval")


class RegistryTests(SimpleTestCase):
    def test_all_experiments_registered(self):
        self.assertEqual([e.name for e in registered()], EXPERIMENTS)

    def test_unknown_experiment(self):
        with self.assertRaises(UnknownExperiment) as raised:
            get_experiment("no-such-thing")
        self.assertIn("parseval", raised.exception.context["available"])
        self.assertEqual(raised.exception.as_dict()["error"], "unknown-experiment")

    def test_duplicate_name(self):
        with self.assertRaises(InvalidParameter):
            experiment("parseval", "again")(lambda config: None)

    def test_summary_lists_defaults(self):
        entry = get_experiment("weak-type").as_dict()
        self.assertEqual(entry["defaults"]["alpha"], 0.5)
        self.assertEqual(entry["defaults"]["seed"], 0)


class ReportTests(SimpleTestCase):
    def test_loglog_slope(self):
        xs = [2.0 ** -k for k in range(5)]
        fit = loglog_slope(xs, [3 * x ** -1.5 for x in xs])
        self.assertAlmostEqual(fit.slope, -1.5, places=12)
        self.assertAlmostEqual(fit.intercept, math.log2(3), places=12)
        self.assertLess(fit.residual, 1e-12)
        with self.assertRaises(InvalidParameter):
            loglog_slope(xs[:3], xs[:3])
        with self.assertRaises(InvalidParameter):
            loglog_slope(xs, [1, 2, 0, 4, 5])

    def test_series_filename(self):
        self.assertEqual(series_filename("alpha=0.5 profile"), "series_alpha=0.5_profile.csv")
        self.assertEqual(series_filename("deriv2(0, 1)"), "series_deriv2_0_1.csv")

    def test_verdicts(self):
        report = ExperimentReport("demo")
        report.add_metric("err", 1e-3)
        self.assertTrue(report.require_at_most("small", "err", 1e-2))
        self.assertFalse(report.require_at_least("large", "err", 1.0))
        self.assertTrue(report.require_within("near", "err", 0.0, 2e-3))
        report.add_metric("broken", float("nan"))
        self.assertFalse(report.require_at_most("finite", "broken", math.inf))
        self.assertFalse(report.passed)
        with self.assertRaises(InvalidParameter):
            report.require_at_most("missing", "no_such_metric", 1.0)

    def test_empty_series_gives_json_only(self):
        report = ExperimentReport("demo")
        report.add_metric("x", 1.0)
        with tempfile.TemporaryDirectory() as tmp:
            written = emit_report(report, tmp)
            self.assertEqual([p.name for p in written], ["report.json"])
            self.assertEqual(sorted(p.name for p in Path(tmp).iterdir()), ["report.json"])

    def test_series_csv(self):
        report = ExperimentReport("demo")
        report.add_series("decay", [(float(k), 2.0 ** -k) for k in range(5)])
        with tempfile.TemporaryDirectory() as tmp:
            emit_report(report, tmp)
            lines = (Path(tmp) / "series_decay.csv").read_text().splitlines()
        self.assertEqual(lines[0], "x,y")
        self.assertEqual(len(lines), 6)

    def test_rerun_is_byte_identical(self):
        outputs = []
        for _ in range(2):
            report = run("parseval", grid=SMALL_GRID, seed=7)
            with tempfile.TemporaryDirectory() as tmp:
                emit_report(report, tmp)
                outputs.append((Path(tmp) / "report.json").read_bytes())
        self.assertEqual(outputs[0], outputs[1])


class ExperimentTests(SimpleTestCase):
    def assert_passed(self, report):
        failed = sorted(k for k, v in report.verdicts.items() if not v.passed)
        self.assertEqual(failed, [])
        self.assertTrue(report.passed)

    def test_rho_axioms(self):
        for exponents in ([1, 1], [1, 2]):
            self.assert_passed(run("rho-axioms", exponents=exponents, samples=2000))

    def test_parseval(self):
        report = run("parseval", grid=SMALL_GRID)
        self.assert_passed(report)
        self.assertEqual(report.config["experiment"], "parseval")

    def test_semigroup_law(self):
        self.assert_passed(run("semigroup-law"))

    def test_w_alpha(self):
        report = run("w-alpha")
        self.assert_passed(report)
        self.assertAlmostEqual(report.metrics["alpha=0.5_closed_form"], 2 * math.pi, places=12)

    def test_whitney(self):
        report = run("whitney", grid={"shape": [64, 64], "extent": [16.0, 16.0]})
        self.assert_passed(report)
        self.assertEqual(report.metrics["ball_cover_mismatch_cells"], 0)

    def test_sharpness_scaling(self):
        report = run("sharpness")
        self.assert_passed(report)
        self.assertAlmostEqual(report.metrics["p0"], 1.5)
        self.assertAlmostEqual(report.metrics["i_alpha_l2_slope"], 0.5 - 1.5, places=6)
        self.assertLessEqual(report.metrics["ratio_p1.2_slope"], -0.1)
        self.assertGreater(report.metrics["ratio_p1.8_slope"], 0)

    def test_subordination(self):
        report = run("subordination", alpha_values=[0.3, 0.7], t_values=[1.0])
        self.assert_passed(report)
        self.assertLessEqual(report.metrics["max_relative_l2_error"], 1e-3)

    def test_kernel_decay(self):
        report = run("kernel-decay", exponents=[1, 1], kernels=["K", "Q"])
        self.assert_passed(report)
        for key in ("K", "Q"):
            self.assertLessEqual(report.metrics[f"{key}_excess"], 0.15)
            self.assertGreaterEqual(report.metrics[f"{key}_outer_shells"], 1)
        self.assertLessEqual(report.metrics["doubling_change"], 0.1)

    def test_rho_tilde_uniformity(self):
        report = run("rho-tilde-uniformity", exponents=[1, 1], grid={"shape": [128, 128], "extent": [8.0, 8.0]},
                     m_range=[-1, 1], j_range=[-2, 2])
        self.assert_passed(report)
        self.assertEqual(report.metrics["span_points"], 512 * 512)
        for name in ("rho_tilde", "rho_tilde_axis0", "rho_tilde_axis1"):
            self.assertLessEqual(report.metrics[f"{name}_uniformity"], 1.25)

    def test_cz_suite(self):
        report = run("cz-suite", samples=2)
        self.assert_passed(report)
        self.assertEqual(report.metrics["verify_failures"], 0)
        self.assertLessEqual(report.metrics["refinement_spread"], 2.0)

    def test_d_alpha_l2(self):
        report = run("d-alpha-l2", samples=3)
        self.assert_passed(report)
        self.assertLessEqual(report.metrics["max_energy_ratio"], 1.05)

    def test_tj_decay(self):
        report = run("tj-decay", grid={"shape": [1024, 1024], "extent": [64.0, 64.0]})
        self.assert_passed(report)
        self.assertLessEqual(report.metrics["bound_ratio"], 1.1)
        self.assertAlmostEqual(report.metrics["tj_low_slope"], 0.5, delta=0.15)
        self.assertAlmostEqual(report.metrics["tj_high_slope"], -0.5, delta=0.15)
        self.assertEqual(len(report.series["tj_norm"]), 11)

    def test_tj_decay_rejects_indices_the_grid_cannot_hold(self):
        with self.assertRaises(InvalidParameter):
            run("tj-decay", grid={"shape": [256, 256], "extent": [16.0, 16.0]})

    def test_gq_domination(self):
        report = run("gq-domination", samples=3)
        self.assert_passed(report)
        self.assertLessEqual(report.metrics["refinement_change"], 0.2)

    def test_weak_type(self):
        report = run("weak-type", t_values=[1.0, 0.5, 0.25])
        self.assert_passed(report)
        self.assertAlmostEqual(report.metrics["p0"], 1.5)
        self.assertLessEqual(report.metrics["quotient_spread"], 4.0)

    def test_theorem_a(self):
        report = run("theorem-a")
        self.assert_passed(report)
        self.assertAlmostEqual(report.metrics["q"], 1 / (1 / 1.5 - 0.5 / 3))
        self.assertLessEqual(report.metrics["dilation_drift"], 1e-9)

    def test_cz_report_carries_every_check(self):
        grid = GridSpec.square(64, 8.0)
        f = cz_field(grid, EUCLIDEAN)
        verification = verify_cz(cz_decompose(f, 1.0, 1.0, EUCLIDEAN), f)
        report = cz_report(verification)
        self.assertEqual(report.metrics, verification.metrics)
        self.assertEqual(sorted(report.verdicts), sorted(verification.verdicts))
        self.assertEqual(report.passed, verification.passed)
        self.assertEqual(report.config["beta"], 1.0)

    def test_sharpness_needs_dyadic_scales(self):
        with self.assertRaises(InvalidParameter):
            run("sharpness", t_values=[1.0, 0.3, 0.25, 0.125])

    def test_weak_type_needs_p0_above_one(self):
        with self.assertRaises(HypothesisViolated):
            run("weak-type", exponents=[1.0], alpha=0.6)

    def test_tj_decay_needs_central_indices(self):
        with self.assertRaises(InvalidParameter):
            run("tj-decay", j_range=[1, 3])

    def test_theorem_a_hypothesis(self):
        with self.assertRaises(HypothesisViolated):
            run("theorem-a", exponents=[1, 1], alpha=0.9, p=2.5)


class WeakTypeHelperTests(SimpleTestCase):
    def test_critical_exponent(self):
        self.assertAlmostEqual(critical_exponent(PARABOLIC, 0.5), 1.5)
        self.assertAlmostEqual(critical_exponent(EUCLIDEAN, 0.5), 4 / 3)

    def test_weak_quotient(self):
        self.assertAlmostEqual(weak_quotient(np.array([3.0, 1.0, 1.0]), 1.0, 1.0), 3.0)
        self.assertAlmostEqual(weak_quotient(np.full((2, 2), 2.0), 2.0, 0.5), 8.0)
        self.assertAlmostEqual(weak_quotient(np.array([4.0, 1.0, 1.0, 1.0, 1.0, 1.0]), 1.0, 1.0), 6.0)

    def test_focusing_dipole(self):
        grid = GridSpec.square(128, 16.0)
        for t in (1.0, 0.5):
            f = focusing_dipole(grid, PARABOLIC, t, 1.5)
            self.assertAlmostEqual(lp_norm(f, 1.5), 1.0, places=10)
            self.assertLess(abs(f.integral()), 1e-10)


class SettingsTests(SimpleTestCase):
    def test_no_database_is_configured(self):
        self.assertEqual(settings.DATABASES, {})
        self.assertEqual(connections.settings["default"]["ENGINE"], "django.db.backends.dummy")


class ApiTests(SimpleTestCase):
    def setUp(self):
        self.client = APIClient()

    def test_list(self):
        response = self.client.get("/api/v1/experiments/")
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual([e["name"] for e in response.json()], EXPERIMENTS)

    def test_run(self):
        response = self.client.post("/api/v1/experiments/parseval/run/",
                                    {"grid": SMALL_GRID, "seed": 3}, format="json")
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        body = response.json()
        self.assertTrue(body["passed"])
        self.assertEqual(body["config"]["seed"], 3)
        self.assertIn("parseval_error", body["metrics"])

    def test_run_writes_only_with_output_dir(self):
        with tempfile.TemporaryDirectory() as tmp:
            response = self.client.post("/api/v1/experiments/parseval/run/",
                                        {"grid": SMALL_GRID, "output_dir": tmp}, format="json")
            self.assertEqual(response.status_code, status.HTTP_200_OK)
            self.assertTrue((Path(tmp) / "report.json").exists())

    def test_unknown_experiment(self):
        response = self.client.post("/api/v1/experiments/nope/run/", {}, format="json")
        self.assertEqual(response.status_code, status.HTTP_404_NOT_FOUND)
        self.assertEqual(response.json()["error"], "unknown-experiment")

    def test_invalid_config(self):
        response = self.client.post("/api/v1/experiments/parseval/run/", {"alpha": 3}, format="json")
        self.assertEqual(response.status_code, status.HTTP_400_BAD_REQUEST)
        self.assertEqual(response.json()["error"], "invalid-parameter")

    def test_precondition(self):
        response = self.client.post("/api/v1/experiments/weak-type/run/",
                                    {"exponents": [1], "alpha": 0.6}, format="json")
        self.assertEqual(response.status_code, status.HTTP_400_BAD_REQUEST)
        self.assertEqual(response.json()["error"], "hypothesis-violated")

    def test_rho(self):
        response = self.client.post("/api/v1/rho/",
                                    {"exponents": [1, 2], "points": [[1, 0], [0, 1], [2, 0], [0, 4]]},
                                    format="json")
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        body = response.json()
        self.assertEqual(body["gamma"], 3.0)
        np.testing.assert_allclose(body["rho"], [1.0, 1.0, 2.0, 2.0], rtol=1e-9)

    def test_rho_rejects_ragged_points(self):
        response = self.client.post("/api/v1/rho/", {"exponents": [1, 2], "points": [[1, 0], [1]]},
                                    format="json")
        self.assertEqual(response.status_code, status.HTTP_400_BAD_REQUEST)


class CommandTests(SimpleTestCase):
    def call(self, *args):
        out = StringIO()
        call_command(*args, stdout=out)
        return out.getvalue()

    def assert_exit(self, returncode, *args):
        with self.assertRaises(CommandError) as raised:
            self.call(*args)
        self.assertEqual(raised.exception.returncode, returncode)

    def test_rho_eval(self):
        out = json.loads(self.call("rho", "eval", "--point", "2", "0", "--point", "0", "4"))
        np.testing.assert_allclose(out["rho"], [2.0, 2.0], rtol=1e-9)
        self.assert_exit(2, "rho", "eval", "--point", "1", "2", "3")
        self.assert_exit(2, "rho", "eval", "--exponents", "0.5", "1", "--point", "1", "1")

    def test_experiment_list(self):
        names = [e["name"] for e in json.loads(self.call("experiment", "list"))]
        self.assertEqual(names, EXPERIMENTS)

    def test_experiment_run(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = Path(tmp) / "config.json"
            config.write_text(json.dumps({"grid": SMALL_GRID, "seed": 1}))
            out = self.call("experiment", "run", "parseval", "--config", str(config), "--out", tmp)
            report = json.loads((Path(tmp) / "report.json").read_text())
        self.assertIn("ok   parseval", out)
        self.assertTrue(report["passed"])

    def test_experiment_exit_codes(self):
        with tempfile.TemporaryDirectory() as tmp:
            self.assert_exit(2, "experiment", "run", "no-such-thing", "--out", tmp)
            bad = Path(tmp) / "bad.json"
            bad.write_text(json.dumps({"alpha": 7}))
            self.assert_exit(2, "experiment", "run", "parseval", "--config", str(bad), "--out", tmp)
            strict = Path(tmp) / "strict.json"
            strict.write_text(json.dumps({"grid": {"shape": [64, 64], "extent": [16.0, 16.0]},
                                          "tolerances": {"overlap": 0}}))
            self.assert_exit(1, "experiment", "run", "whitney", "--config", str(strict), "--out", tmp)

    def test_kernel_synth_and_decay(self):
        grid = ["--exponents", "1", "1", "--shape", "128", "128", "--extent", "8", "8"]
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "k.ahf"
            out = json.loads(self.call("kernel", "synth", "K", "--out", str(path), *grid))
            self.assertEqual(out["kind"], "K")
            self.assertEqual(load_binary(path).grid.shape, (128, 128))
            self.call("kernel", "decay", "K", "--out", tmp, *grid)
            lines = (Path(tmp) / "profile.csv").read_text().splitlines()
        self.assertEqual(lines[0], "shell_lo,shell_hi,sup_weighted")
        self.assertGreater(len(lines), 2)

    def test_op_apply(self):
        grid = ["--exponents", "1", "2", "--shape", "128", "128", "--extent", "8", "8"]
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "poisson.ahf"
            out = json.loads(self.call("op", "apply", "poisson", "--time", "0.1", "--out", str(path), *grid))
            self.assertTrue(path.exists())
        self.assertAlmostEqual(out["input_l2"], 1.0, places=10)
        self.assertLess(out["output_l2"], out["input_l2"])
        self.assert_exit(2, "op", "apply", "riesz", "--alpha", "5", *grid)

    def test_cz_run(self):
        grid = ["--exponents", "1", "1", "--shape", "64", "64", "--extent", "16", "16"]
        with tempfile.TemporaryDirectory() as tmp:
            out = json.loads(self.call("cz", "run", "--beta", "1", "--out", tmp, *grid))
            self.assertTrue((Path(tmp) / "decomposition.json").exists())
            self.assertTrue((Path(tmp) / "report.json").exists())
        self.assertTrue(out["passed"])
        self.assertGreater(out["bad_parts"], 0)
        with tempfile.TemporaryDirectory() as tmp:
            self.assert_exit(2, "cz", "run", "--beta", "0.001", "--out", tmp, *grid)
