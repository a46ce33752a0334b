import logging
import time
from pathlib import Path

from apps.core.conf import analysis_setting

from .registry import build_config, get_experiment
from .report import emit_report

logger = logging.getLogger(__name__)


def run_experiment(config):
    """Run the experiment named by ``config`` (a RunConfig) and return its report.

    Reports depend on the config and its seed only; timing goes to the log.
    """
    entry = get_experiment(config.name)
    logger.info("experiment %s started", config.name)
    started = time.perf_counter()
    report = entry.run(config)
    report.config = config.echo()
    logger.info(
        "experiment %s finished in %.1fs: %d/%d verdicts passed",
        config.name, time.perf_counter() - started,
        sum(v.passed for v in report.verdicts.values()), len(report.verdicts),
    )
    return report


def output_directory(config, override=None):
    if override:
        return Path(override)
    if config.get("output_dir"):
        return Path(config["output_dir"])
    return Path(analysis_setting("OUTPUT_DIR")) / config.name


def run_and_emit(name, data=None, out_dir=None, formats=("json", "csv")):
    """Validate, run and write; returns (report, written paths)."""
    config = build_config(name, data)
    report = run_experiment(config)
    written = emit_report(report, output_directory(config, out_dir), formats)
    return report, written
