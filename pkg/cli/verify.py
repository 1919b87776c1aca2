"""
verify command
"""
import logging
import sys
from typing import Optional

import click

from cli.output import emit, handle_errors
from core.config import settings
from core.errors import EXIT_VERIFICATION_FAILED
from schemas.result import ResultDocument
from services.config_files import load_verify_config
from services.verification import SUITES, Verifier

logger = logging.getLogger(__name__)


@click.command("verify")
@click.argument("config", type=click.Path(dir_okay=False), required=False)
@click.option("--suite", type=click.Choice(list(SUITES)), default="all", show_default=True)
@click.option("--seed", type=click.IntRange(min=0, max=2**64 - 1), default=None)
@click.pass_context
@handle_errors
def verify(ctx: click.Context, config: Optional[str], suite: str, seed: Optional[int]):
    """Check closed forms against exhaustive enumeration and Monte Carlo simulation"""
    seed = settings.DEFAULT_SEED if seed is None else seed
    cfg = load_verify_config(config)
    report = Verifier(cfg, seed).run(suite)

    warnings = [f"{c.name}: inconclusive ({c.detail})" for c in report.checks if c.status == "inconclusive"]
    doc = ResultDocument(
        command="verify",
        inputs={"config": config, "suite": suite, "seed": seed, "settings": cfg},
        outputs={"status": report.status, "counts": report.counts(), "checks": report.checks},
        warnings=warnings,
    )
    emit(doc, ctx.obj.get("output"))
    if report.failed:
        logger.error(f"{len(report.failed)} verification checks failed")
        sys.exit(EXIT_VERIFICATION_FAILED)
