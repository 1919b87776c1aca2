"""
summarize command
"""
import logging

import click

from cli.output import emit, handle_errors
from core.config import settings
from schemas.result import ResultDocument
from services.config_files import load_components
from services.dataset import incidence_summary, ingest_path
from services.statistics import grand_mean
from services.variance import plugin_variances, variance_table

logger = logging.getLogger(__name__)


def approx_warning(epsilon_n: float) -> str:
    return (
        f"epsilon_N = {epsilon_n:.4g} exceeds {settings.APPROX_VALID_EPSILON}; "
        "approximate pigeonhole weights may be inaccurate"
    )


@click.command("summarize")
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("--variance-components", "components_path", type=click.Path(dir_okay=False),
              help="Key-value file with sigma2_a, sigma2_b, sigma2_e, mu")
@click.option("--duplicate-policy", type=click.Choice(["error", "first", "mean"]), default=None)
@click.pass_context
@handle_errors
def summarize(ctx: click.Context, path: str, components_path: str, duplicate_policy: str):
    """Pattern summary, grand mean and plug-in variances of a triplet file"""
    ds = ingest_path(path, duplicate_policy)
    summary = incidence_summary(ds)
    warnings = []
    outputs = {"summary": summary.describe(), "grand_mean": grand_mean(ds)}

    if components_path:
        comp = load_components(components_path, ds)
        table = variance_table(summary, comp, ds)
        outputs["components"] = comp.describe()
        outputs["variance"] = table
        if not table.approx_valid:
            warnings.append(approx_warning(summary.epsilon_n))
        combined = table.combined
    else:
        plugins = plugin_variances(ds)
        outputs["plugin"] = plugins
        combined = plugins["combined"]
    if combined.negative:
        warnings.append(f"combined variance estimate is negative ({combined.value:.6g})")

    doc = ResultDocument(
        command="summarize",
        inputs={"path": path, "variance_components": components_path,
                "duplicate_policy": duplicate_policy or settings.DUPLICATE_POLICY},
        outputs=outputs,
        warnings=warnings,
    )
    emit(doc, ctx.obj.get("output"))
