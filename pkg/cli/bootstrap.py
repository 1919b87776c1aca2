"""
bootstrap command
"""
import logging
from typing import Optional, Tuple

import click

from cli.output import emit, handle_errors, write_plot_data
from core.config import settings
from schemas.resampling import StatisticSpec
from schemas.result import ResultDocument
from services.dataset import ingest_path
from services.resampling import run_bootstrap
from services.variance import naive_plugin_variance, pigeonhole_plugin_variance

logger = logging.getLogger(__name__)


@click.command("bootstrap")
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("--scheme", type=click.Choice(["naive", "pigeonhole"]), default="pigeonhole", show_default=True)
@click.option("--stat", "stat", type=click.Choice(["mean", "group"]), default="mean", show_default=True)
@click.option("--labels", multiple=True, help="Group labels for --stat group (repeat or comma-separate)")
@click.option("-B", "B", type=click.IntRange(min=1), default=None, help="Number of replicates")
@click.option("--seed", type=click.IntRange(min=0, max=2**64 - 1), default=None)
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Replicate threads")
@click.option("--plot-data", "plot_dir", type=click.Path(file_okay=False), default=None)
@click.option("--duplicate-policy", type=click.Choice(["error", "first", "mean"]), default=None)
@click.pass_context
@handle_errors
def bootstrap(ctx: click.Context, path: str, scheme: str, stat: str, labels: Tuple[str, ...], B: Optional[int],
              seed: Optional[int], workers: Optional[int], plot_dir: Optional[str], duplicate_policy: Optional[str]):
    """Bootstrap the grand mean or group ratio means"""
    B = settings.DEFAULT_REPLICATES if B is None else B
    seed = settings.DEFAULT_SEED if seed is None else seed
    label_list = [part for item in labels for part in item.split(",") if part]
    if stat == "group" and not label_list:
        raise click.UsageError("--stat group needs --labels")
    statistic = StatisticSpec.group_means(label_list) if stat == "group" else StatisticSpec.grand_mean()

    ds = ingest_path(path, duplicate_policy)
    run = run_bootstrap(ds, scheme, statistic, B, seed, workers=workers)
    plugin = naive_plugin_variance(ds) if scheme == "naive" else pigeonhole_plugin_variance(ds)

    warnings = []
    if run.dropped:
        warnings.append(f"{run.dropped} of {B} replicates dropped: statistic undefined")
    outputs = {
        "original": run.original_value,
        "kept": len(run.replicate_values),
        "dropped": run.dropped,
        "replicate_mean": run.replicate_mean(),
        "empirical_variance": run.empirical_variance(),
        "bias": run.bias(),
        "replicates": run.replicate_table(),
    }
    if stat == "mean":
        outputs["plugin_variance"] = plugin

    if plot_dir:
        columns = ["replicate", "value"] if stat == "mean" else ["replicate", "label", "mean"]
        outputs["plot_data"] = str(write_plot_data(plot_dir, f"bootstrap_{scheme}.csv", run.replicate_table(), columns))

    doc = ResultDocument(
        command="bootstrap",
        inputs={"path": path, "scheme": scheme, "stat": stat, "labels": label_list, "B": B, "seed": seed,
                "duplicate_policy": duplicate_policy or settings.DUPLICATE_POLICY},
        outputs=outputs,
        warnings=warnings,
    )
    emit(doc, ctx.obj.get("output"))
