"""
contrast command
"""
import logging
from typing import Optional

import click

from cli.output import emit, handle_errors, write_plot_data
from core.config import settings
from schemas.result import ResultDocument
from services.dataset import ingest_path
from services.resampling import contrast

logger = logging.getLogger(__name__)


@click.command("contrast")
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("--a", "label_a", required=True, help="First label")
@click.option("--b", "label_b", required=True, help="Second label")
@click.option("-B", "B", type=click.IntRange(min=2), default=None, help="Number of replicates (at least 2)")
@click.option("--seed", type=click.IntRange(min=0, max=2**64 - 1), default=None)
@click.option("--scheme", type=click.Choice(["naive", "pigeonhole"]), default="pigeonhole", show_default=True)
@click.option("--workers", type=click.IntRange(min=1), default=None)
@click.option("--plot-data", "plot_dir", type=click.Path(file_okay=False), default=None)
@click.option("--duplicate-policy", type=click.Choice(["error", "first", "mean"]), default=None)
@click.pass_context
@handle_errors
def contrast_cmd(ctx: click.Context, path: str, label_a: str, label_b: str, B: Optional[int], seed: Optional[int],
                 scheme: str, workers: Optional[int], plot_dir: Optional[str], duplicate_policy: Optional[str]):
    """Bootstrap t-test of the difference between two label groups"""
    B = settings.DEFAULT_REPLICATES if B is None else B
    seed = settings.DEFAULT_SEED if seed is None else seed
    ds = ingest_path(path, duplicate_policy)
    result = contrast(ds, label_a, label_b, B, seed, scheme=scheme, workers=workers)

    warnings = []
    if result.dropped:
        warnings.append(f"{result.dropped} of {B} replicates dropped: a group was empty")
    outputs = {"contrast": result}
    if plot_dir:
        rows = [
            {"replicate": "original" if r.replicate is None else r.replicate,
             "mean_a": r.mean_a, "mean_b": r.mean_b, "diff": r.diff}
            for r in result.per_replicate_group_means
        ]
        outputs["plot_data"] = str(write_plot_data(plot_dir, "contrast.csv", rows,
                                                   ["replicate", "mean_a", "mean_b", "diff"]))

    doc = ResultDocument(
        command="contrast",
        inputs={"path": path, "a": label_a, "b": label_b, "B": B, "seed": seed, "scheme": scheme,
                "duplicate_policy": duplicate_policy or settings.DUPLICATE_POLICY},
        outputs=outputs,
        warnings=warnings,
    )
    emit(doc, ctx.obj.get("output"))
