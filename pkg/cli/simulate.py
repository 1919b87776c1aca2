"""
simulate command
"""
import logging
from typing import Optional

import click

from cli.output import emit, handle_errors
from core.random_streams import StreamTag, stream
from schemas.result import ResultDocument
from services.config_files import load_simulation
from services.dataset import incidence_summary, write_triplets
from services.simulator import draw_responses, gen_incidence

logger = logging.getLogger(__name__)


@click.command("simulate")
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--data-out", "data_out", type=click.Path(dir_okay=False), required=True,
              help="Where to write the synthetic triplet file")
@click.option("--seed", type=click.IntRange(min=0, max=2**64 - 1), default=None, help="Overrides the config seed")
@click.pass_context
@handle_errors
def simulate(ctx: click.Context, config: str, data_out: str, seed: Optional[int]):
    """Generate a synthetic crossed dataset from a simulation config"""
    ispec, gspec = load_simulation(config)
    if seed is not None:
        ispec = ispec.model_copy(update={"seed": seed})
    skeleton = gen_incidence(ispec)
    ds = draw_responses(skeleton.dataset, gspec, stream(ispec.seed, 0, StreamTag.RESPONSES))
    write_triplets(ds, data_out)
    logger.info(f"Wrote {ds.N} simulated records to {data_out}")

    doc = ResultDocument(
        command="simulate",
        inputs={"config": config, "incidence": ispec, "model": gspec.model, "distribution": gspec.distribution,
                "components": gspec.comp.describe(), "label_effects": gspec.label_effects},
        outputs={"path": data_out, "summary": incidence_summary(ds).describe(),
                 "generation_attempts": skeleton.generation_attempts},
    )
    emit(doc, ctx.obj.get("output"))
