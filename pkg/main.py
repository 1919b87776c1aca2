"""
Crossed Bootstrap Toolkit - Main Application
Command-line entry point for pigeonhole and naive bootstrap analysis of crossed data
"""
import click

from cli import bootstrap, contrast_cmd, simulate, summarize, verify
from cli.output import configure_logging
from core.config import settings


@click.group()
@click.version_option(settings.APP_VERSION, prog_name=settings.APP_NAME)
@click.option("--verbose", is_flag=True, help="Debug logging on standard error")
@click.option("--output", type=click.Path(dir_okay=False), default=None,
              help="Write the JSON result document to a file instead of standard output")
@click.pass_context
def cli(ctx: click.Context, verbose: bool, output: str):
    """Variance of means of crossed (row, column, value) data"""
    configure_logging(verbose or settings.DEBUG)
    ctx.ensure_object(dict)
    ctx.obj["output"] = output


# Register commands
cli.add_command(summarize)
cli.add_command(bootstrap)
cli.add_command(contrast_cmd, name="contrast")
cli.add_command(verify)
cli.add_command(simulate)


if __name__ == "__main__":
    cli()
