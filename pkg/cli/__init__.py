"""
Command-line surface: one click command per module
"""
from cli.bootstrap import bootstrap
from cli.contrast import contrast_cmd
from cli.simulate import simulate
from cli.summarize import summarize
from cli.verify import verify

__all__ = ["bootstrap", "contrast_cmd", "simulate", "summarize", "verify"]
