"""Shared state and helpers for the CLI commands."""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Optional, TypeVar

import click

from services.errors import InstanceError, LengthMismatch, SearchSpaceTooLarge, SupportTooLarge
from services.reporting import RunReport
from utils.storage import dump_report

logger = logging.getLogger(__name__)

T = TypeVar("T")


class InputError(click.ClickException):
    """Bad input file or parameters (exit code 2)."""

    exit_code = 2


@dataclass
class AppContext:
    seed: int
    samples: int
    limit: Optional[int]
    output: Optional[Path]
    settings: Dict = field(default_factory=dict)

    def emit(self, report: RunReport) -> Dict:
        data = report.finish().to_dict()
        click.echo(dump_report(data, self.output))
        return data


pass_app = click.make_pass_decorator(AppContext)


def guarded(action: Callable[[], T]) -> T:
    """Run ``action``, turning input and size-guard errors into exit code 2."""
    try:
        return action()
    except FileNotFoundError as exc:
        raise InputError(f"file not found: {exc.filename}") from exc
    except (InstanceError, LengthMismatch, SupportTooLarge, SearchSpaceTooLarge) as exc:
        logger.debug("Rejected input", exc_info=True)
        raise InputError(str(exc)) from exc
