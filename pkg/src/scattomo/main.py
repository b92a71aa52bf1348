import argparse
import logging
from typing import Optional, Sequence

from pydantic import ValidationError

from scattomo.app import COMMANDS, config_error_handler, run
from scattomo.config import settings
from scattomo.schemas.experiment_schemas import Panel, RunOptions

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scattomo", description="Multiphoton scattering tomography experiments")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON config; command defaults when omitted")
    parser.add_argument("--seed", type=int, help="Override the config seed")
    parser.add_argument("--out", default="out", help="Output directory (default ./out)")
    parser.add_argument("--threads", type=int, help="Worker threads (default SCATTOMO_THREADS)")
    parser.add_argument("--panel", choices=[p.value for p in Panel], help="figure3 panel; all panels when omitted")
    parser.add_argument("--surface", help="Measured T surface CSV for deconvolve")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=settings.LOG_LEVEL)
    args = build_parser().parse_args(argv)
    try:
        options = RunOptions(
            config=args.config,
            seed=args.seed,
            out=args.out,
            threads=settings.THREADS if args.threads is None else args.threads,
            panel=Panel(args.panel) if args.panel else None,
            surface=args.surface,
        )
    except ValidationError as e:
        return config_error_handler(e)
    return run(args.command, options)


if __name__ == "__main__":
    raise SystemExit(main())
