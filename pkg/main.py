import asyncio
import contextlib
import logging
import os
import sys
from typing import Iterator, Sequence

import sentry_sdk
from sentry_sdk.integrations.asyncio import AsyncioIntegration

import core

SENTRY_DSN = os.getenv("SENTRY_DSN")
MORPH_ENVIRONMENT = os.getenv("MORPH_ENVIRONMENT", "development")

LOG_FORMAT = "{asctime} {levelname:<8} {name}: {message}"


@contextlib.contextmanager
def setup_logging(*, verbose: bool = False) -> Iterator[None]:
    """Set up logging on stderr; debug for the project's packages in development or with --verbose."""
    log = logging.getLogger()

    try:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt="%Y-%m-%d %H:%M:%S", style="{"))
        log.addHandler(handler)
        log.setLevel(logging.INFO)
        if verbose or MORPH_ENVIRONMENT == "development":
            for name in ("core", "extensions", "kernels", "utilities"):
                logging.getLogger(name).setLevel(logging.DEBUG)
        yield None
    finally:
        handlers = log.handlers[:]
        for hdlr in handlers:
            hdlr.close()
            log.removeHandler(hdlr)


async def main(argv: Sequence[str]) -> int:
    """Run one morph command and return its exit status."""
    sentry_sdk.init(
        dsn=SENTRY_DSN,
        traces_sample_rate=1.0,
        environment=MORPH_ENVIRONMENT,
        integrations=[
            AsyncioIntegration(),
        ],
    )

    morph = core.Morph(environment=MORPH_ENVIRONMENT)
    return await morph.run(argv)


def run() -> None:
    """Console entry point."""
    argv = sys.argv[1:]
    with setup_logging(verbose="-v" in argv or "--verbose" in argv):
        raise SystemExit(asyncio.run(main(argv)))


if __name__ == "__main__":
    run()
