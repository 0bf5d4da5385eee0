import sys
import logging

from app.core.config import settings
from app.cli.commands import run

logging.basicConfig(
    level=logging.DEBUG if settings.DEBUG else settings.LOG_LEVEL,
    format="%(asctime)s %(levelname)s %(name)s: %(message)s",
)
logger = logging.getLogger(__name__)


if __name__ == "__main__":
    logger.info(f"{settings.APP_NAME} starting")
    sys.exit(run())
