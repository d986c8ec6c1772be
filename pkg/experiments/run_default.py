import sys
import os

# Add project root directory to sys.path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
sys.path.insert(0, project_root)

import logging

from modules.cli.config import parse_config
from modules.cli.suite import run_suite
from modules.errors import L2IError
from modules.log_setup import configure_logging

logger = logging.getLogger("experiments.run_default")


def main():
    config_path = os.path.join(os.path.dirname(__file__), "default.cfg")
    configure_logging("INFO")

    try:
        logger.info(f"Loading config from {config_path}")
        cfg = parse_config(config_path)
    except L2IError as e:
        logger.error(f"Failed to load config: {e}")
        return 1

    try:
        logger.info("Running the six-variant suite on the default benchmark...")
        result = run_suite(cfg)
    except L2IError as e:
        logger.error(f"Suite failed: {e}")
        return 1

    logger.info(f"Tables written to {result.output_dir}")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
