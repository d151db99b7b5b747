#!/usr/bin/env python3
"""
Production runner for FlashSim
"""
import logging
import os
import sys
from pathlib import Path

# Add app directory to Python path
APP_DIR = Path(__file__).parent
sys.path.insert(0, str(APP_DIR))


def setup_environment():
    """Select the production configuration unless one is already chosen"""
    os.environ.setdefault('FLASHSIM_ENV', 'production')


def check_dependencies() -> bool:
    """Check if all required dependencies are installed"""
    logger = logging.getLogger(__name__)

    try:
        import numpy
        import scipy
        import pandas
        import galois
        import dotenv
        logger.debug("All core dependencies are available")
        return True
    except ImportError as e:
        logger.error(f"Missing dependency: {e}")
        print(f"Missing dependency: {e}", file=sys.stderr)
        print("Please install requirements: pip install -r requirements.txt", file=sys.stderr)
        return False


def main() -> int:
    """Main entry point"""
    setup_environment()

    if sys.version_info < (3, 9):
        print("Python 3.9+ is required", file=sys.stderr)
        return 1

    if not check_dependencies():
        from app.exceptions import EXIT_MISSING_DEPENDENCY
        return EXIT_MISSING_DEPENDENCY

    from app.main import main as cli_main
    return cli_main(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
