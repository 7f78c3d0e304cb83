#!/usr/bin/env python3
"""
gigmatch
Command-line entry point
"""

import sys
import logging

from src.app import run
from config.settings import Config


def main():
    """Configure logging and hand argv to the command dispatcher"""
    try:
        handlers = [logging.StreamHandler(sys.stderr)]
        if Config.LOG_FILE:
            handlers.append(logging.FileHandler(Config.LOG_FILE))

        logging.basicConfig(
            level=getattr(logging, Config.LOG_LEVEL.upper(), logging.INFO),
            format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            handlers=handlers
        )

        code = run(sys.argv[1:])

    except Exception as e:
        logging.error(f"Failed to run gigmatch: {str(e)}")
        sys.exit(1)

    sys.exit(code)


if __name__ == '__main__':
    main()
