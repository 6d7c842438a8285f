#!/usr/bin/env python3
"""
Entry point for RemoteTrack
Loads the environment, configures logging and hands over to the CLI

Usage:
    python run_remote_tracking.py run --config scenario1 --out out/s1
    python run_remote_tracking.py run --config configs/scenario2.yaml --seed 7
    python run_remote_tracking.py accept
    python run_remote_tracking.py sweep --config scenario1 --grid k=1,2,4,8,16
"""

import logging
import os

from dotenv import load_dotenv

# Load environment before importing our modules
load_dotenv()

from src.cli.commands import cli

# Configure logging
log_level = os.getenv('LOG_LEVEL', 'INFO')
logging.basicConfig(
    level=getattr(logging, log_level),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

if __name__ == "__main__":
    cli()
