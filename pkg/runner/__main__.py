"""Allows running the solver as: python -m runner <command> --config run.json"""
import sys

from runner.cli import main

sys.exit(main())
