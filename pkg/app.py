"""
IFC Workbench
Entry point: `python app.py <command> [options]`. See `python app.py --help`.
"""
import sys

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
