"""
Emotion Model - command line entry point

Usage: python deep_emotion.py {train-ram,run,resume,analyze} --help
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent / 'src'))

from engine.cli import main

if __name__ == '__main__':
    sys.exit(main())
