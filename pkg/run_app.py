import sys
import os

# Add the project root directory to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.experiments.cli import main

if __name__ == "__main__":
    sys.exit(main())
