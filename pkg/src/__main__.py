"""
Entry point for `python -m src` or direct execution.
"""
from cli import main

if __name__ == "__main__":
    main()
