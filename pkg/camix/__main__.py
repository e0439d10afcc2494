"""Entry point for `python -m camix`."""

from cli.main import main

if __name__ == "__main__":
    main()
