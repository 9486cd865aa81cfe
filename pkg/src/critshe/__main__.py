"""``python -m critshe`` dispatches to the command-line front end."""

from .cli import main

if __name__ == "__main__":
    main()
