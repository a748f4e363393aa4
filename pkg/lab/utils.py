"""Utility functions for the lab command line."""
from pathlib import Path

from rich.console import Console

console = Console()
err_console = Console(stderr=True)


def expand_config_paths(paths: tuple[str, ...]) -> list[str]:
    """Expand paths to include all JSON configs in directories.

    Args:
        paths: Tuple of file paths and/or directory paths

    Returns:
        List of config file paths with directories expanded

    Raises:
        SystemExit: If a path does not exist or a directory contains no JSON files
    """
    config_files: list[str] = []

    for path_str in paths:
        path = Path(path_str)

        if path.is_file():
            config_files.append(path_str)
        elif path.is_dir():
            configs_in_dir = sorted(path.glob("*.json"))

            if not configs_in_dir:
                err_console.print(
                    f"[red]Error:[/red] Directory '{path_str}' contains no JSON config files.",
                )
                raise SystemExit(2)

            config_files.extend(str(p) for p in configs_in_dir)
        else:
            err_console.print(
                f"[red]Error:[/red] Path '{path_str}' does not exist.",
            )
            raise SystemExit(2)

    return config_files
