"""Ready-made experiment configs shipped with the package."""
from pathlib import Path
import typing as t


def _recipes_dir(recipes_dir: t.Optional[str]) -> Path:
    return Path(recipes_dir) if recipes_dir is not None else Path(__file__).resolve().parent


def recipe_path(recipe_name: str, recipes_dir: t.Optional[str] = None) -> Path:
    """
    Path of a recipe file.

    Args:
        recipe_name: Name of the recipe file (without .json extension)
        recipes_dir: Optional custom path to the recipes directory.
                    Defaults to this module's parent directory.

    Raises:
        FileNotFoundError: If the recipe file doesn't exist.
    """
    recipe_file = _recipes_dir(recipes_dir) / f"{recipe_name}.json"
    if not recipe_file.exists():
        raise FileNotFoundError(f"Recipe file not found: {recipe_file}")
    return recipe_file


def load_recipe(recipe_name: str, recipes_dir: t.Optional[str] = None) -> str:
    """
    Load a recipe as text.

    Raises:
        FileNotFoundError: If the recipe file doesn't exist.
        IOError: If there's an error reading the file.
    """
    recipe_file = recipe_path(recipe_name, recipes_dir)
    try:
        return recipe_file.read_text(encoding="utf-8")
    except IOError as e:
        raise IOError(f"Error reading recipe file {recipe_file}: {e}")


def list_recipes(recipes_dir: t.Optional[str] = None) -> list[str]:
    return sorted(p.stem for p in _recipes_dir(recipes_dir).glob("*.json"))
