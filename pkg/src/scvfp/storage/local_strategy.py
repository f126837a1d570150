import logging
import os
from pathlib import Path
from typing import Any, Dict, Iterable, List

logger = logging.getLogger(__name__)


class LocalStrategy:
    EXCLUDED_DIRS = {".git", ".idea", ".venv", "__pycache__"}

    def __init__(self, config: Dict[str, Any]) -> None:
        self.config = config
        self.validate_config()
        self.base_path = Path(self.config["base_path"])

    def validate_config(self) -> bool:
        if not self.config.get("base_path"):
            raise ValueError("LocalStrategy requires 'base_path' in configuration")
        return True

    @staticmethod
    def fast_walk(root: Path) -> Iterable[Path]:
        stack = [root]
        while stack:
            d = stack.pop()
            try:
                with os.scandir(d) as it:
                    for entry in it:
                        if entry.is_dir(follow_symlinks=False):
                            if entry.name not in LocalStrategy.EXCLUDED_DIRS:
                                stack.append(Path(entry.path))
                        elif entry.is_file(follow_symlinks=False):
                            yield Path(entry.path)
            except (PermissionError, FileNotFoundError):
                continue

    def csv_files(self) -> List[Path]:
        """Every ``.csv`` under the base path, sorted so imports are reproducible."""
        if self.base_path.is_file():
            return [self.base_path]
        found = sorted(p for p in self.fast_walk(self.base_path) if p.suffix.lower() == ".csv")
        logger.debug("Found %d CSV files under %s", len(found), self.base_path)
        return found
