"""
Utility functions for ringswap.
"""

from pathlib import Path
from typing import List, Optional


def find_configs(input_dir: Path, exclude_patterns: Optional[List[str]] = None) -> List[Path]:
    """Run configs (*.yaml, *.yml) in a directory, sorted by name, skipping profile files."""
    if exclude_patterns is None:
        exclude_patterns = ['_profile', '_temp', '.backup']

    files = []
    for pattern in ("*.yaml", "*.yml"):
        for file in input_dir.glob(pattern):
            if any(p in file.stem for p in exclude_patterns):
                continue
            files.append(file)
    return sorted(files)


def resolve_output(path: str, base_dir: Path) -> Path:
    """Relative output paths in a config are relative to the config's directory."""
    candidate = Path(path)
    if not candidate.is_absolute():
        candidate = base_dir / candidate
    return candidate.resolve()


def short_hex(data: bytes, width: int = 16) -> str:
    text = data.hex()
    return text if len(text) <= width else text[:width] + "…"
