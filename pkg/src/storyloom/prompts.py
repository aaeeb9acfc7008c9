"""Prompt template loading.

Templates are plain text files with {placeholder} fields. The shipped set
lives in the package; a directory override lets users edit any of them
without touching code.
"""

from __future__ import annotations

import configparser
from importlib import resources
from pathlib import Path

_PACKAGE_TEMPLATES = "storyloom.templates"


class TemplateStore:
    """Named prompt templates, shipped defaults with optional directory override."""

    def __init__(self, override_dir: str | Path | None = None):
        self.override_dir = Path(override_dir) if override_dir else None
        self._cache: dict[str, str] = {}

    def raw(self, template_name: str) -> str:
        if template_name not in self._cache:
            self._cache[template_name] = self._load(template_name)
        return self._cache[template_name]

    def render(self, template_name: str, **fields: str) -> str:
        return self.raw(template_name).format(**fields)

    def draft_segments(self) -> tuple[dict[str, str], dict[str, str]]:
        """Segment templates and options for the mid-story prompt."""
        parser = configparser.ConfigParser()
        parser.optionxform = str  # keep key case
        parser.read_string(self._load("draft_segments.cfg", strip=False))
        segments = {k: v.replace("\\n", "\n") for k, v in parser["segments"].items()}
        options = {k: v.replace("\\n", "\n") for k, v in parser["options"].items()}
        return segments, options

    def _load(self, name: str, strip: bool = True) -> str:
        filename = name if "." in name else f"{name}.txt"
        if self.override_dir is not None:
            candidate = self.override_dir / filename
            if candidate.exists():
                text = candidate.read_text(encoding="utf-8")
                return text.rstrip("\n") if strip else text
        text = (
            resources.files(_PACKAGE_TEMPLATES).joinpath(filename).read_text("utf-8")
        )
        return text.rstrip("\n") if strip else text
