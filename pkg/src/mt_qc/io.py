"""File helpers shared by the corpus, features and model modules."""

from __future__ import annotations

import logging
import os
import tempfile
from pathlib import Path

logger = logging.getLogger("mt-qc.io")


def read_lines(path: str | Path) -> list[str]:
    """Read a UTF-8 text file as a list of lines without line terminators.

    A single trailing newline does not produce an extra empty line.
    """
    text = Path(path).read_text(encoding="utf-8")
    if not text:
        return []
    lines = text.split("\n")
    if lines[-1] == "":
        lines.pop()
    return [line[:-1] if line.endswith("\r") else line for line in lines]


def write_text_atomic(path: str | Path, content: str) -> Path:
    """Write UTF-8 text with `\\n` line endings through a temp file and rename.

    Readers never observe a half-written file and concurrent writers to the
    same path leave one complete version behind.
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(content)
        os.replace(tmp_name, target)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    logger.debug(f"Wrote {target} ({len(content)} characters)")
    return target
