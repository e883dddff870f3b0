"""Small file and CSV helpers shared by the report writers.

Every output file is written to a temporary sibling and renamed into
place, so concurrent runs into distinct directories never interleave
and a crashed run never leaves a half-written report.  Floats are
serialized with repr (shortest round-trip form): re-parsing an emitted
file recovers bit-identical values, which is what makes byte-identical
re-runs testable.
"""

from __future__ import annotations

import contextlib
import os
import tempfile
from typing import IO, Iterator


@contextlib.contextmanager
def atomic_writer(path: str) -> Iterator[IO[str]]:
    """Open a text file for writing; move it into place only on success."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            yield handle
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def fmt_float(value: float) -> str:
    """Shortest decimal form that round-trips to the same float64."""
    return repr(float(value))


def fmt_opt_float(value) -> str:
    return "" if value is None else fmt_float(value)


def parse_opt_float(token: str):
    token = token.strip()
    return None if token == "" else float(token)


def fmt_bool(value: bool) -> str:
    return "true" if value else "false"


def parse_bool(token: str) -> bool:
    token = token.strip().lower()
    if token in ("true", "1", "yes"):
        return True
    if token in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {token!r}")
