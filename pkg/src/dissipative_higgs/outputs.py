"""CSV and manifest writing with all-or-nothing semantics.

Files are staged under temporary names; :meth:`OutputSet.commit` writes the
manifest and then renames every staged file into place.  If anything fails
before that, the staged files are removed, so an output directory never
holds a half-written table.
"""

from __future__ import annotations

import json
import os
import platform
from pathlib import Path

import numpy as np

from . import __version__

__all__ = ["format_value", "csv_text", "OutputSet"]


def format_value(v) -> str:
    """17 significant digits for floats; empty for ``None``/NaN placeholders."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if np.isnan(v):
        return ""
    return f"{v:.16e}"


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(format_value(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


class OutputSet:
    """Staged output files for one run.

    Use as a context manager; leaving the block with an exception discards
    whatever was staged.
    """

    def __init__(self, directory, manifest_name="manifest.json"):
        self.dir = Path(directory)
        self.manifest_name = manifest_name
        self._staged: list[tuple[Path, Path]] = []
        self.written: list[str] = []
        self.committed = False

    def __enter__(self):
        self.dir.mkdir(parents=True, exist_ok=True)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None or not self.committed:
            self.discard()
        return False

    def _stage(self, name):
        final = self.dir / name
        tmp = self.dir / f".{name}.partial"
        self._staged.append((tmp, final))
        return tmp

    def write_csv(self, name, header, rows):
        self._stage(name).write_text(csv_text(header, rows))

    def write_text(self, name, text):
        self._stage(name).write_text(text)

    def figure(self, name, fig):
        """Stage a matplotlib figure (closed after saving)."""
        import matplotlib.pyplot as plt

        tmp = self._stage(name)
        # metadata pinned so identical runs give identical files
        fig.savefig(tmp, format="png", dpi=110, metadata={"Software": None})
        plt.close(fig)

    @property
    def names(self):
        return [final.name for _, final in self._staged]

    def discard(self):
        for tmp, _ in self._staged:
            tmp.unlink(missing_ok=True)
        self._staged = []

    def commit(self, manifest: dict):
        """Write the manifest, then move the staged files into place."""
        body = dict(manifest)
        body["files"] = self.names
        body["code_version"] = __version__
        body["python"] = platform.python_version()
        body["numpy"] = np.__version__
        text = json.dumps(body, indent=2, sort_keys=True, default=_json_default) + "\n"
        (self.dir / self.manifest_name).write_text(text)
        for tmp, final in self._staged:
            os.replace(tmp, final)
        self.written = self.names
        self._staged = []
        self.committed = True
        return self.dir / self.manifest_name
