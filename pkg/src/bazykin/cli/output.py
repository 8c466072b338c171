"""Single writer for everything a run emits, plus the manifest."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os

import numpy as np

from .. import __version__

MANIFEST = "manifest.json"


def cell(x) -> str:
    """Shortest round-trip text for floats, plain text otherwise."""
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if np.isnan(x):
            return "nan"
        return repr(x)
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if x is None:
        return ""
    return str(x)


class OutputWriter:
    """Writes artifacts below ``root`` and remembers each one."""

    def __init__(self, root):
        self.root = os.path.abspath(root)
        os.makedirs(self.root, exist_ok=True)
        self.artifacts = []

    def _path(self, name: str) -> str:
        path = os.path.abspath(os.path.join(self.root, name))
        if os.path.commonpath([path, self.root]) != self.root:
            raise ValueError(f"refusing to write outside the output directory: {name}")
        os.makedirs(os.path.dirname(path), exist_ok=True)
        return path

    def text(self, name: str, content: str, kind: str) -> str:
        data = content.encode()
        with open(self._path(name), "wb") as fh:
            fh.write(data)
        self.artifacts.append({"path": name, "kind": kind, "bytes": len(data),
                               "sha256": hashlib.sha256(data).hexdigest()})
        return name

    def csv(self, name: str, header, rows) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([cell(x) for x in r])
        return self.text(name, buf.getvalue(), "csv")

    def json(self, name: str, obj) -> str:
        return self.text(name, json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n", "json")

    def svg(self, name: str, fig) -> str:
        return self.text(name, fig.render(), "svg")

    def manifest(self, scenario: dict, status: str, exit_code: int, summary: dict) -> str:
        doc = {
            "tool": "bazykin",
            "version": __version__,
            "scenario": scenario,
            "status": status,
            "exit_code": exit_code,
            "summary": summary,
            "artifacts": list(self.artifacts),
        }
        data = json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n"
        with open(self._path(MANIFEST), "w") as fh:
            fh.write(data)
        return MANIFEST


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if hasattr(x, "value"):
        return x.value
    raise TypeError(f"not serialisable: {type(x).__name__}")
