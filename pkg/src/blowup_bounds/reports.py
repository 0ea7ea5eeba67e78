"""Run manifests and deterministic JSON/CSV serialization.

Every emitted artifact embeds (JSON) or sits next to (CSV sidecar) a
manifest recording the subcommand, parsed arguments, tool version,
timestamp, and a hash of the canonical argument encoding.  All floats are
written with 17 significant digits so double-precision values round-trip
losslessly and reruns of a manifest reproduce identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from . import __version__


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _encode(obj, out: list, indent: int):
    pad = "  " * indent
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(_json_string(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(f"{pad}  {_json_string(str(k))}: ")
            _encode(v, out, indent + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            out.append("[]")
            return
        out.append("[\n")
        for i, v in enumerate(seq):
            out.append(pad + "  ")
            _encode(v, out, indent + 1)
            out.append(",\n" if i < len(seq) - 1 else "\n")
        out.append(pad + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def _json_string(s: str) -> str:
    escaped = s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
    return f'"{escaped}"'


def dumps_json(obj) -> str:
    out: list[str] = []
    _encode(obj, out, 0)
    return "".join(out) + "\n"


@dataclass(frozen=True)
class RunManifest:
    """Provenance block embedded in every artifact."""

    subcommand: str
    args: dict
    version: str
    timestamp: str
    input_hash: str

    def to_dict(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "args": self.args,
            "version": self.version,
            "timestamp": self.timestamp,
            "input_hash": self.input_hash,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(d["subcommand"], d["args"], d["version"], d["timestamp"], d["input_hash"])


def make_manifest(subcommand: str, args: dict, timestamp: str | None = None) -> RunManifest:
    canonical = dumps_json({"subcommand": subcommand, "args": args})
    digest = hashlib.sha256(canonical.encode()).hexdigest()
    if timestamp is None:
        timestamp = datetime.now(timezone.utc).isoformat()
    return RunManifest(subcommand, args, __version__, timestamp, digest)


def render_report(result: dict, manifest: RunManifest) -> str:
    """JSON artifact text: the result payload with its manifest embedded."""
    body = dict(result)
    body["manifest"] = manifest.to_dict()
    return dumps_json(body)


def render_csv(columns: list[str], rows) -> str:
    """CSV text with a header row; floats at 17 significant digits, None empty."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        if isinstance(row, dict):
            row = [row.get(c) for c in columns]
        cells = []
        for v in row:
            if v is None:
                cells.append("")
            elif isinstance(v, (float, np.floating)):
                cells.append(format_float(v))
            elif isinstance(v, (int, np.integer)) and not isinstance(v, bool):
                cells.append(str(int(v)))
            else:
                cells.append(str(v))
        writer.writerow(cells)
    return buf.getvalue()


def manifest_sidecar_path(path: str) -> str:
    return path + ".manifest.json"
