"""Reading and writing run artifacts and reports."""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
from pathlib import Path
from typing import Iterable

import numpy as np

from ..expert import DemoDataset
from ..worldgen import WorldMap, get_table

SCHEMA = "navgap.demos/1"
_FIELDS = ("world_id", "episode", "t", "pose", "goal", "rgb", "depth", "sem", "action")


class DatasetError(ValueError):
    def __init__(self, msg: str, line: int | None = None):
        super().__init__(msg if line is None else f"line {line}: {msg}")
        self.line = line


def write_jsonl(path, lines: Iterable[str]) -> None:
    with open(path, "w") as f:
        for line in lines:
            f.write(line)
            f.write("\n")


def tables_hash(tables: list[str]) -> str:
    blob = json.dumps([get_table(t).to_dict() for t in tables], sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def manifest_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.name + ".manifest.json")


def save_dataset(ds: DemoDataset, path) -> None:
    """Samples as JSONL in the trajectory format, plus ``<path>.manifest.json``.

    Floats are written with ``repr`` precision, so a round trip is lossless.
    """
    write_jsonl(path, ds.iter_jsonl())
    manifest = {
        "schema": SCHEMA,
        "count": len(ds),
        "n_rays": ds.n_rays,
        "tables": list(ds.tables),
        "tables_hash": tables_hash(ds.tables),
        "provenance": ds.provenance,
    }
    manifest_path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_dataset(path) -> DemoDataset:
    """Inverse of :func:`save_dataset`; corrupt or mismatched input raises :class:`DatasetError`."""
    try:
        manifest = json.loads(manifest_path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise DatasetError(f"missing or corrupt manifest for {path}: {e}") from None
    if manifest.get("schema") != SCHEMA:
        raise DatasetError(f"unsupported schema {manifest.get('schema')!r}")
    tables = list(manifest.get("tables", []))
    try:
        if tables_hash(tables) != manifest.get("tables_hash"):
            raise DatasetError("category table hash mismatch")
    except ValueError as e:
        if isinstance(e, DatasetError):
            raise
        raise DatasetError(str(e)) from None
    n, r = int(manifest["count"]), int(manifest["n_rays"])
    with open(path) as f:
        lines = f.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) > n:
        raise DatasetError(f"more samples than the manifest count {n}", n + 1)
    ds = DemoDataset(
        world_id=np.zeros(n, dtype=np.int64), episode=np.zeros(n, dtype=np.int64), t=np.zeros(n, dtype=np.int64),
        pose=np.zeros((n, 3)), goal=np.zeros((n, 2)), rgb=np.zeros((n, r, 3)), depth=np.zeros((n, r)),
        sem=np.zeros((n, r), dtype=np.int64), action=np.zeros(n, dtype=np.int64), tables=tables,
        provenance=manifest.get("provenance", {}),
    )
    for k, line in enumerate(lines):
        lineno = k + 1
        try:
            d = json.loads(line)
            if not isinstance(d, dict) or set(d) != set(_FIELDS):
                raise ValueError("fields do not match the sample schema")
            for name in _FIELDS:
                arr = getattr(ds, name)
                val = np.asarray(d[name], dtype=arr.dtype)
                if val.shape != arr.shape[1:]:
                    raise ValueError(f"{name} has shape {val.shape}, expected {arr.shape[1:]}")
                arr[k] = val
            if not 0 <= d["world_id"] < len(tables):
                raise ValueError(f"world_id {d['world_id']} out of range")
            if d["action"] not in (0, 1, 2):
                raise ValueError(f"invalid action {d['action']}")
        except (json.JSONDecodeError, ValueError, TypeError) as e:
            raise DatasetError(f"{e} (last valid line {lineno - 1})", lineno) from None
    if len(lines) < n:
        raise DatasetError(f"truncated after {len(lines)} of {n} samples (last valid line {len(lines)})",
                           len(lines) + 1)
    for w, name in enumerate(tables):
        rows = ds.sem[ds.world_id == w]
        if rows.size and (rows.min() < 0 or rows.max() >= len(get_table(name))):
            raise DatasetError(f"semantic ids out of range for table {name!r}")
    return ds


def save_worlds(directory, prefix: str, worlds: list[WorldMap]) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for k, w in enumerate(worlds):
        (d / f"{prefix}-{k:03d}.json").write_text(w.to_json())


def load_worlds(directory, prefix: str) -> list[WorldMap]:
    files = sorted(Path(directory).glob(f"{prefix}-*.json"))
    return [WorldMap.from_json(f.read_text()) for f in files]


# reports

CSV_COLUMNS = ("environment", "preset", "N", "SR", "SPL")


def _num(v: float) -> str:
    return f"{v:.4f}"


def report_csv(report) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.results:
        w.writerow([r["environment"], r["preset"], r["N"], repr(float(r["SR"])), repr(float(r["SPL"]))])
    return buf.getvalue()


def _ordered(items):
    return list(dict.fromkeys(items))


def report_markdown(report) -> str:
    """Two tables: SR / SPL per preset and environment, then d_A per representation."""
    envs = _ordered(r["environment"] for r in report.results)
    presets = _ordered(r["preset"] for r in report.results)
    cell = {(r["environment"], r["preset"]): r for r in report.results}
    out = [f"## Navigation (config {report.config_hash}, seed {report.seed})", ""]
    out.append("| preset | " + " | ".join(f"{e} SR | {e} SPL" for e in envs) + " | avg SR |")
    out.append("|---|" + "---|---|" * len(envs) + "---|")
    for p in presets:
        row = [p]
        srs = []
        for e in envs:
            c = cell.get((e, p))
            if c is None:
                row += ["", ""]
            else:
                row += [_num(c["SR"]), _num(c["SPL"])]
                srs.append(c["SR"])
        row.append(_num(sum(srs) / len(srs)) if srs else "")
        out.append("| " + " | ".join(row) + " |")
    out.append("")
    if report.adistance:
        aenvs = _ordered(r["environment"] for r in report.adistance)
        reps = _ordered(r["representation"] for r in report.adistance)
        da = {(r["environment"], r["representation"]): r["d_a"] for r in report.adistance}
        out += ["## Domain gap d_A (target vs source)", ""]
        out.append("| representation | " + " | ".join(aenvs) + " |")
        out.append("|---|" + "---|" * len(aenvs))
        for rep in reps:
            out.append("| " + " | ".join([rep] + [_num(da[(e, rep)]) if (e, rep) in da else "" for e in aenvs])
                       + " |")
        out.append("")
    if report.bounds:
        out += ["## Target error bound", ""]
        out.append("| environment | preset | eps_S | d_A | lambda | bound |")
        out.append("|---|---|---|---|---|---|")
        for b in report.bounds:
            if b["bound"] is None:
                continue
            i = b["inputs"]
            out.append(f"| {b['environment']} | {b['preset']} | {_num(i['eps_s_hat'])} | {_num(i['d_a'])} | "
                       f"{_num(i['lambda'])} | {_num(b['bound'])} |")
        out.append("")
    return "\n".join(out)


def parse_markdown(text: str) -> dict:
    """Read back the numbers of :func:`report_markdown` as ``{"SR": {(env, preset): v}, ...}``."""
    out = {"SR": {}, "SPL": {}, "d_a": {}}
    section = None
    header = []
    for line in text.splitlines():
        if line.startswith("## "):
            section = "nav" if line.startswith("## Navigation") else "da" if "d_A" in line else "other"
            header = []
            continue
        if not line.startswith("|") or line.startswith("|---"):
            continue
        cells = [c.strip() for c in line.strip("|").split("|")]
        if not header:
            header = cells
            continue
        if section == "nav":
            for h, v in zip(header[1:], cells[1:]):
                if v and h != "avg SR":
                    env, metric = h.rsplit(" ", 1)
                    out[metric][(env, cells[0])] = float(v)
        elif section == "da":
            for env, v in zip(header[1:], cells[1:]):
                if v:
                    out["d_a"][(env, cells[0])] = float(v)
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def report_json(report) -> str:
    return json.dumps(_jsonable(report.to_dict()), indent=2, sort_keys=True) + "\n"


def emit_report(report, directory, formats=("json", "csv", "markdown")) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    writers = {"json": ("report.json", report_json), "csv": ("report.csv", report_csv),
               "markdown": ("report.md", report_markdown)}
    paths = []
    for fmt in formats:
        if fmt not in writers:
            raise ValueError(f"unknown report format {fmt!r}")
        name, fn = writers[fmt]
        p = d / name
        p.write_text(fn(report))
        paths.append(p)
    return paths


def strip_wall_clock(report_dict: dict) -> dict:
    d = dict(report_dict)
    d.pop("timing", None)
    return d
