"""Network description files, CSV emission and atomic writes."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .density import Category, PointInjection
from .errors import FeederflowError
from .network import FeederNetwork, Node, NodeKind, Segment
from .profile import Profile

PROFILE_COLUMNS = ("segment_id", "x_km", "theta_rad", "v_pu", "s_pu", "w_pu_per_km")


class ConfigError(FeederflowError, ValueError):
    code = "config_parse"

    def __init__(self, message, location=None):
        self.location = location or {}
        super().__init__(message)


@dataclass(frozen=True)
class Case:
    network: FeederNetwork
    injections: tuple[PointInjection, ...]
    sigma_km: float | None = None
    name: str = ""


def _get(obj, key, where, kind=None):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object", {"path": where})
    if key not in obj:
        raise ConfigError(f"{where}.{key} is missing", {"path": f"{where}.{key}"})
    val = obj[key]
    if kind is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"{where}.{key} must be a number", {"path": f"{where}.{key}"})
        return float(val)
    if kind is str and not isinstance(val, str):
        raise ConfigError(f"{where}.{key} must be a string", {"path": f"{where}.{key}"})
    return val


def _enum(cls, raw, where):
    try:
        return cls(str(raw).lower())
    except ValueError:
        allowed = ", ".join(m.value for m in cls)
        raise ConfigError(f"{where} = {raw!r}; expected one of {allowed}", {"path": where}) from None


def parse_case(text: str, source: str = "<string>") -> Case:
    """Parse a network description (segments, nodes, injections) from JSON text.

    The network is *not* validated here; see :func:`feederflow.network.validate`.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: invalid JSON: {exc.msg}",
                          {"file": source, "line": exc.lineno, "column": exc.colno}) from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: top level must be an object", {"file": source})

    segments = []
    for i, raw in enumerate(_get(doc, "segments", "$")):
        where = f"segments[{i}]"
        segments.append(Segment(
            id=str(_get(raw, "id", where)),
            length=_get(raw, "length_km", where, float),
            G=_get(raw, "G", where, float),
            B=_get(raw, "B", where, float),
            upstream=str(_get(raw, "upstream", where)),
            downstream=str(_get(raw, "downstream", where)),
        ))
    nodes = []
    for i, raw in enumerate(_get(doc, "nodes", "$")):
        where = f"nodes[{i}]"
        ratio = raw.get("turn_ratio") if isinstance(raw, dict) else None
        if ratio is not None and (isinstance(ratio, bool) or not isinstance(ratio, (int, float))):
            raise ConfigError(f"{where}.turn_ratio must be a number", {"path": f"{where}.turn_ratio"})
        nodes.append(Node(str(_get(raw, "id", where)),
                          _enum(NodeKind, _get(raw, "kind", where), f"{where}.kind"),
                          None if ratio is None else float(ratio)))
    injections = []
    for i, raw in enumerate(doc.get("injections", [])):
        where = f"injections[{i}]"
        injections.append(PointInjection(
            segment=str(_get(raw, "segment", where)),
            xi=_get(raw, "xi_km", where, float),
            P=_get(raw, "P_pu", where, float),
            Q=float(raw.get("Q_pu", 0.0)),
            category=_enum(Category, raw.get("category", "load"), f"{where}.category"),
        ))
    sigma = doc.get("sigma_km")
    if sigma is not None and (isinstance(sigma, bool) or not isinstance(sigma, (int, float))):
        raise ConfigError("sigma_km must be a number", {"path": "$.sigma_km"})
    return Case(FeederNetwork(tuple(segments), tuple(nodes)), tuple(injections),
                None if sigma is None else float(sigma), str(doc.get("name", "")))


def bundled(name: str) -> Path:
    """Path of a configuration shipped with the package (e.g. ``simple5km.json``)."""
    return Path(str(resources.files("feederflow") / "data" / name))


def resolve(path) -> Path:
    """``path`` itself if it exists, else the bundled file of the same name if there is one."""
    p = Path(path)
    if not p.exists() and bundled(p.name).exists():
        return bundled(p.name)
    return p


def load_case(path) -> Case:
    p = resolve(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise FeederflowIOError(f"cannot read {p}: {exc.strerror or exc}") from exc
    return parse_case(text, str(p))


class FeederflowIOError(FeederflowError, OSError):
    code = "io"


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _num(v):
    return "" if v is None else repr(float(v))


def profile_csv(profile: Profile, theta=True, s=True) -> str:
    """Profile as CSV text; ``theta``/``s`` False leaves those columns empty."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PROFILE_COLUMNS)
    grid = profile.grid
    for sid in grid:
        seg = profile.segment(sid)
        for k, x in enumerate(seg["x"]):
            writer.writerow([sid, _num(x), _num(seg["theta"][k]) if theta else "",
                             _num(seg["v"][k]), _num(seg["s"][k]) if s else "",
                             _num(seg["w"][k])])
    return buf.getvalue()


def field_csv(grid, columns: dict) -> str:
    """CSV with segment_id, x_km and one column per entry of ``columns`` (flat arrays)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["segment_id", "x_km", *columns])
    for sid in grid:
        sl = grid.slice(sid)
        cols = [c[sl] for c in columns.values()]
        for k, x in enumerate(grid.x[sid]):
            writer.writerow([sid, _num(x), *(_num(c[k]) for c in cols)])
    return buf.getvalue()


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
