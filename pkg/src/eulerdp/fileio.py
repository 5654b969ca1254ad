"""Text formats for histograms, bodies, tracks, and experiment configs.

Everything here is line-oriented and human-diffable. Histogram files
round-trip bit-exactly: real-valued counts are written with repr precision,
integral states as plain integers. Released files carry only public
parameters; seeds and noise draws are never written.
"""

from __future__ import annotations

import json
from typing import TextIO

import numpy as np

from .geometry import ConvexBody
from .grid import GridPartition, build_partition
from .histogram import EulerHistogram, HistogramState, INTEGRAL_STATES
from .ingest import IngestError, UserTrack

MAGIC = "euler-histogram v1"


class FormatError(ValueError):
    pass


def _fmt(value: float, integral: bool) -> str:
    return str(int(value)) if integral else repr(float(value))


def _sections(p: GridPartition) -> list[tuple[str, int, int]]:
    n = p.n
    return [
        ("faces", n, n),
        ("horizontal-edges", n - 1, n),
        ("vertical-edges", n, n - 1),
        ("vertices", n - 1, n - 1),
    ]


def write_histogram(h: EulerHistogram, stream: TextIO) -> None:
    p = h.partition
    integral = h.state in INTEGRAL_STATES
    lines = [
        MAGIC,
        f"state: {h.state.value}",
        f"area_side: {p.area_side!r}",
        f"n: {p.n}",
        f"cell_side: {p.cell_side!r}",
        f"origin_x: {p.origin[0]!r}",
        f"origin_y: {p.origin[1]!r}",
    ]
    if h.epsilon is not None:
        lines.append(f"epsilon: {h.epsilon!r}")
    if h.diameter_bound is not None:
        lines.append(f"diameter_bound: {h.diameter_bound!r}")
    offset = 0
    for name, rows, cols in _sections(p):
        lines.append(f"{name} {rows} {cols}")
        block = h.counts[offset : offset + rows * cols].reshape(rows, cols)
        for row in block:
            lines.append(" ".join(_fmt(v, integral) for v in row))
        offset += rows * cols
    stream.write("\n".join(lines) + "\n")


def write_histogram_file(h: EulerHistogram, path: str) -> None:
    with open(path, "w") as f:
        write_histogram(h, f)


def read_histogram(stream: TextIO) -> EulerHistogram:
    lines = stream.read().splitlines()
    if not lines or lines[0] != MAGIC:
        raise FormatError(f"not a histogram file (expected {MAGIC!r} header)")
    header: dict[str, str] = {}
    i = 1
    while i < len(lines) and ": " in lines[i]:
        key, _, value = lines[i].partition(": ")
        header[key] = value
        i += 1
    try:
        state = HistogramState(header["state"])
        area_side = float(header["area_side"])
        n = int(header["n"])
    except (KeyError, ValueError) as e:
        raise FormatError(f"bad or missing header field: {e}") from e
    origin = (float(header.get("origin_x", "0.0")), float(header.get("origin_y", "0.0")))
    p = build_partition(area_side, n, origin)
    if "cell_side" in header and float(header["cell_side"]) != p.cell_side:
        raise FormatError("cell_side is inconsistent with area_side and n")
    epsilon = float(header["epsilon"]) if "epsilon" in header else None
    bound = float(header["diameter_bound"]) if "diameter_bound" in header else None

    counts = np.empty(p.size)
    offset = 0
    for name, rows, cols in _sections(p):
        if i >= len(lines) or lines[i] != f"{name} {rows} {cols}":
            raise FormatError(f"expected section header {name!r} at line {i + 1}")
        i += 1
        for r in range(rows):
            if i >= len(lines):
                raise FormatError(f"truncated section {name!r}")
            values = lines[i].split()
            if len(values) != cols:
                raise FormatError(f"section {name!r} row {r}: expected {cols} values")
            counts[offset + r * cols : offset + (r + 1) * cols] = [float(v) for v in values]
            i += 1
        offset += rows * cols
    if not np.all(np.isfinite(counts)):
        raise FormatError("non-finite count")
    if state in INTEGRAL_STATES and not np.array_equal(counts, np.floor(counts)):
        raise FormatError(f"{state.value} histogram contains non-integral counts")
    return EulerHistogram(p, counts, state, epsilon=epsilon, diameter_bound=bound)


def read_histogram_file(path: str) -> EulerHistogram:
    with open(path) as f:
        return read_histogram(f)


def write_bodies(
    bodies: list[ConvexBody], stream: TextIO, user_ids: list[str] | None = None
) -> None:
    """One JSON record per line: user id plus the ordered vertex list."""
    if user_ids is None:
        user_ids = [f"u{i}" for i in range(len(bodies))]
    if len(user_ids) != len(bodies):
        raise FormatError("user_ids and bodies length mismatch")
    for uid, body in zip(user_ids, bodies):
        record = {"user_id": uid, "vertices": body.vertices.tolist()}
        stream.write(json.dumps(record) + "\n")


def write_bodies_file(bodies: list[ConvexBody], path: str, user_ids: list[str] | None = None) -> None:
    with open(path, "w") as f:
        write_bodies(bodies, f, user_ids)


def read_bodies(stream: TextIO) -> tuple[list[ConvexBody], list[str]]:
    bodies: list[ConvexBody] = []
    ids: list[str] = []
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
            ids.append(str(record["user_id"]))
            bodies.append(ConvexBody(np.asarray(record["vertices"], dtype=np.float64)))
        except (json.JSONDecodeError, KeyError, ValueError) as e:
            raise FormatError(f"bodies line {lineno}: {e}") from e
    return bodies, ids


def read_bodies_file(path: str) -> tuple[list[ConvexBody], list[str]]:
    with open(path) as f:
        return read_bodies(f)


def read_tracks(stream: TextIO) -> list[UserTrack]:
    """Parse ``user_id, lat, lon[, timestamp]`` lines, grouped per user in
    first-appearance order. Blank lines and '#' comments are skipped; a
    leading column-name row is tolerated."""
    order: list[str] = []
    points: dict[str, list[tuple[float, float]]] = {}
    stamps: dict[str, list[str]] = {}
    first_data = True
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) not in (3, 4):
            raise IngestError(f"tracks line {lineno}: expected 3 or 4 fields, got {len(parts)}")
        try:
            lat, lon = float(parts[1]), float(parts[2])
        except ValueError:
            if first_data and parts[0].lower() == "user_id":
                continue
            raise IngestError(f"tracks line {lineno}: bad coordinates {parts[1]!r}, {parts[2]!r}")
        first_data = False
        uid = parts[0]
        if uid not in points:
            order.append(uid)
            points[uid] = []
            stamps[uid] = []
        points[uid].append((lat, lon))
        if len(parts) == 4:
            stamps[uid].append(parts[3])
    tracks = []
    for uid in order:
        ts = tuple(stamps[uid]) if len(stamps[uid]) == len(points[uid]) and stamps[uid] else None
        tracks.append(UserTrack(uid, np.array(points[uid]), ts))
    return tracks


def read_tracks_file(path: str) -> list[UserTrack]:
    with open(path) as f:
        return read_tracks(f)


def read_config(stream: TextIO) -> dict[str, str]:
    """Flat ``key = value`` pairs; '#' comments; later keys win."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"config line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def read_config_file(path: str) -> dict[str, str]:
    with open(path) as f:
        return read_config(f)
