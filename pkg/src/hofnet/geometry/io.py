"""Plain-text point clouds: one point per line, space-separated coordinates,
``#`` comment lines ignored. Written with 17 significant digits so a
write/read round trip is exact."""
import os
import tempfile

import numpy as np

from ..exceptions import FormatError
from .pointcloud import PointCloud


def format_points(points, header=None):
    pts = np.asarray(getattr(points, "points", points), dtype=np.float64)
    lines = []
    if header:
        lines.extend(f"# {h}" for h in str(header).splitlines())
    lines.extend(" ".join(f"{v:.17g}" for v in row) for row in pts)
    return "\n".join(lines) + "\n"


def parse_points(text, label=""):
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rows.append([float(tok) for tok in line.split(" ") if tok])
        except ValueError:
            raise FormatError(f"line {lineno}: not a list of numbers: {line!r}") from None
    if not rows:
        raise FormatError("no points found")
    if len({len(r) for r in rows}) != 1:
        raise FormatError("rows have differing numbers of coordinates")
    return PointCloud(np.array(rows), label=label)


def atomic_write(path, data):
    """Write ``data`` (str or bytes) to ``path`` via a temp file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    mode = "wb" if isinstance(data, (bytes, bytearray)) else "w"
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_points(path, points, header=None):
    atomic_write(path, format_points(points, header))


def read_points(path):
    with open(path) as fh:
        return parse_points(fh.read(), label=os.path.basename(os.fspath(path)))
