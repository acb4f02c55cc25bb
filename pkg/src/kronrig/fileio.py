"""Plain-text file formats for matrices, certificates, and reports.

Everything is UTF-8, line-oriented, and diff-friendly.  Comment lines
start with '#' and blank lines are skipped; rendering is deterministic,
so identical objects produce identical bytes.

Matrix files carry a four-line header (field / rows / cols / format)
followed by either row-major dense entries or 0-based "i j value"
triplets.  Certificate files store the three witness blocks as triplet
lists plus the claimed budgets; the in-memory ``meta`` dict is runtime
provenance and is deliberately not persisted.  Reports are "key: value"
lines followed by a single machine-readable JSON line.
"""

import json
from fractions import Fraction

import numpy as np

from .cert import Certificate
from .field import field_from_header
from .matrix import ExactMatrix

__all__ = [
    "FileFormatError",
    "render_matrix",
    "parse_matrix",
    "read_matrix",
    "write_matrix",
    "render_cert",
    "parse_cert",
    "read_cert",
    "write_cert",
    "render_report",
    "write_report",
]


class FileFormatError(ValueError):
    pass


def _content_lines(text):
    """(line_number, stripped_text) for every non-comment, non-blank line."""
    out = []
    for no, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if s and not s.startswith("#"):
            out.append((no, s))
    return out


class _LineReader:
    def __init__(self, text):
        self.lines = _content_lines(text)
        self.pos = 0

    def next(self, what):
        if self.pos >= len(self.lines):
            raise FileFormatError(f"unexpected end of file, expected {what}")
        no, s = self.lines[self.pos]
        self.pos += 1
        return no, s

    def key(self, name):
        no, s = self.next(f"'{name}:'")
        head, _, rest = s.partition(":")
        if head.strip() != name:
            raise FileFormatError(f"line {no}: expected '{name}:', got {s!r}")
        return no, rest.strip()

    def int_key(self, name):
        no, raw = self.key(name)
        try:
            return int(raw)
        except ValueError:
            raise FileFormatError(
                f"line {no}: '{name}' needs an integer, got {raw!r}") from None

    def exhausted(self):
        return self.pos >= len(self.lines)


# ----------------------------------------------------------------------
# matrices


def render_matrix(m, fmt=None):
    if fmt is None:
        fmt = "dense" if m.is_dense else "sparse"
    if fmt not in ("dense", "sparse"):
        raise ValueError(f"format must be dense or sparse, got {fmt!r}")
    f = m.field
    out = [f"field: {f.header}", f"rows: {m.rows}", f"cols: {m.cols}",
           f"format: {fmt}"]
    if fmt == "dense":
        if m.cols > 0:  # zero-width rows would render as blank lines
            arr = m.to_dense()
            for i in range(m.rows):
                out.append(" ".join(f.fmt(v) for v in arr[i]))
    else:
        ri, ci, vals = m.triplets()
        for i, j, v in zip(ri, ci, vals):
            out.append(f"{int(i)} {int(j)} {f.fmt(v)}")
    return "\n".join(out) + "\n"


def _parse_value(field, tok, no):
    try:
        return field.parse(tok)
    except ValueError as e:
        raise FileFormatError(f"line {no}: {e}") from None


def parse_matrix(text):
    rd = _LineReader(text)
    _, header = rd.key("field")
    try:
        f = field_from_header(header)
    except ValueError as e:
        raise FileFormatError(str(e)) from None
    rows = rd.int_key("rows")
    cols = rd.int_key("cols")
    no, fmt = rd.key("format")
    if fmt == "dense":
        if rows == 0 or cols == 0:
            m = ExactMatrix.zeros(f, rows, cols)
        else:
            data = []
            for _ in range(rows):
                no, s = rd.next(f"a row of {cols} entries")
                toks = s.split()
                if len(toks) != cols:
                    raise FileFormatError(
                        f"line {no}: expected {cols} entries, got {len(toks)}")
                data.append([_parse_value(f, t, no) for t in toks])
            m = ExactMatrix.from_dense(f, data)
    elif fmt == "sparse":
        trips = []
        while not rd.exhausted():
            no, s = rd.next("a triplet")
            toks = s.split()
            if len(toks) != 3:
                raise FileFormatError(
                    f"line {no}: expected 'i j value', got {s!r}")
            try:
                i, j = int(toks[0]), int(toks[1])
            except ValueError:
                raise FileFormatError(
                    f"line {no}: bad indices in {s!r}") from None
            if not (0 <= i < rows and 0 <= j < cols):
                raise FileFormatError(
                    f"line {no}: index ({i}, {j}) outside {rows}x{cols}")
            trips.append((i, j, _parse_value(f, toks[2], no)))
        m = ExactMatrix.from_triplets(f, rows, cols, trips)
    else:
        raise FileFormatError(
            f"line {no}: format must be dense or sparse, got {fmt!r}")
    if not rd.exhausted():
        no, s = rd.lines[rd.pos]
        raise FileFormatError(f"line {no}: trailing content {s!r}")
    return m


def read_matrix(path):
    with open(path, encoding="utf-8") as fh:
        return parse_matrix(fh.read())


def write_matrix(path, m, fmt=None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_matrix(m, fmt))


# ----------------------------------------------------------------------
# certificates


def _render_block(out, name, m):
    ri, ci, vals = m.triplets()
    out.append(f"{name}: {len(ri)}")
    f = m.field
    for i, j, v in zip(ri, ci, vals):
        out.append(f"{int(i)} {int(j)} {f.fmt(v)}")


def _render_support(name, idx):
    if idx is None:
        return f"{name}: -"
    vals = " ".join(str(int(i)) for i in idx)
    return f"{name}: {vals}" if vals else f"{name}:"


def render_cert(cert):
    out = ["kind: certificate",
           f"field: {cert.field.header}",
           f"order: {cert.n}",
           f"inner: {cert.inner_dim}",
           f"claimed_rank: {cert.claimed_rank}",
           f"claimed_sparsity: {cert.claimed_sparsity}",
           _render_support("support_rows", cert.support_rows),
           _render_support("support_cols", cert.support_cols)]
    _render_block(out, "u", cert.u)
    _render_block(out, "v", cert.v)
    _render_block(out, "z", cert.z)
    return "\n".join(out) + "\n"


def _parse_block(rd, name, field, rows, cols):
    no, raw = rd.key(name)
    try:
        count = int(raw)
    except ValueError:
        raise FileFormatError(
            f"line {no}: '{name}' needs a triplet count, got {raw!r}") from None
    trips = []
    for _ in range(count):
        no, s = rd.next(f"a triplet of block '{name}'")
        toks = s.split()
        if len(toks) != 3:
            raise FileFormatError(f"line {no}: expected 'i j value', got {s!r}")
        try:
            i, j = int(toks[0]), int(toks[1])
        except ValueError:
            raise FileFormatError(f"line {no}: bad indices in {s!r}") from None
        if not (0 <= i < rows and 0 <= j < cols):
            raise FileFormatError(
                f"line {no}: block '{name}' index ({i}, {j}) outside "
                f"{rows}x{cols}")
        trips.append((i, j, _parse_value(field, toks[2], no)))
    return ExactMatrix.from_triplets(field, rows, cols, trips)


def _parse_support(rd, name):
    _, raw = rd.key(name)
    if raw == "-":
        return None
    return np.array([int(t) for t in raw.split()], dtype=np.int64)


def parse_cert(text):
    rd = _LineReader(text)
    no, kind = rd.key("kind")
    if kind != "certificate":
        raise FileFormatError(f"line {no}: expected kind 'certificate', "
                              f"got {kind!r}")
    _, header = rd.key("field")
    try:
        f = field_from_header(header)
    except ValueError as e:
        raise FileFormatError(str(e)) from None
    n = rd.int_key("order")
    inner = rd.int_key("inner")
    rank = rd.int_key("claimed_rank")
    sparsity = rd.int_key("claimed_sparsity")
    sup_r = _parse_support(rd, "support_rows")
    sup_c = _parse_support(rd, "support_cols")
    u = _parse_block(rd, "u", f, n, inner)
    v = _parse_block(rd, "v", f, inner, n)
    z = _parse_block(rd, "z", f, n, n)
    if not rd.exhausted():
        no, s = rd.lines[rd.pos]
        raise FileFormatError(f"line {no}: trailing content {s!r}")
    return Certificate(f, n, u, v, z, rank, sparsity,
                       support_rows=sup_r, support_cols=sup_c)


def read_cert(path):
    with open(path, encoding="utf-8") as fh:
        return parse_cert(fh.read())


def write_cert(path, cert):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_cert(cert))


# ----------------------------------------------------------------------
# reports


def _plain(value):
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    return value


def render_report(report):
    """Key-value lines in insertion order, then one JSON line."""
    plain = _plain(report)
    out = []
    for k, v in plain.items():
        out.append(f"{k}: {v}")
    out.append("json: " + json.dumps(plain, sort_keys=True,
                                     separators=(",", ":")))
    return "\n".join(out) + "\n"


def write_report(path, report):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_report(report))
