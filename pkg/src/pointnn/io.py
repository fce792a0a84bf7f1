"""Readers and writers: OFF meshes, XYZ text clouds, label files, logits files,
dataset directories and the binary ``PNNB`` memory-bank format.

PNNB layout (all little-endian)::

    magic  4s   b"PNNB"
    version u32
    kind    u32  0 = classification, 1 = part
    C, N, K u32
    gamma   f32
    feat_mem  N*C f32, row-major
    labels    N u32
    K names   u32 byte length + UTF-8 bytes each
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .datasets import LabeledDataset
from .memory import MemoryBank

BANK_MAGIC = b"PNNB"
BANK_VERSION = 1
_HEADER = struct.Struct("<4sIIIIIf")
_KINDS = {"classification": 0, "part": 1}


class FormatError(ValueError):
    """Malformed input file."""


class OffParseError(FormatError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class BankFormatError(FormatError):
    pass


class BadMagicError(BankFormatError):
    pass


class UnsupportedVersionError(BankFormatError):
    pass


class TruncatedBankError(BankFormatError):
    pass


# -- meshes -----------------------------------------------------------------


@dataclass
class TriangleMesh:
    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise ValueError("face index out of range")

    def areas(self) -> np.ndarray:
        a, b, c = (self.vertices[self.faces[:, i]] for i in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def _content_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def parse_off(text: str) -> TriangleMesh:
    """Parse an OFF mesh; polygons are fan-triangulated.

    Tolerates headers fused with the counts line (``OFF490 770 0``).
    """
    lines = _content_lines(text)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise OffParseError("empty file") from None
    if not header.startswith("OFF"):
        raise OffParseError(f"expected 'OFF' header, got {header[:20]!r}", lineno)
    rest = header[3:].strip()
    if not rest:
        try:
            lineno, rest = next(lines)
        except StopIteration:
            raise OffParseError("missing counts line", lineno) from None
    try:
        counts = [int(t) for t in rest.split()]
    except ValueError:
        raise OffParseError(f"bad counts {rest!r}", lineno) from None
    if len(counts) < 2 or min(counts[:2]) < 0:
        raise OffParseError(f"bad counts {rest!r}", lineno)
    n_vert, n_face = counts[:2]

    verts = np.empty((n_vert, 3))
    for i in range(n_vert):
        try:
            lineno, line = next(lines)
        except StopIteration:
            raise OffParseError(f"expected {n_vert} vertices, found {i}", lineno) from None
        tok = line.split()
        try:
            verts[i] = [float(t) for t in tok[:3]]
        except ValueError:
            raise OffParseError(f"bad vertex {line!r}", lineno) from None
        if len(tok) < 3:
            raise OffParseError(f"vertex needs 3 coordinates, got {len(tok)}", lineno)
    if not np.all(np.isfinite(verts)):
        raise OffParseError("non-finite vertex coordinate")

    tris = []
    for i in range(n_face):
        try:
            lineno, line = next(lines)
        except StopIteration:
            raise OffParseError(f"expected {n_face} faces, found {i}", lineno) from None
        try:
            tok = [int(t) for t in line.split()]
        except ValueError:
            raise OffParseError(f"bad face {line!r}", lineno) from None
        if not tok or tok[0] < 3 or len(tok) < tok[0] + 1:
            raise OffParseError(f"bad face {line!r}", lineno)
        idx = tok[1 : tok[0] + 1]
        bad = [j for j in idx if not 0 <= j < n_vert]
        if bad:
            raise OffParseError(f"face index {bad[0]} out of range for {n_vert} vertices", lineno)
        tris.extend((idx[0], idx[j], idx[j + 1]) for j in range(1, len(idx) - 1))
    return TriangleMesh(verts, np.array(tris, dtype=np.int64).reshape(-1, 3))


def read_off(path) -> TriangleMesh:
    return parse_off(Path(path).read_text())


def sample_mesh_surface(mesh: TriangleMesh, n: int, seed: int = 0) -> np.ndarray:
    """``n`` points uniformly distributed over the mesh surface."""
    areas = mesh.areas() if len(mesh.faces) else np.zeros(0)
    total = areas.sum()
    if not total > 0:
        raise ValueError("mesh has no face with positive area")
    rng = np.random.default_rng(seed)
    tri = rng.choice(len(areas), size=n, p=areas / total)
    r1 = np.sqrt(rng.uniform(size=n))
    r2 = rng.uniform(size=n)
    a, b, c = (mesh.vertices[mesh.faces[tri, i]] for i in range(3))
    return (1 - r1)[:, None] * a + (r1 * (1 - r2))[:, None] * b + (r1 * r2)[:, None] * c


# -- text formats -----------------------------------------------------------


def read_xyz(text: str) -> np.ndarray:
    """Whitespace-separated ``x y z`` per line; ``#`` starts a comment."""
    rows = []
    for lineno, line in _content_lines(text):
        tok = line.split()
        if len(tok) != 3:
            raise FormatError(f"line {lineno}: expected 3 values, got {len(tok)}")
        try:
            rows.append([float(t) for t in tok])
        except ValueError:
            raise FormatError(f"line {lineno}: non-numeric value in {line!r}") from None
    if not rows:
        raise FormatError("no points found")
    return np.array(rows)


def write_xyz(points) -> str:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    return "".join(f"{x!r} {y!r} {z!r}\n" for x, y, z in pts.tolist())


def load_xyz(path) -> np.ndarray:
    return read_xyz(Path(path).read_text())


def save_xyz(points, path) -> None:
    Path(path).write_text(write_xyz(points))


def read_int_lines(text: str) -> np.ndarray:
    """One integer per line (part labels)."""
    out = []
    for lineno, line in _content_lines(text):
        try:
            out.append(int(line))
        except ValueError:
            raise FormatError(f"line {lineno}: expected an integer, got {line!r}") from None
    return np.array(out, dtype=np.int64)


def read_logits(text: str) -> np.ndarray:
    out = []
    for lineno, line in _content_lines(text):
        try:
            out.append(float(line))
        except ValueError:
            raise FormatError(f"line {lineno}: expected a number, got {line!r}") from None
    if not out:
        raise FormatError("no logits found")
    return np.array(out)


def write_logits(values) -> str:
    return "".join(f"{v!r}\n" for v in np.asarray(values, dtype=np.float64).ravel().tolist())


# -- dataset directories ----------------------------------------------------


def write_dataset(dataset: LabeledDataset, directory) -> None:
    """``NNNNN.xyz`` per cloud, ``labels.txt`` (``filename classindex``) and
    ``classes.txt`` (one class name per line)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, (cloud, label) in enumerate(zip(dataset.clouds, dataset.labels)):
        name = f"{i:05d}.xyz"
        save_xyz(cloud, d / name)
        entries.append(f"{name} {int(label)}\n")
    (d / "labels.txt").write_text("".join(entries))
    (d / "classes.txt").write_text("".join(f"{n}\n" for n in dataset.class_names))


def read_dataset(directory, split: str = "train") -> LabeledDataset:
    d = Path(directory)
    labels_file = d / "labels.txt"
    if not labels_file.exists():
        raise FormatError(f"{labels_file} not found")
    names, labels = [], []
    for lineno, line in _content_lines(labels_file.read_text()):
        tok = line.split()
        if len(tok) != 2:
            raise FormatError(f"{labels_file} line {lineno}: expected 'filename classindex'")
        try:
            labels.append(int(tok[1]))
        except ValueError:
            raise FormatError(f"{labels_file} line {lineno}: bad class index {tok[1]!r}") from None
        names.append(tok[0])
    classes_file = d / "classes.txt"
    if classes_file.exists():
        class_names = [line for _, line in _content_lines(classes_file.read_text())]
    else:
        class_names = [f"class{i}" for i in range(max(labels) + 1)]
    clouds = [load_xyz(d / n) for n in names]
    return LabeledDataset(clouds, labels, class_names, split)


# -- memory banks -----------------------------------------------------------


def bank_to_bytes(bank: MemoryBank) -> bytes:
    feat = np.ascontiguousarray(bank.feat_mem, dtype="<f4")
    n, c = feat.shape
    k = bank.num_classes
    parts = [
        _HEADER.pack(BANK_MAGIC, BANK_VERSION, _KINDS[bank.kind], c, n, k, bank.gamma),
        feat.tobytes(),
        np.asarray(bank.labels, dtype="<u4").tobytes(),
    ]
    for name in bank.class_names:
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)) + raw)
    return b"".join(parts)


def bank_from_bytes(data: bytes) -> MemoryBank:
    if len(data) < 4 or data[:4] != BANK_MAGIC:
        raise BadMagicError(f"not a PNNB bank (magic {data[:4]!r})")
    if len(data) < _HEADER.size:
        raise TruncatedBankError(f"header needs {_HEADER.size} bytes, file has {len(data)}")
    _, version, kind, c, n, k, gamma = _HEADER.unpack_from(data)
    if version > BANK_VERSION or version == 0:
        raise UnsupportedVersionError(f"bank version {version}, supported up to {BANK_VERSION}")
    kinds = {v: key for key, v in _KINDS.items()}
    if kind not in kinds:
        raise BankFormatError(f"unknown bank kind {kind}")

    pos = _HEADER.size
    feat_bytes = 4 * n * c
    if len(data) < pos + feat_bytes:
        raise TruncatedBankError(
            f"feature block needs {feat_bytes} bytes, found {len(data) - pos}"
        )
    feat = np.frombuffer(data, dtype="<f4", count=n * c, offset=pos).reshape(n, c).astype(np.float32)
    pos += feat_bytes
    if len(data) < pos + 4 * n:
        raise TruncatedBankError(f"label block needs {4 * n} bytes, found {len(data) - pos}")
    labels = np.frombuffer(data, dtype="<u4", count=n, offset=pos).astype(np.int64)
    pos += 4 * n
    if labels.size and labels.max() >= k:
        raise BankFormatError(f"label {labels.max()} out of range for {k} classes")

    names = []
    for i in range(k):
        if len(data) < pos + 4:
            raise TruncatedBankError(f"class name {i}: length field missing")
        (size,) = struct.unpack_from("<I", data, pos)
        pos += 4
        if len(data) < pos + size:
            raise TruncatedBankError(f"class name {i} needs {size} bytes, found {len(data) - pos}")
        names.append(data[pos : pos + size].decode("utf-8"))
        pos += size
    if pos != len(data):
        raise BankFormatError(f"{len(data) - pos} trailing bytes after bank payload")

    label_mem = np.zeros((n, k), dtype=np.float32)
    label_mem[np.arange(n), labels] = 1.0
    return MemoryBank(feat, label_mem, float(gamma), tuple(names), kinds[kind])


def save_bank(bank: MemoryBank, path) -> None:
    Path(path).write_bytes(bank_to_bytes(bank))


def load_bank(path) -> MemoryBank:
    return bank_from_bytes(Path(path).read_bytes())
