"""
Sequence file ingestion and the native text format.

Native format (UTF-8):

    POSESEQ v=<V> rep=<coords3d|expmap> fps=<int> frames=<F>
    x0 y0 z0 x1 y1 z1 ...        (F lines, 3*V floats each)

Values are written with Python's shortest round-trip float repr, so
load(save(seq)) == seq exactly and a canonical file survives load/save
byte-for-byte.

Foreign CSV files are read through a FormatSpec (column count, delimiter,
joint keep-list, representation tag, frame rate).
"""

import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from errors import SequenceDataError, SequenceFormatError, SequenceIOError
from posedata.sequence import PoseSequence, Representation, select_joints

logger = structlog.get_logger()

PathLike = Union[str, Path]

_HEADER = re.compile(r"^POSESEQ v=(\d+) rep=(coords3d|expmap) fps=(\d+) frames=(\d+)$")


@dataclass(frozen=True)
class FormatSpec:
    """How to read a foreign CSV sequence file."""

    columns: int
    delimiter: str = ","
    keep_joints: Optional[Tuple[int, ...]] = None
    representation: Representation = Representation.COORDS3D
    fps: int = 50
    skip_rows: int = 0

    def __post_init__(self):
        if self.columns <= 0 or self.columns % 3 != 0:
            raise SequenceFormatError(f"format columns must be a positive multiple of 3, got {self.columns}")
        object.__setattr__(self, "representation", Representation(self.representation))
        if self.keep_joints is not None:
            object.__setattr__(self, "keep_joints", tuple(int(j) for j in self.keep_joints))

    @property
    def source_joints(self) -> int:
        return self.columns // 3

    @property
    def selected_joints(self) -> int:
        return len(self.keep_joints) if self.keep_joints is not None else self.source_joints


def _parse_float(token: str, line: int, path: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise SequenceFormatError(f"not a number: {token!r}", line=line, path=path) from None
    if not math.isfinite(value):
        raise SequenceDataError(f"{path}:{line}: non-finite value {token!r}")
    return value


def _load_native(path: Path) -> PoseSequence:
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise SequenceFormatError("empty file", line=1, path=str(path))

    match = _HEADER.match(lines[0])
    if not match:
        raise SequenceFormatError(f"bad header {lines[0][:60]!r}", line=1, path=str(path))
    joints, rep, fps, frames = int(match[1]), match[2], int(match[3]), int(match[4])
    if len(lines) - 1 != frames:
        raise SequenceFormatError(
            f"header declares {frames} frames, file has {len(lines) - 1}", line=len(lines), path=str(path)
        )

    width = 3 * joints
    rows: List[List[float]] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        tokens = raw.split(" ")
        if len(tokens) != width:
            raise SequenceFormatError(f"expected {width} values, got {len(tokens)}", line=lineno, path=str(path))
        rows.append([_parse_float(tok, lineno, str(path)) for tok in tokens])

    data = np.array(rows, dtype=np.float64).reshape(frames, joints, 3)
    return PoseSequence(data, Representation(rep), fps, name=path.stem)


def _load_csv(path: Path, spec: FormatSpec) -> PoseSequence:
    rows: List[List[float]] = []
    with path.open(encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter=spec.delimiter), start=1):
            if lineno <= spec.skip_rows or not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != spec.columns:
                raise SequenceFormatError(
                    f"expected {spec.columns} columns, got {len(row)}", line=lineno, path=str(path)
                )
            rows.append([_parse_float(cell.strip(), lineno, str(path)) for cell in row])

    if not rows:
        raise SequenceFormatError("no data rows", path=str(path))
    data = np.array(rows, dtype=np.float64).reshape(len(rows), spec.source_joints, 3)
    seq = PoseSequence(data, spec.representation, spec.fps, name=path.stem)
    if spec.keep_joints is not None:
        seq = select_joints(seq, spec.keep_joints)
    return seq


def load_sequence(path: PathLike, format_spec: Optional[FormatSpec] = None) -> PoseSequence:
    """Read a native sequence file, or a foreign CSV when `format_spec` is given."""
    path = Path(path)
    if not path.is_file():
        raise SequenceIOError(f"sequence file not found: {path}")
    seq = _load_native(path) if format_spec is None else _load_csv(path, format_spec)
    logger.info("sequence_loaded", path=str(path), frames=seq.num_frames, joints=seq.num_joints,
                representation=seq.representation.value, fps=seq.fps)
    return seq


def format_sequence(seq: PoseSequence) -> str:
    header = (f"POSESEQ v={seq.num_joints} rep={seq.representation.value} "
              f"fps={seq.fps} frames={seq.num_frames}")
    body = [" ".join(repr(float(v)) for v in frame.reshape(-1)) for frame in seq.frames]
    return "\n".join([header, *body]) + "\n"


def save_sequence(seq: PoseSequence, path: PathLike, overwrite: bool = False) -> None:
    """Write `seq` in the native format. Refuses to replace a file unless `overwrite`."""
    if seq.num_frames < 1:
        raise SequenceDataError(f"{seq.name}: refusing to save an empty sequence")
    path = Path(path)
    if path.exists() and not overwrite:
        raise SequenceIOError(f"{path} exists; pass overwrite=True to replace it")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(format_sequence(seq), encoding="utf-8", newline="\n")
    except OSError as exc:
        raise SequenceIOError(f"cannot write {path}: {exc}") from exc
    logger.info("sequence_saved", path=str(path), frames=seq.num_frames, joints=seq.num_joints)


def load_many(paths: Sequence[PathLike], format_spec: Optional[FormatSpec] = None) -> List[PoseSequence]:
    return [load_sequence(p, format_spec) for p in paths]
