"""
Learnt adjacency export and inspection.

CSV layout: one block per matrix in the stack, each introduced by a comment
header, blocks separated by a blank line:

    # layer=2 kind=space index=0 rows=22 cols=22
    0.013,-0.442,...
    ...

For kind=space the stack is As [T, V, V] (index = frame); for kind=time it is
At [V, T, T] (index = joint).
"""

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
import structlog

from errors import ExportError
from model.params import ModelParams
from model.variants import EncoderVariant

logger = structlog.get_logger()

KINDS = ("space", "time")

_BLOCK_HEADER = re.compile(r"^# layer=(\d+) kind=(space|time) index=(\d+) rows=(\d+) cols=(\d+)$")


def adjacency_stack(params: ModelParams, layer: int, kind: str) -> np.ndarray:
    if kind not in KINDS:
        raise ExportError(f"kind must be one of {KINDS}, got {kind!r}")
    if params.variant is EncoderVariant.FULL:
        raise ExportError("the full variant has no separate space/time adjacency to export")
    if not 1 <= layer <= params.config.num_layers:
        raise ExportError(f"layer {layer} out of range [1, {params.config.num_layers}]")
    view = params.encoder_layer(layer)
    matrix = view.As if kind == "space" else view.At
    return matrix.data.astype(np.float64)


def export_adjacency(params: ModelParams, layer: int, kind: str, path: Union[str, Path]) -> None:
    stack = adjacency_stack(params, layer, kind)
    lines: List[str] = []
    for index, block in enumerate(stack):
        if index:
            lines.append("")
        lines.append(f"# layer={layer} kind={kind} index={index} rows={block.shape[0]} cols={block.shape[1]}")
        lines.extend(",".join(repr(float(v)) for v in row) for row in block)

    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc}") from exc
    logger.info("adjacency_exported", path=str(path), layer=layer, kind=kind, blocks=stack.shape[0])


@dataclass
class AdjacencyBlock:
    layer: int
    kind: str
    index: int
    matrix: np.ndarray


def import_adjacency(path: Union[str, Path]) -> List[AdjacencyBlock]:
    blocks: List[AdjacencyBlock] = []
    header = None
    rows: List[List[float]] = []

    def _flush():
        if header is not None:
            layer, kind, index, n_rows, n_cols = header
            matrix = np.array(rows, dtype=np.float64)
            if matrix.shape != (n_rows, n_cols):
                raise ExportError(f"{path}: block {kind}[{index}] has shape {matrix.shape}, header says {(n_rows, n_cols)}")
            blocks.append(AdjacencyBlock(layer, kind, index, matrix))

    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        match = _BLOCK_HEADER.match(line)
        if match:
            _flush()
            header = (int(match[1]), match[2], int(match[3]), int(match[4]), int(match[5]))
            rows = []
        elif header is None:
            raise ExportError(f"{path}: data before the first block header")
        else:
            rows.append([float(v) for v in line.split(",")])
    _flush()
    return blocks


def strongest_edges(matrix: np.ndarray, top: int = 2) -> List[Tuple[int, int, float]]:
    """For each receiving node w, its `top` strongest incoming edges v -> w by |weight|, self-loops excluded."""
    n = matrix.shape[0]
    edges = []
    for w in range(n):
        weights = np.abs(matrix[w]).astype(np.float64)
        weights[w] = -np.inf
        for v in np.argsort(-weights, kind="stable")[:min(top, n - 1)]:
            edges.append((w, int(v), float(matrix[w, v])))
    return edges


def temporal_flow(At: np.ndarray) -> Dict[str, float]:
    """
    Mass of |At| drawn from earlier frames (below the diagonal: row k reads
    frame m < k) versus later frames and the diagonal, over every joint.
    """
    magnitude = np.abs(At)
    T = magnitude.shape[-1]
    earlier = float(np.sum(magnitude * np.tril(np.ones((T, T)), k=-1)))
    later = float(np.sum(magnitude * np.triu(np.ones((T, T)), k=1)))
    diagonal = float(np.sum(magnitude * np.eye(T)))
    total = earlier + later + diagonal
    return {
        "earlier_to_later": earlier,
        "later_to_earlier": later,
        "diagonal": diagonal,
        "earlier_share": earlier / total if total > 0 else 0.0,
    }
