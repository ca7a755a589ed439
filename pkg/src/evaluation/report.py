"""
Evaluation report: per-horizon errors of the model and the zero-velocity
baseline, one row per test sequence ("action") plus an average row.

Written as CSV and as an aligned text table with one column per horizon,
labelled in milliseconds (frame * 1000 / fps). Short-term averages cover
horizons up to 500 ms, long-term averages the ones beyond.
"""

import csv
import io
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import structlog
from jinja2 import Template

from evaluation.horizons import horizon_milliseconds, mae_at_horizons, mpjpe_at_horizons, zero_velocity_baseline
from model.network import predict
from model.params import ModelParams
from posedata.sequence import Representation
from posedata.windows import WindowSet

logger = structlog.get_logger()

SHORT_TERM_MS = 500.0

_TABLE_TEMPLATE = Template(
    """\
{{ title }}  ({{ variant }}, {{ parameters }} parameters)
{{ "%-16s"|format("milliseconds") }}{% for ms in milliseconds %}{{ "%9s"|format(ms) }}{% endfor %}{{ "%9s"|format("short") }}{{ "%9s"|format("long") }}
{{ rule }}
{% for row in rows %}
{{ "%-16s"|format(row.label) }}{% for v in row.cells %}{{ "%9.2f"|format(v) }}{% endfor %}{{ row.short }}{{ row.long }}
{% endfor %}
""",
    trim_blocks=True,
)


@dataclass
class EvalRow:
    action: str
    windows: int
    model: List[float]
    baseline: List[float]


@dataclass
class EvalReport:
    metric: str  # mpjpe_mm | mae_deg
    variant: str
    fps: int
    horizons: List[int]
    rows: List[EvalRow] = field(default_factory=list)
    parameter_count: int = 0

    @property
    def milliseconds(self) -> List[float]:
        return horizon_milliseconds(self.horizons, self.fps)

    @property
    def average(self) -> EvalRow:
        return EvalRow(
            "average",
            sum(r.windows for r in self.rows),
            [float(v) for v in np.mean([r.model for r in self.rows], axis=0)],
            [float(v) for v in np.mean([r.baseline for r in self.rows], axis=0)],
        )

    @property
    def all_rows(self) -> List[EvalRow]:
        return self.rows + [self.average]

    def _span_mean(self, values: Sequence[float], long_term: bool) -> float:
        picked = [v for v, ms in zip(values, self.milliseconds) if (ms > SHORT_TERM_MS) == long_term]
        return float(np.mean(picked)) if picked else math.nan

    def short_term(self, values: Sequence[float]) -> float:
        return self._span_mean(values, long_term=False)

    def long_term(self, values: Sequence[float]) -> float:
        return self._span_mean(values, long_term=True)

    def value_at(self, horizon: int, action: str = "average", baseline: bool = False) -> float:
        row = next(r for r in self.all_rows if r.action == action)
        values = row.baseline if baseline else row.model
        return values[self.horizons.index(horizon)]

    # -- output ------------------------------------------------------------

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        columns = [f"{h}f_{ms:g}ms" for h, ms in zip(self.horizons, self.milliseconds)]
        writer.writerow(["action", "series", "windows", *columns, "short_term", "long_term"])
        for row in self.all_rows:
            for series, values in (("model", row.model), ("zero_velocity", row.baseline)):
                writer.writerow([
                    row.action, series, row.windows,
                    *(f"{v:.6f}" for v in values),
                    f"{self.short_term(values):.6f}", f"{self.long_term(values):.6f}",
                ])
        return buffer.getvalue()

    def render_table(self) -> str:
        def _cell(v: float) -> str:
            return "%9s" % "-" if math.isnan(v) else "%9.2f" % v

        rows = []
        for row in self.all_rows:
            for label, values in ((row.action, row.model), ("  zero-velocity", row.baseline)):
                rows.append({
                    "label": label[:16],
                    "cells": values,
                    "short": _cell(self.short_term(values)),
                    "long": _cell(self.long_term(values)),
                })
        title = "MPJPE (mm)" if self.metric == "mpjpe_mm" else "MAE (degrees)"
        return _TABLE_TEMPLATE.render(
            title=title,
            variant=self.variant,
            parameters=self.parameter_count,
            milliseconds=[f"{ms:g}" for ms in self.milliseconds],
            rule="-" * (16 + 9 * (len(self.horizons) + 2)),
            rows=rows,
        )

    def write(self, directory: Union[str, Path]) -> Dict[str, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = {"csv": directory / "eval.csv", "table": directory / "eval.txt"}
        paths["csv"].write_text(self.to_csv(), encoding="utf-8")
        paths["table"].write_text(self.render_table(), encoding="utf-8")
        return paths


def split_by_sequence(windows: WindowSet) -> "OrderedDict[str, WindowSet]":
    groups: "OrderedDict[str, List[int]]" = OrderedDict()
    for i, sid in enumerate(windows.sequence_ids):
        groups.setdefault(sid, []).append(i)
    return OrderedDict((sid, windows.subset(index)) for sid, index in groups.items())


def evaluate(
    params: ModelParams,
    windows: WindowSet,
    horizons: Sequence[int],
    to_millimeters: float = 1.0,
    mae_joints: Optional[Sequence[int]] = None,
    batch_size: int = 256,
) -> EvalReport:
    """Score the model and the zero-velocity baseline on every test sequence."""
    expmap = windows.representation is Representation.EXPMAP
    report = EvalReport(
        metric="mae_deg" if expmap else "mpjpe_mm",
        variant=params.variant.value,
        fps=windows.fps,
        horizons=list(horizons),
        parameter_count=params.num_parameters(),
    )
    K = windows.output_frames
    for action, group in split_by_sequence(windows).items():
        pred = predict(params, group.inputs, batch_size)
        base = zero_velocity_baseline(group.inputs, K)
        if expmap:
            model_err = mae_at_horizons(pred, group.targets, horizons, degrees=True, joints=mae_joints)
            base_err = mae_at_horizons(base, group.targets, horizons, degrees=True, joints=mae_joints)
        else:
            model_err = [v * to_millimeters for v in mpjpe_at_horizons(pred, group.targets, horizons, windows.fps)]
            base_err = [v * to_millimeters for v in mpjpe_at_horizons(base, group.targets, horizons, windows.fps)]
        report.rows.append(EvalRow(action, len(group), model_err, base_err))

    average = report.average
    logger.info(
        "eval_completed",
        metric=report.metric,
        actions=len(report.rows),
        windows=average.windows,
        last_horizon=report.horizons[-1],
        model=average.model[-1],
        zero_velocity=average.baseline[-1],
    )
    return report
