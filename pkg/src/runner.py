"""
Command orchestration.

Binds data, model, training and evaluation into reproducible runs:

  1. Snapshot the effective config into the run directory
  2. Load and preprocess sequences           (posedata)
  3. Build windows, train or restore params  (training, model)
  4. Score, export or predict                (evaluation, model.graph)

Everything a command writes lives under `output.dir`:

    config.json                 effective config (sorted keys)
    synth/{train,val,test}/     synthetic sequences
    checkpoint.txt              trained parameters
    train_report.csv            per-epoch losses
    eval/eval.csv, eval.txt     horizon report
    graph/graph_layer<l>_<kind>.csv, ..._summary.txt
    predictions/<name>_forecast.txt
"""

from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import structlog

from config import RunConfig
from errors import SequenceDataError, WindowError
from evaluation.report import EvalReport, evaluate
from metrics import COMMANDS, MODEL_PARAMETERS, start_metrics_server
from model.counting import count_params, param_breakdown, render_comparison
from model.graph import adjacency_stack, export_adjacency, strongest_edges, temporal_flow
from model.network import predict
from model.params import ModelParams
from posedata.io import load_many, load_sequence, save_sequence
from posedata.sequence import PoseSequence, Representation, center_on_root, downsample
from posedata.synth import synth_generate
from posedata.windows import WindowSet, make_windows, windows_to_frames
from training.checkpoint import load_checkpoint, save_checkpoint
from training.trainer import TrainReport, train

logger = structlog.get_logger()

# synthetic seeds per split: synth.seed * 1000 + offset + index
_SPLIT_SEED_OFFSETS = {"train": 0, "val": 100, "test": 200}


class Runner:
    """
    Executes one command against a validated RunConfig.

    The config is read once at construction; nothing here touches the
    environment.
    """

    def __init__(self, config: RunConfig, command: str):
        self.config = config
        self.command = command
        config.validate(command)
        if config.output.metrics_port is not None:
            start_metrics_server(config.output.metrics_port)
        COMMANDS.labels(command=command).inc()
        self._snapshot_config()

    @property
    def run_dir(self) -> Path:
        return self.config.run_dir

    @property
    def checkpoint_path(self) -> Path:
        return self.run_dir / "checkpoint.txt"

    def _snapshot_config(self) -> None:
        self.run_dir.mkdir(parents=True, exist_ok=True)
        (self.run_dir / "config.json").write_text(self.config.to_json(), encoding="utf-8")

    # ------------------------------------------------------------------
    # Data
    # ------------------------------------------------------------------

    def preprocess(self, seq: PoseSequence) -> PoseSequence:
        data = self.config.data
        if seq.representation is not data.representation:
            raise SequenceDataError(
                f"{seq.name}: representation {seq.representation.value} does not match data.representation "
                f"{data.representation.value}"
            )
        if seq.fps != data.fps:
            seq = downsample(seq, data.fps)
        if data.center_root and seq.representation is Representation.COORDS3D:
            seq = center_on_root(seq, data.root_joint)
        return seq

    def load_split(self, split: str) -> List[PoseSequence]:
        files = self.config.data_files(split)
        return [self.preprocess(seq) for seq in load_many(files, self.config.data.format)]

    def windows(self, split: str) -> Optional[WindowSet]:
        """Windows of every sequence in the split, or None when the split has no files."""
        sequences = self.load_split(split)
        if not sequences:
            return None
        m = self.config.model
        stride = self.config.data.test_stride if split == "test" else self.config.data.stride
        windows = WindowSet.concat([make_windows(seq, m.input_frames, m.output_frames, stride) for seq in sequences])
        logger.info("windows_built", split=split, sequences=len(sequences), windows=len(windows))
        return windows

    def load_params(self, checkpoint: Optional[Union[str, Path]] = None) -> ModelParams:
        params, _ = load_checkpoint(checkpoint or self.checkpoint_path, self.config.model)
        return params

    # ------------------------------------------------------------------
    # Commands
    # ------------------------------------------------------------------

    def synth(self) -> Dict[str, List[Path]]:
        synth = self.config.synth
        counts = {"train": synth.train_sequences, "val": synth.val_sequences, "test": synth.test_sequences}
        written: Dict[str, List[Path]] = {}
        for split, count in counts.items():
            written[split] = []
            for index in range(count):
                name = f"synth_{split}_{index:02d}"
                seed = synth.seed * 1000 + _SPLIT_SEED_OFFSETS[split] + index
                seq = synth_generate(synth.spec, seed, name=name)
                path = self.config.synth_dir(split) / f"{name}.txt"
                save_sequence(seq, path, overwrite=True)
                written[split].append(path)
        logger.info("synth_completed", **{split: len(paths) for split, paths in written.items()})
        return written

    def train(self) -> TrainReport:
        train_windows = self.windows("train")
        if train_windows is None:
            raise WindowError("no training sequences")
        val_windows = self.windows("val")
        MODEL_PARAMETERS.labels(variant=self.config.model.variant.value).set(
            count_params(self.config.model.variant, self.config.model)
        )
        params, report = train(self.config.model, self.config.train, train_windows, val_windows)
        save_checkpoint(params, self.checkpoint_path)
        report.write_csv(self.run_dir / "train_report.csv")
        return report

    def eval(self, checkpoint: Optional[Union[str, Path]] = None) -> EvalReport:
        params = self.load_params(checkpoint)
        test_windows = self.windows("test")
        if test_windows is None:
            raise WindowError("no test sequences")
        report = evaluate(
            params,
            test_windows,
            self.config.eval.horizons,
            to_millimeters=self.config.data.to_millimeters,
            mae_joints=self.config.eval.mae_joints,
            batch_size=self.config.eval.batch_size,
        )
        report.write(self.run_dir / "eval")
        return report

    def predict(
        self,
        sequence: Union[str, Path],
        checkpoint: Optional[Union[str, Path]] = None,
        output: Optional[Union[str, Path]] = None,
    ) -> Path:
        params = self.load_params(checkpoint)
        m = self.config.model
        seq = self.preprocess(load_sequence(sequence, self.config.data.format))
        if seq.num_frames < m.input_frames:
            raise WindowError(f"{seq.name}: {seq.num_frames} frames, need at least T={m.input_frames}")
        if seq.num_joints != m.joints:
            raise SequenceDataError(f"{seq.name}: {seq.num_joints} joints, model expects {m.joints}")

        # last T frames, (T, V, 3) -> [1, 3, V, T]
        observed = np.transpose(seq.frames[-m.input_frames:], (2, 1, 0))[None]
        future = predict(params, observed)[0]
        forecast = PoseSequence(windows_to_frames(future), seq.representation, seq.fps, name=f"{seq.name}_forecast")

        path = Path(output) if output else self.run_dir / "predictions" / f"{forecast.name}.txt"
        save_sequence(forecast, path, overwrite=True)
        logger.info("prediction_written", path=str(path), frames=forecast.num_frames)
        return path

    def export_graph(self, layer: int, kind: str, checkpoint: Optional[Union[str, Path]] = None) -> Dict[str, Path]:
        params, _ = load_checkpoint(checkpoint or self.checkpoint_path)
        directory = self.run_dir / "graph"
        csv_path = directory / f"graph_layer{layer}_{kind}.csv"
        export_adjacency(params, layer, kind, csv_path)

        stack = adjacency_stack(params, layer, kind)
        lines = [f"layer {layer} kind {kind} variant {params.variant.value}"]
        if kind == "time":
            flow = temporal_flow(stack)
            lines.append("temporal flow over |At|, all joints:")
            lines.extend(f"  {key:<18} {value:.6f}" for key, value in flow.items())
        node = "frame" if kind == "time" else "joint"
        lines.append(f"two strongest incoming edges per {node}, mean over the stack:")
        for w, v, weight in strongest_edges(stack.mean(axis=0), top=2):
            lines.append(f"  {node} {w:>3} <- {v:>3}  {weight:+.6f}")
        summary_path = directory / f"graph_layer{layer}_{kind}_summary.txt"
        summary_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return {"csv": csv_path, "summary": summary_path}

    def count_params(self) -> str:
        model = self.config.model
        breakdown = param_breakdown(model.variant, model)
        MODEL_PARAMETERS.labels(variant=model.variant.value).set(breakdown.total)
        return breakdown.render(model) + "\n" + render_comparison(model)


# ------------------------------------------------------------------
# Command functions
# ------------------------------------------------------------------

def cmd_synth(config: RunConfig) -> Dict[str, List[Path]]:
    return Runner(config, "synth").synth()


def cmd_train(config: RunConfig) -> TrainReport:
    return Runner(config, "train").train()


def cmd_eval(config: RunConfig, checkpoint: Optional[Union[str, Path]] = None) -> EvalReport:
    return Runner(config, "eval").eval(checkpoint)


def cmd_predict(
    config: RunConfig,
    checkpoint: Optional[Union[str, Path]],
    sequence: Union[str, Path],
    output: Optional[Union[str, Path]] = None,
) -> Path:
    return Runner(config, "predict").predict(sequence, checkpoint, output)


def cmd_export_graph(config: RunConfig, checkpoint: Optional[Union[str, Path]], layer: int, kind: str) -> Dict[str, Path]:
    return Runner(config, "export-graph").export_graph(layer, kind, checkpoint)


def cmd_count_params(config: RunConfig) -> str:
    return Runner(config, "count-params").count_params()

