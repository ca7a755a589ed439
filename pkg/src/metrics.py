"""
Prometheus metrics for training and evaluation runs.

All counters and gauges are module-level singletons so any module can import
and update them without passing instances around. The HTTP exporter is only
started when a run config sets `output.metrics_port`.
"""

from prometheus_client import Counter, Gauge, start_http_server

import structlog

logger = structlog.get_logger()

# ------------------------------------------------------------------
# Metrics
# ------------------------------------------------------------------

EPOCHS_COMPLETED = Counter(
    "stsgcn_epochs_completed_total",
    "Training epochs completed",
)

BATCHES_PROCESSED = Counter(
    "stsgcn_batches_processed_total",
    "Optimizer steps taken",
)

TRAIN_LOSS = Gauge(
    "stsgcn_train_loss",
    "Mean training loss of the last completed epoch",
)

VALIDATION_LOSS = Gauge(
    "stsgcn_validation_loss",
    "Validation loss of the last completed epoch",
)

LEARNING_RATE = Gauge(
    "stsgcn_learning_rate",
    "Learning rate in effect for the current epoch",
)

MODEL_PARAMETERS = Gauge(
    "stsgcn_model_parameters",
    "Trainable scalar count of the configured model",
    labelnames=["variant"],  # separable | full | distinct | shared
)

COMMANDS = Counter(
    "stsgcn_commands_total",
    "CLI commands executed",
    labelnames=["command"],
)

ERRORS = Counter(
    "stsgcn_errors_total",
    "Errors encountered, by component",
    labelnames=["component"],  # config | data | model | training | evaluation | cli
)


# ------------------------------------------------------------------
# Server
# ------------------------------------------------------------------

def start_metrics_server(port: int = 9090) -> None:
    """Start the Prometheus HTTP server on the given port."""
    start_http_server(port)
    logger.info("metrics_server_started", port=port)
