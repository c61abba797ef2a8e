"""Feature dragging on synthetic differentiable field backends."""

from .backends import BlobBackend, BlobSpec, DirectFieldBackend, GeneratorBackend
from .core import (Case, DragConfig, DragPoint, DragState, DragTrace, PointStatus,
                   TraceRow, calibrate, candidate_set, drag_loss, lambda_coeff,
                   localize, mask_loss, next_position, total_loss, update_template)
from .engine import (DivergedError, DragEngine, RunStatus, default_learning_rate,
                     init_state, loss_and_gradient, optimize_substep, run_drag,
                     step_drag)
from .sampling import Point2, aggregate, aggregate_vjp, sample, sample_vjp

__all__ = [
    "BlobBackend", "BlobSpec", "DirectFieldBackend", "GeneratorBackend",
    "Case", "DragConfig", "DragPoint", "DragState", "DragTrace", "PointStatus",
    "TraceRow", "calibrate", "candidate_set", "drag_loss", "lambda_coeff",
    "localize", "mask_loss", "next_position", "total_loss", "update_template",
    "DivergedError", "DragEngine", "RunStatus", "default_learning_rate",
    "init_state", "loss_and_gradient", "optimize_substep", "run_drag", "step_drag",
    "Point2", "aggregate", "aggregate_vjp", "sample", "sample_vjp",
]

__version__ = "0.1.0"
