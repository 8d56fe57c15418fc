"""Resumable six-stage pipeline: config, workspace, orchestrator."""
from .config import PoolSizes, RunConfig, config_from_dict, load_provider_spec
from .mux import mux_final
from .orchestrator import STAGE_ORDER, RunSummary, StageId, resume, run
from .workspace import DONE, IN_PROGRESS, PENDING, Workspace

__all__ = [
    "DONE",
    "IN_PROGRESS",
    "PENDING",
    "PoolSizes",
    "RunConfig",
    "RunSummary",
    "STAGE_ORDER",
    "StageId",
    "Workspace",
    "config_from_dict",
    "load_provider_spec",
    "mux_final",
    "resume",
    "run",
]
