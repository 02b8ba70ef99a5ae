"""Offline/online orchestration, persistence formats and the command-line interface."""

from caerom.pipeline.config import build_config, default_config, load_config, validate_config
from caerom.pipeline.dataset import DatasetWriter, SnapshotDataset, file_checksum, load_dataset, save_dataset
from caerom.pipeline.problems import BurgersProblem, ElasticityProblem, make_problem
from caerom.pipeline.report import load_report, load_summary, report_emit, save_report
from caerom.pipeline.runner import (
    OfflineResult,
    convergence_study,
    offline_run,
    online_mc_run,
    validate_run,
)

__all__ = [
    "BurgersProblem",
    "DatasetWriter",
    "ElasticityProblem",
    "OfflineResult",
    "SnapshotDataset",
    "build_config",
    "convergence_study",
    "default_config",
    "file_checksum",
    "load_config",
    "load_dataset",
    "load_report",
    "load_summary",
    "make_problem",
    "offline_run",
    "online_mc_run",
    "report_emit",
    "save_dataset",
    "save_report",
    "validate_config",
    "validate_run",
]
