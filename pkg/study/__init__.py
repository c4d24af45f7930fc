"""
Monte Carlo studies, bootstrap and timing.
"""
from study.engine import StudyEngine, StudyResult, run_study, relative_rrmse, global_efficiency, simulate_field
from study.bootstrap import BootstrapResult, parametric_bootstrap
from study.timing import bench_timing

__all__ = [
    "StudyEngine",
    "StudyResult",
    "run_study",
    "relative_rrmse",
    "global_efficiency",
    "simulate_field",
    "BootstrapResult",
    "parametric_bootstrap",
    "bench_timing",
]
