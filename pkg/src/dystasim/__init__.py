"""Layer-granularity simulator for sparsity-aware scheduling of many DNN requests on one accelerator."""
from .baselines import SCHEDULERS, make_scheduler
from .dysta import DystaConfig, DystaScheduler
from .metrics import MetricsReport
from .profile import build_profiles
from .sim import SimConfig, run_sim
from .workload import SynthSpec, WorkloadSpec, gen_arrivals, load_traces, synth_traces

__version__ = "0.1.0"

__all__ = ["SCHEDULERS", "DystaConfig", "DystaScheduler", "MetricsReport", "SimConfig", "SynthSpec",
           "WorkloadSpec", "build_profiles", "gen_arrivals", "load_traces", "make_scheduler", "run_sim",
           "synth_traces"]
