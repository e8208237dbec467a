"""Wright-Fisher diffusion with a continuum of seed-banks: forward and dual simulators."""
from .config import ConfigError, RunConfig, parse_config
from .dual import (
    DualState,
    MarkedPartition,
    ancestral_step,
    block_counting,
    coalescent_step,
    dual_moment_exact,
    dual_step,
    simulate_ancestral,
    simulate_coalescent,
    simulate_dual,
    total_rate,
)
from .duality import MomentEstimate, dual_function, dual_side, duality_gap, forward_side
from .exceptions import SeedbankError
from .forward import (
    DiffusionState,
    PathConfig,
    em_step,
    moment_ode,
    simulate_ensemble,
    simulate_path,
    simulate_sve_path,
)
from .kernels import BACKEND
from .measure import (
    DiscretizedMeasure,
    SeedBankMeasure,
    discretize,
    initial_offset,
    kernel_cdf,
    moments,
    sample_rate,
)
from .wright_fisher import WFParams, WFState, build_model, embed, rescaled_ensemble, wf_step

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConfigError",
    "DiffusionState",
    "DiscretizedMeasure",
    "DualState",
    "MarkedPartition",
    "MomentEstimate",
    "PathConfig",
    "RunConfig",
    "SeedBankMeasure",
    "SeedbankError",
    "WFParams",
    "WFState",
    "ancestral_step",
    "block_counting",
    "build_model",
    "coalescent_step",
    "discretize",
    "dual_function",
    "dual_moment_exact",
    "dual_side",
    "dual_step",
    "duality_gap",
    "em_step",
    "embed",
    "forward_side",
    "initial_offset",
    "kernel_cdf",
    "moment_ode",
    "moments",
    "parse_config",
    "rescaled_ensemble",
    "sample_rate",
    "simulate_ancestral",
    "simulate_coalescent",
    "simulate_dual",
    "simulate_ensemble",
    "simulate_path",
    "simulate_sve_path",
    "total_rate",
    "wf_step",
]
