"""Strip attention, chain-graph temporal reasoning, condition fusion and
diffusion training losses, with independent verification and benchmarks."""

__version__ = "0.1.0"
