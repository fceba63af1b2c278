"""Simulator for a hybrid photonic-electronic block floating point GEMM accelerator."""
from .bfp import BfpBlock, bfp_to_fp, fp_to_bfp, matrix_to_bfp_tiles_A, matrix_to_bfp_tiles_B
from .config import SystemConfig, load_config
from .engine import matrix_multiply
from .photonic import NoiseModel, photonic_multiply
from .slicing import SliceConfig, reconstruct_product, slice_mantissa

__version__ = "0.1.0"
