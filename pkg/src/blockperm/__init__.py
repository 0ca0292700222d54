"""Permanents, Bethe permanents and their asymptotics for block-constant matrices."""
from .asymptotics import AsymptoticPrediction, TangentFrame, log_hessian_lambda1, predict_Z, predict_Z_sinkhorn_form, tangent_frame
from .blockmat import BlockSpec, expand_block, infer_block_spec, pml_block_base
from .covers import CoverConfig, bethe2_pair_sum, betheM_exhaustive, betheM_sampled, lift
from .errors import *  # noqa: F401,F403
from .exactperm import cycle_count, permanent_naive, permanent_ryser, permutation_weight
from .harness import EnsembleConfig, TrialRecord, fit_ratio, run_fig1_ensemble, run_pml_sweep
from .logvalue import LogValue
from .series import MultiPoly, bethe_coefficient, gibbs_coefficient, poly_exp_trunc, poly_mul_trunc
from .sinkhorn import SaddlePoint, SinkhornResult, block_fixed_point, saddle_point, scaled_sinkhorn_permanent, sinkhorn_scale
from .spa import BetheSolution, SpaOptions, bethe_free_energy, bethe_permanent
from .spectral import Kernels, Spectrum, build_kernels, perron_log_gradient, predict_ratio_smallrho, predict_ratio_theorem1, spectrum

__version__ = "0.1.0"
