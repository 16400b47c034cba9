"""SMC samplers toolkit: standard, waste-free and greedy variants with
tempering schedules, finite-sample planning, ground-truth Gaussian oracles,
and a reproducible experiment harness."""

from .estimators import (MedianSpec, ZEstimate, moment_estimate,
                         moment_estimate_weighted, paper_median,
                         z_product_of_means, z_product_of_medians)
from .kernels import (IndepMixtureKernel, KernelSpec, KernelStats, MALAKernel,
                      PCNKernel, RWMKernel, indep_mixture_step, make_kernel,
                      mala_step, pcn_rho_for_lambda, pcn_step, rwm_step)
from .model import (GaussianBase, GaussianOracle, GaussianPotential,
                    GeometricPath, MixturePotential, ParticleCloud,
                    ProductPotential, TemperedSequence, log_incremental_weight,
                    oracle_chi2, oracle_log_Z, pseudo_huber)
from .planner import (PlanInput, PlanResult, mixing_time_from_gap,
                      plan_greedy_moments, plan_medians_z,
                      plan_standard_moments, plan_standard_z,
                      plan_wastefree_moments, plan_wastefree_z)
from .samplers import (RunConfig, RunRecord, resample_multinomial,
                       run_adaptive_wastefree, run_greedy_wastefree, run_smc,
                       run_standard_smc, run_wastefree_smc)
from .schedule import (Schedule, adaptive_ess_schedule, default_c,
                       equidistant_schedule, geometric_schedule,
                       linear_schedule)

__version__ = "0.1.0"
