"""Confirmation times in the Cramér-Lundberg mempool model and fee selection.

The package has four layers:

- :mod:`lundfee.analytics` exact densities, tails, means and the inverse
  Gaussian approximation of the confirmation time T_y;
- :mod:`lundfee.sim` Monte Carlo for the batch service queue, the CL process,
  its D/M/1 dual and Brownian hitting times, plus the scaling experiments;
- :mod:`lundfee.data` bucketed mempool snapshots, slope/level estimators and
  confirmation-time extraction;
- :mod:`lundfee.fees` and :mod:`lundfee.benchmark` bucket selection and its
  evaluation against a hindsight oracle.
"""
from .analytics import (ClParams, IgParams, MeanTable, cdf_ty, density_t0, density_ty,
                        density_with_extra_conf, expected_blocks_from_tail, expected_undershoot,
                        horizon, ig_cdf, ig_params, ig_pdf, ig_quantile, limiting_undershoot,
                        mean_recursion_residual, mean_table, mean_time, mean_time_integer, pdf,
                        quantile_ty, solve_rho, tail_blocks, tail_blocks_all)
from .benchmark import BenchmarkConfig, BenchmarkResult, run_benchmark
from .data import (BucketSeries, MempoolSnapshot, UnitScale, bucket_series, estimate_c_global,
                   estimate_c_local, estimate_y_median, extract_validation_sample,
                   get_confirmation_time, parse_snapshots, read_snapshots, synth_mempool,
                   synth_trace, write_snapshots)
from .errors import (BucketNotFoundError, EstimationError, InfeasibleTargetError,
                     InfeasibleTransactionError, InstabilityError, OracleUndefinedError,
                     ParameterError, ParseError, RunawaySimulationError, SchemaError)
from .fees import (BucketRecommendation, TargetSpec, data_driven_bucket, empirical_cdf,
                   estimate_c_mle, model_based_bucket, oracle_bucket, score, summarize_scores)
from .sim import (BsqParams, Seed, WeightDist, bsq_hitting_times, diffusion_scaling_experiment,
                  fluid_scaling_experiment, ks_statistic, simulate_bm, simulate_bsq_hit,
                  simulate_cl, simulate_cl_blocks, simulate_cl_hit, simulate_dm1,
                  simulate_dm1_busy_period)

__version__ = "0.1.0"
