"""kickflow: numerical laboratory for kick-forced Burgers dynamics and directed polymers.

Pipeline: sample a random kick potential (potential), run min-plus dynamic
programming for minimizers and action differences (zerotemp) or the log-domain
transfer operator for partition functions and polymer measures (gibbs), evolve
potential/velocity profiles (burgers), and drive theorem-probing experiments
with structured reports (experiments, cli).
"""

from .burgers import (PotentialProfile, VelocityProfile, check_monotone, g_metric,
                      inviscid_step, velocity_of, velocity_profile, viscous_step)
from .errors import ConfigError, WindowError
from .gibbs import (FreeEnergyRecord, LogPartitionSlice, SliceDistribution, band_index,
                    forward_slice, free_energy, g_ratio, log_partition, log_path_sum,
                    polymer_marginal, sample_path, sample_paths, sigma_stat,
                    viscous_velocity)
from .numerics import (Grid, GridFn, boundary_leak, centered_grid, gauss_log_kernel,
                       log_integral)
from .potential import (MomentEstimate, PotentialField, PotentialSpec, moment_diagnostic,
                        sample_potential)
from .zerotemp import (ActionDecomposition, LatticePath, action, busemann_slice,
                       busemann_variational_residual, busemann_zero, inviscid_velocity,
                       min_action, min_action_slice, minimizer)

__version__ = "0.1.0"
