"""Interdependent power/gas/water state-estimation security.

Linear ICI models, steady-state Kalman estimation, worst-case stealthy
impulse attacks per sensor cluster, and the Colonel Blotto / General Lotto
game over the resulting cluster values.
"""

__version__ = "0.1.0"

from .errors import (AttackError, EstimatorError, GameError, IciError, ModelError,  # noqa: E402
                     ScenarioError)
from .model import (ClusterIndex, ClusterSpec, CouplingMap, GasPipelineSpec, GeneratorSpec,  # noqa: E402
                    JunctionSpec, StateSpaceModel, TransmissionLineSpec, WaterPipelineSpec,
                    assemble_ici, build_gas_ci, build_power_ci, build_sensor_matrix, build_water_ci,
                    discretize)
from .estimator import (EstimatorBundle, NoiseSpec, Trajectory, build_estimator,  # noqa: E402
                        empirical_alarm_rates, kalman_gain, simulate, solve_riccati)
from .attack import (AttackInjection, ClusterValuation, ImpactMatrices, deviation_response,  # noqa: E402
                     max_ced_impulse, max_kl_impulse, solve_max_ced, value_clusters)
from .blotto import (EquilibriumProfile, MarginalDistribution, best_response,  # noqa: E402
                     check_blotto_applicability, match_payoff, sample_allocation,
                     single_ci_defense_ced, solve_general_lotto, solve_symmetric_msne)
from .scenario import ScenarioConfig, load_scenario  # noqa: E402
from .pipeline import (build_system, compare_budget_ratios, interdependence_report,  # noqa: E402
                       run_pipeline)
from .reports import emit_reports  # noqa: E402
