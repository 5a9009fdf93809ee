"""Sequential inverse heat conduction with fast regularisation-parameter
selection and stability-guarded choice of the time-integration parameter."""
from .direct import (FluxSchedule, IntegratorConfig, Propagator,
                     build_propagator, simulate, step)
from .errors import (CondensationError, ConfigError, DegenerateSensingError,
                     DivergenceError, IHCPError, InvalidArgumentError,
                     SingularityError, StabilityError)
from .fem import (MATERIALS, EdgeRegion, MaterialProperties, Mesh,
                  SensorSelector, ThermalSystem, assemble, build_mesh_1d,
                  build_mesh_2d, build_sensor_selector, penetration_depth)
from .hybrid import HybridResult, hybrid_select
from .inverse import (GainMatrix, InverseModel, InverseResult, gain,
                      inverse_step, run_inverse, sensitivity)
from .ridge import (NoiseModel, RidgeEstimator, build_xi_curve,
                    morozov_select, select_alpha_fast, variance_delta)
from .stability import amplification, beta_sweep, select_beta, spectral_radius

__version__ = "0.1.0"
