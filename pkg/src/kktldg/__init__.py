"""Time-implicit LDG schemes with a KKT positivity limiter for degenerate parabolic equations."""
from .basis import Basis, QuadratureRule, eval_basis, gauss_lobatto_rule, gauss_rule
from .dirk import ButcherTableau, StepRejected, TimeController, advance_step, control_timestep, tableau
from .kkt import ConstraintSet, KktState, NonConvergence, SingularSystem, project_initial, semismooth_newton
from .ldg import FLUX_CHOICES, LDGDiscretization, StageProblem
from .mesh import Mesh, build_mesh
from .model import ExperimentPreset, InadmissibleStateError, ProblemSpec, preset

__version__ = "0.1.0"
