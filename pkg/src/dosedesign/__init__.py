"""Sequential robust optimal experimental designs for dose-response studies.

Subpackages cover the trinomial contrast-family models and their Fisher
information (:mod:`.models`), maximum-likelihood fitting and endpoint
inference (:mod:`.fitting`), design criteria and efficiencies
(:mod:`.criteria`), equivalence-theorem certificates (:mod:`.equivalence`),
the particle-swarm design search (:mod:`.pso`, :mod:`.search`), the
efficacy-toxicity bivariate probit machinery (:mod:`.bivprobit`), and the
workflow/CLI/HTTP shells (:mod:`.workflow`, :mod:`.cli`, :mod:`.service`).
"""

from ._kernels import BACKEND as kernel_backend
from .criteria import CriterionSpec, efficiency, phi_c, phi_D, phi_dual, phi_robust
from .designs import Design, uniform_design
from .equivalence import SensitivityCurve, verify_design
from .fitting import CountRecord, EndpointEstimate, FitResult, fit_mle, rd50
from .models import (
    FisherInfo,
    ModelSpec,
    NominalSet,
    ParamVector,
    RegressionBasis,
    SPECS,
    category_probs,
    eval_linear_predictors,
    fisher_info,
    get_spec,
    stilde,
)
from .pso import SwarmConfig, optimize
from .search import find_design

__version__ = "0.1.0"

__all__ = [
    "CountRecord", "CriterionSpec", "Design", "EndpointEstimate", "FisherInfo",
    "FitResult", "ModelSpec", "NominalSet", "ParamVector", "RegressionBasis",
    "SPECS", "SensitivityCurve", "SwarmConfig", "category_probs", "efficiency",
    "eval_linear_predictors", "find_design", "fisher_info", "fit_mle",
    "get_spec", "kernel_backend", "optimize", "phi_D", "phi_c", "phi_dual",
    "phi_robust", "rd50", "stilde", "uniform_design", "verify_design",
]
