"""Fit FOPTD/SOPTD templates to higher-order processes.

Two fitting objectives are provided: an H2-norm of the model mismatch and a
Nyquist-plane objective that penalizes real- and imaginary-part deviations
over a logarithmic frequency grid.  Both treat the template dead time as a
third-order all-pass rational factor by default, so the mismatch stays
rational.  The search itself is delegated to :mod:`fractune.ga`; the template
gain is pinned to the plant dc gain and never searched.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .ga import GAConfig, GAResult, run_ga
from .lti import (
    DelayedTF,
    DelayMode,
    ParameterError,
    freq_response_array,
    make_foptd,
    make_soptd,
)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class FrequencyGrid:
    """Log-spaced positive frequency samples, rad/s by default.

    Set ``in_hz=True`` when the endpoints are given in Hz; the generated
    points are always rad/s.
    """

    omega_lo: float = 1e-4
    omega_hi: float = 1e4
    count: int = 500
    in_hz: bool = False

    def __post_init__(self):
        if not 0.0 < self.omega_lo < self.omega_hi:
            raise ParameterError("need 0 < omega_lo < omega_hi")
        if self.count < 2:
            raise ParameterError("need at least two grid points")

    def points(self) -> np.ndarray:
        scale = TWO_PI if self.in_hz else 1.0
        return np.geomspace(scale * self.omega_lo, scale * self.omega_hi, self.count)


@dataclass(frozen=True)
class ObjectiveConfig:
    weight_re: float = 1.0
    weight_im: float = 1.0
    grid: FrequencyGrid = field(default_factory=FrequencyGrid)
    delay_mode: DelayMode = DelayMode.PADE3

    def __post_init__(self):
        if self.weight_re < 0.0 or self.weight_im < 0.0:
            raise ParameterError("weights must be non-negative")


class Objective(str, enum.Enum):
    H2 = "h2"
    NYQUIST = "nyquist"


class Template(str, enum.Enum):
    FOPTD = "foptd"
    SOPTD = "soptd"


def j_nyquist(plant: DelayedTF, reduced: DelayedTF, cfg: ObjectiveConfig | None = None) -> float:
    """Weighted sum of Euclidean real/imaginary mismatch over the grid."""
    cfg = cfg or ObjectiveConfig()
    w = cfg.grid.points()
    hp = freq_response_array(plant, w, cfg.delay_mode)
    hr = freq_response_array(reduced, w, cfg.delay_mode)
    d_re = hp.real - hr.real
    d_im = hp.imag - hr.imag
    return float(
        cfg.weight_re * math.sqrt(float(d_re @ d_re))
        + cfg.weight_im * math.sqrt(float(d_im @ d_im))
    )


# Gauss-Legendre nodes for the H2 mismatch integral, mapped onto omega =
# tan(theta) so the half line is covered exactly; cached at import time.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(768)
_GL_THETA = 0.25 * math.pi * (_GL_NODES + 1.0)
_GL_OMEGA = np.tan(_GL_THETA)
_GL_SCALE = 0.25 * math.pi * _GL_WEIGHTS / np.cos(_GL_THETA) ** 2


def j_h2(plant: DelayedTF, reduced: DelayedTF, cfg: ObjectiveConfig | None = None) -> float:
    """H2 norm of the mismatch between plant and reduced model.

    Computed as a frequency-domain quadrature of the pointwise difference of
    the two responses.  Evaluating the difference pointwise (instead of
    subtracting transfer-function polynomials) keeps the result accurate even
    when the mismatch is tiny relative to the individual responses.
    """
    cfg = cfg or ObjectiveConfig()
    hp = freq_response_array(plant, _GL_OMEGA, cfg.delay_mode)
    hr = freq_response_array(reduced, _GL_OMEGA, cfg.delay_mode)
    mag2 = np.abs(hp - hr) ** 2
    return math.sqrt(float(np.dot(_GL_SCALE, mag2)) / math.pi)


@dataclass(frozen=True)
class ReducedModel:
    """Template parameters; ``tau_min`` is None for FOPTD."""

    template: Template
    K: float
    tau_max: float
    L: float
    tau_min: float | None = None

    def to_tf(self) -> DelayedTF:
        if self.template is Template.FOPTD:
            return make_foptd(self.K, self.tau_max, self.L)
        return make_soptd(self.K, self.tau_max, self.tau_min, self.L)


@dataclass
class ReductionRecord:
    model: ReducedModel
    j_value: float
    objective: Objective
    seed: int
    evaluations: int
    history: list[tuple[int, float, float]]


# Template parameters live in (0, 10]; the lower edge is kept strictly
# positive so log-uniform seeding and the SOPTD->FOPTD degeneracy both work.
PARAM_LO = 1e-4
PARAM_HI = 10.0


def default_reduction_ga(template: Template, pop_size: int = 50) -> GAConfig:
    dim = 2 if template is Template.FOPTD else 3
    return GAConfig(
        bounds=((PARAM_LO, PARAM_HI),) * dim,
        pop_size=pop_size,
        elite_count=2,
        max_generations=100,
        stall_generations=100,
        log_init=True,
    )


def reduce_plant(
    plant: DelayedTF,
    template: Template,
    objective: Objective = Objective.NYQUIST,
    cfg: ObjectiveConfig | None = None,
    ga_cfg: GAConfig | None = None,
    seed: int = 0,
    initial_guesses=None,
) -> ReductionRecord:
    """GA search for the best template parameters under the given objective.

    The SOPTD gene vector is (tau_a, tau_b, L) with the two lags sorted on
    evaluation, so the search space is symmetric.  ``initial_guesses`` lets a
    caller warm-seed the population (e.g. with a previously found FOPTD
    optimum when fitting the SOPTD template).
    """
    template = Template(template)
    objective = Objective(objective)
    cfg = cfg or ObjectiveConfig()
    ga_cfg = ga_cfg or default_reduction_ga(template)
    K = plant.tf.dc_gain()
    score = j_h2 if objective is Objective.H2 else j_nyquist

    def model_of(genes) -> ReducedModel:
        if template is Template.FOPTD:
            tau, L = genes
            return ReducedModel(template, K, float(tau), float(L))
        ta, tb, L = genes
        return ReducedModel(
            template, K, float(max(ta, tb)), float(L), float(min(ta, tb))
        )

    def evaluate(genes) -> float:
        return score(plant, model_of(genes).to_tf(), cfg)

    result: GAResult = run_ga(
        evaluate, ga_cfg, seed=seed, initial_guesses=initial_guesses
    )
    model = model_of(result.best_genes)
    return ReductionRecord(
        model=model,
        j_value=result.best_objective,
        objective=objective,
        seed=seed,
        evaluations=result.evaluations,
        history=result.history,
    )
