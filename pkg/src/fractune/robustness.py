"""Plant-perturbation sweeps for rule-tuned controllers.

Perturbations act on the factored form of the plant: dc gain, the
dominant (largest, possibly repeated) time constant, and the dead time
each get scaled by ``1 + pct/100``, and the denominator is re-expanded
afterwards.  Benchmark plants should be built with
:func:`factored_bench`, which carries the factored construction exactly;
raw transfer functions are factored numerically, which is reliable only
up to a triple pole (the reconstruction is verified and a
:class:`~fractune.lti.DomainError` raised when it is not trustworthy,
as for the deep repeated-pole chains).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .lti import (
    DelayedTF,
    DomainError,
    ParameterError,
    RationalTF,
    TestBenchFamily,
    TestBenchSpec,
    polymul,
)
from .simulation import (
    ControllerKind,
    FOPIDParams,
    OustaloupConfig,
    SimConfig,
    Trajectory,
    closed_loop_step,
    cost_J,
)

__all__ = [
    "PerturbationSpec", "FactoredPlant", "RobustnessRow",
    "factored_bench", "numeric_factors", "perturb_factored", "perturb_plant",
    "dominant_selector_for", "select_dominant", "default_corners",
    "overshoot_pct", "is_settled", "settling_time", "robustness_sweep",
]

PCT_BOUND = 90.0
SETTLE_BAND = 0.02
SETTLE_WINDOW = 10.0


@dataclass(frozen=True)
class PerturbationSpec:
    """Percentage changes applied to gain, dominant constant, and delay."""

    dK_pct: float = 0.0
    dTau_pct: float = 0.0
    dL_pct: float = 0.0

    def __post_init__(self):
        for name in ("dK_pct", "dTau_pct", "dL_pct"):
            v = getattr(self, name)
            if not (math.isfinite(v) and abs(v) <= PCT_BOUND):
                raise ParameterError(f"|{name}| must be <= {PCT_BOUND}")

    @property
    def factors(self) -> tuple[float, float, float]:
        return (1.0 + self.dK_pct / 100.0,
                1.0 + self.dTau_pct / 100.0,
                1.0 + self.dL_pct / 100.0)

    def is_nominal(self) -> bool:
        return self.dK_pct == self.dTau_pct == self.dL_pct == 0.0

    def inverse(self) -> "PerturbationSpec":
        """The spec that exactly undoes this one in factored space.

        Scaling by ``1 + p/100`` is undone by ``-100 p / (100 + p)``, not
        by ``-p``: the naive sign flip leaves a ``1 - (p/100)^2`` residue
        (4% at p = 20), so round-tripping through this inverse is the only
        way to recover the original plant to tight tolerance.
        """
        return PerturbationSpec(
            dK_pct=-100.0 * self.dK_pct / (100.0 + self.dK_pct),
            dTau_pct=-100.0 * self.dTau_pct / (100.0 + self.dTau_pct),
            dL_pct=-100.0 * self.dL_pct / (100.0 + self.dL_pct),
        )


NOMINAL = PerturbationSpec()


def default_corners(dK: float = 10.0, dTau: float = 20.0,
                    dL: float = 50.0) -> list[PerturbationSpec]:
    """Nominal plus the eight sign corners of (±dK, ±dTau, ±dL)."""
    out = [NOMINAL]
    for sk in (1.0, -1.0):
        for st_ in (1.0, -1.0):
            for sl in (1.0, -1.0):
                out.append(PerturbationSpec(sk * dK, st_ * dTau, sl * dL))
    return out


@dataclass(frozen=True)
class FactoredPlant:
    """A plant kept as gain · zeros(s) / prod(tau_i s + 1) · e^{-Ls}."""

    gain: float
    taus: tuple[float, ...]
    zeros_poly: tuple[float, ...] = (1.0,)
    L: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(t) and t > 0.0 for t in self.taus):
            raise ParameterError("factored time constants must be positive")
        if not (math.isfinite(self.gain) and self.gain != 0.0):
            raise ParameterError("gain must be finite and nonzero")
        if not (math.isfinite(self.L) and self.L >= 0.0):
            raise ParameterError("delay must be finite and >= 0")

    def to_tf(self) -> DelayedTF:
        den = (1.0,)
        for t in self.taus:
            den = polymul(den, (t, 1.0))
        num = tuple(self.gain * c for c in self.zeros_poly)
        return DelayedTF(RationalTF(num, den), self.L)


def factored_bench(spec: TestBenchSpec) -> FactoredPlant:
    """Factored construction of one benchmark plant (exact, delay free)."""
    fam, p = spec.family, spec.param
    if fam is TestBenchFamily.P1:
        return FactoredPlant(1.0, (1.0,) * int(p))
    if fam is TestBenchFamily.P2:
        return FactoredPlant(1.0, (1.0, p, p * p, p * p * p))
    if fam is TestBenchFamily.P3:
        return FactoredPlant(1.0, (1.0, p, p))
    return FactoredPlant(1.0, (1.0, 1.0, 1.0), zeros_poly=(-p, 1.0))


def numeric_factors(p: DelayedTF, rtol: float = 1e-6) -> FactoredPlant:
    """Factor a rational plant into real first-order lags.

    Requires a denominator with unit constant term and real negative
    roots.  Root extraction is verified by re-expanding; a mismatch above
    ``rtol`` (repeated poles beyond multiplicity three get there) raises
    :class:`DomainError` rather than returning a silently wrong factoring.
    """
    tf = p.tf
    den = np.asarray(tf.den, dtype=float)
    if den[-1] == 0.0:
        raise DomainError("plant has a pole at the origin; no lag form")
    den = den / den[-1]
    roots = np.roots(den)
    if np.any(np.real(roots) >= 0.0):
        raise DomainError("plant is not a product of stable real lags")
    taus = np.real(-1.0 / roots)
    rebuilt = np.array([1.0])
    for t in taus:
        rebuilt = np.convolve(rebuilt, [t, 1.0])
    scale = max(np.max(np.abs(den)), 1.0)
    if np.max(np.abs(rebuilt - den)) > rtol * scale:
        raise DomainError(
            "denominator factoring is not numerically reliable for this "
            "plant; construct it in factored form instead")
    num = np.asarray(tf.num, dtype=float) / tf.den[-1]
    gain = num[-1]
    if gain == 0.0:
        raise DomainError("plant has zero dc gain")
    zeros_poly = tuple(num / gain)
    return FactoredPlant(float(gain), tuple(sorted(taus, reverse=True)),
                         zeros_poly, p.delay_L)


def select_dominant(taus) -> list[int]:
    """Indices of the largest time constant, including exact repeats."""
    top = max(taus)
    return [i for i, t in enumerate(taus) if abs(t - top) <= 1e-9 * top]


def dominant_selector_for(spec: TestBenchSpec):
    """Family-aware dominant-constant selection for the benchmark.

    The repeated-pole chain and the triple-pole family have all constants
    equal, so all are scaled; the spread-lag family scales its unit (the
    largest) constant; the third family scales the repeated constant even
    when it is the smaller one, since that is the knob its construction
    actually exposes.
    """
    fam = spec.family
    if fam in (TestBenchFamily.P1, TestBenchFamily.P4):
        return lambda taus: list(range(len(taus)))
    if fam is TestBenchFamily.P2:
        return lambda taus: [max(range(len(taus)), key=lambda i: taus[i])]

    def repeated(taus):
        idx = {}
        for i, t in enumerate(taus):
            idx.setdefault(round(math.log(t), 9), []).append(i)
        groups = [g for g in idx.values() if len(g) > 1]
        if not groups:
            return select_dominant(taus)
        return max(groups, key=len)

    return repeated


def perturb_factored(p: FactoredPlant, spec: PerturbationSpec,
                     dominant_tau_selector=select_dominant) -> FactoredPlant:
    """Scale gain, dominant constant(s), and delay, staying factored."""
    if spec.is_nominal():
        return p
    fK, fT, fL = spec.factors
    taus = list(p.taus)
    for i in dominant_tau_selector(taus):
        taus[i] *= fT
    if any(t <= 0.0 for t in taus):
        raise ParameterError("perturbation drove a time constant nonpositive")
    return replace(p, gain=p.gain * fK, taus=tuple(taus), L=p.L * fL)


def perturb_plant(p: DelayedTF | FactoredPlant, spec: PerturbationSpec,
                  dominant_tau_selector=select_dominant) -> DelayedTF:
    """Scale gain, dominant constant(s), and delay; re-expand to a TF."""
    if spec.is_nominal():
        return p.to_tf() if isinstance(p, FactoredPlant) else p
    factored = p if isinstance(p, FactoredPlant) else numeric_factors(p)
    return perturb_factored(factored, spec, dominant_tau_selector).to_tf()


@dataclass(frozen=True)
class RobustnessRow:
    """Closed-loop metrics at one perturbation corner."""

    spec: PerturbationSpec
    J: float
    overshoot: float
    settled: bool
    diverged: bool = False
    traj: Trajectory | None = field(default=None, repr=False, compare=False)


def overshoot_pct(traj: Trajectory, setpoint: float = 1.0) -> float:
    """Peak of y beyond the final setpoint, as a percentage of it."""
    if traj.y.size == 0:
        return math.nan
    return max(0.0, float((np.max(traj.y) - setpoint) / setpoint * 100.0))


def is_settled(traj: Trajectory, band: float = SETTLE_BAND,
               window: float = SETTLE_WINDOW) -> bool:
    """True when |e| stays inside the band for the whole final window."""
    if traj.diverged or traj.t.size == 0:
        return False
    cut = traj.t[-1] - window
    tail = traj.e[traj.t >= cut]
    return bool(tail.size) and bool(np.all(np.abs(tail) < band))


def settling_time(traj: Trajectory, band: float = SETTLE_BAND) -> float | None:
    """Earliest time after which |e| never leaves the band (None if never)."""
    if traj.diverged or traj.t.size == 0:
        return None
    bad = np.nonzero(np.abs(traj.e) >= band)[0]
    if bad.size == 0:
        return float(traj.t[0])
    if bad[-1] == traj.t.size - 1:
        return None
    return float(traj.t[bad[-1] + 1])


def robustness_sweep(
    plant: DelayedTF | FactoredPlant,
    ctrl: FOPIDParams,
    corners: list[PerturbationSpec] | None = None,
    scfg: SimConfig | None = None,
    ocfg: OustaloupConfig | None = None,
    kind: ControllerKind = ControllerKind.FOPID,
    dominant_tau_selector=select_dominant,
) -> list[RobustnessRow]:
    """Simulate the loop at every corner; divergence is reported, not raised.

    Deterministic and pure: same (plant, ctrl, corners, configs) gives
    identical rows.  Corners are independent, so callers may shard them.
    """
    corners = default_corners() if corners is None else corners
    scfg = scfg or SimConfig()
    rows = []
    for c in corners:
        perturbed = perturb_plant(plant, c, dominant_tau_selector)
        traj = closed_loop_step(perturbed, ctrl, ocfg, scfg, kind)
        rows.append(RobustnessRow(
            spec=c,
            J=cost_J(traj, scfg.w_itae, scfg.w_isco),
            overshoot=overshoot_pct(traj),
            settled=is_settled(traj),
            diverged=traj.diverged,
            traj=traj,
        ))
    return rows
