"""Loaders for the published benchmark fixtures shipped with the package.

The fixtures are verbatim transcriptions of the published reduction,
tuning, and rule tables for the 38-plant benchmark, stored as CSV under
``fractune/fixtures`` with a sha256 manifest.  Two printing defects in
the source are normalized here and only here: the PID tuning table's
family labels drift one row starting at the ninth lag-chain entry (rows
are therefore assigned by counting, eight / nine / ten / eleven per
family), and the fractional tuning table has no row for the ratio-0.9
lag-chain plant (37 rows, not 38).

Everything is read-only; loaders verify the manifest digest before first
use and cache parsed rows.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from functools import cache
from importlib import resources

from .lti import TestBenchFamily, TestBenchSpec
from .rules import SOPTDParams
from .simulation import ControllerKind, FOPIDParams

__all__ = [
    "ReductionRow", "PIDTuningRow", "FOPIDTuningRow", "RuleTableRow",
    "load_h2_reductions", "load_nyquist_reductions",
    "load_pid_tunings", "load_fopid_tunings", "load_rule_table",
    "benchmark_specs", "representative_specs", "soptd_for",
    "verify_fixtures", "FixtureError",
]


class FixtureError(RuntimeError):
    """A fixture file is missing or does not match its manifest digest."""


_DIR = "fixtures"
_MANIFEST = "sha256.csv"


def _fixture_root():
    return resources.files("fractune") / _DIR


@cache
def _manifest() -> dict[str, str]:
    path = _fixture_root() / _MANIFEST
    out: dict[str, str] = {}
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            out[row["name"]] = row["sha256"]
    return out


def _read_fixture(name: str) -> str:
    path = _fixture_root() / name
    try:
        raw = path.read_bytes()
    except FileNotFoundError as exc:
        raise FixtureError(f"missing fixture {name}") from exc
    want = _manifest().get(name)
    if want is None:
        raise FixtureError(f"fixture {name} has no manifest entry")
    got = hashlib.sha256(raw).hexdigest()
    if got != want:
        raise FixtureError(f"fixture {name} digest mismatch: {got} != {want}")
    return raw.decode()


def verify_fixtures() -> list[str]:
    """Check every manifest entry; returns the verified file names."""
    names = sorted(_manifest())
    for name in names:
        _read_fixture(name)
    return names


def _rows(name: str) -> list[dict[str, str]]:
    return list(csv.DictReader(_read_fixture(name).splitlines()))


@dataclass(frozen=True)
class ReductionRow:
    """One benchmark plant's published reduced models, both templates."""

    spec: TestBenchSpec
    foptd_J: float
    foptd_tau: float
    foptd_L: float
    soptd_J: float
    soptd_tau_max: float
    soptd_tau_min: float
    soptd_L: float

    def soptd(self, K: float = 1.0) -> SOPTDParams:
        return SOPTDParams(K=K, tau_max=self.soptd_tau_max,
                           tau_min=self.soptd_tau_min, L=self.soptd_L)


@dataclass(frozen=True)
class PIDTuningRow:
    spec: TestBenchSpec
    J: float
    params: FOPIDParams


@dataclass(frozen=True)
class FOPIDTuningRow:
    spec: TestBenchSpec
    J: float
    params: FOPIDParams


@dataclass(frozen=True)
class RuleTableRow:
    """One row of the representative-plant parameter comparison table."""

    plant: str
    spec: TestBenchSpec
    controller: ControllerKind
    source: str  # "sg_rule", "mg_rule", or "GA"
    params: FOPIDParams


def _spec(row: dict[str, str]) -> TestBenchSpec:
    return TestBenchSpec(TestBenchFamily(row["family"]), float(row["param"]))


def _reduction_table(name: str) -> list[ReductionRow]:
    return [
        ReductionRow(
            spec=_spec(r),
            foptd_J=float(r["foptd_J"]),
            foptd_tau=float(r["foptd_tau"]),
            foptd_L=float(r["foptd_L"]),
            soptd_J=float(r["soptd_J"]),
            soptd_tau_max=float(r["soptd_tau_max"]),
            soptd_tau_min=float(r["soptd_tau_min"]),
            soptd_L=float(r["soptd_L"]),
        )
        for r in _rows(name)
    ]


@cache
def load_h2_reductions() -> tuple[ReductionRow, ...]:
    return tuple(_reduction_table("table1_h2.csv"))


@cache
def load_nyquist_reductions() -> tuple[ReductionRow, ...]:
    return tuple(_reduction_table("table2_nyquist.csv"))


@cache
def load_pid_tunings() -> tuple[PIDTuningRow, ...]:
    return tuple(
        PIDTuningRow(
            spec=_spec(r), J=float(r["J"]),
            params=FOPIDParams(Kp=float(r["Kp"]), Ki=float(r["Ki"]),
                               Kd=float(r["Kd"])),
        )
        for r in _rows("table3_pid.csv")
    )


@cache
def load_fopid_tunings() -> tuple[FOPIDTuningRow, ...]:
    return tuple(
        FOPIDTuningRow(
            spec=_spec(r), J=float(r["J"]),
            params=FOPIDParams(Kp=float(r["Kp"]), Ki=float(r["Ki"]),
                               Kd=float(r["Kd"]), lam=float(r["lam"]),
                               mu=float(r["mu"])),
        )
        for r in _rows("table4_fopid.csv")
    )


@cache
def load_rule_table() -> tuple[RuleTableRow, ...]:
    out = []
    for r in _rows("table5_rules.csv"):
        kind = ControllerKind(r["controller"])
        lam = float(r["lam"]) if r["lam"] else 1.0
        mu = float(r["mu"]) if r["mu"] else 1.0
        out.append(RuleTableRow(
            plant=r["plant"], spec=_spec(r), controller=kind,
            source=r["source"],
            params=FOPIDParams(Kp=float(r["Kp"]), Ki=float(r["Ki"]),
                               Kd=float(r["Kd"]), lam=lam, mu=mu),
        ))
    return tuple(out)


def benchmark_specs() -> list[TestBenchSpec]:
    """The 38 benchmark plants in canonical (published) order."""
    return [row.spec for row in load_nyquist_reductions()]


def representative_specs() -> dict[str, TestBenchSpec]:
    """The four validation plants, keyed P1..P4."""
    out: dict[str, TestBenchSpec] = {}
    for row in load_rule_table():
        out.setdefault(row.plant, row.spec)
    return out


def soptd_for(spec: TestBenchSpec, K: float = 1.0) -> SOPTDParams:
    """Published Nyquist-objective SOPTD reduction of one bench plant."""
    for row in load_nyquist_reductions():
        if row.spec == spec:
            return row.soptd(K)
    raise KeyError(f"no published reduction for {spec.label()}")
