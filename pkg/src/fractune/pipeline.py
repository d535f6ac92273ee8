"""File-based stage runner behind the ``fractune`` command line.

A run is described by a JSON manifest: a seed, an output directory, and a
list of stages with per-stage options.  Stages always execute in
dependency order (reduce, tune, gp, evaluate, robustness) no matter how
the manifest lists them.  Every stage writes CSV/JSON products under the
output directory only, records a content hash in a stamp file, and a
pipeline rerun skips stages whose stamp and outputs are intact.  A stage
that dies part-way leaves a ``<stage>.partial.json`` marker next to its
outputs before the error propagates.

All randomness is derived from the manifest seed, so reruns with the same
manifest are byte-identical.  Fixture tables are read-only inputs; when a
manifest points at its own fixture directory the files there must match
the packaged checksums exactly.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import published
from .gp import (
    FeatureVector,
    GPConfig,
    GPMode,
    MultiGeneModel,
    expr_to_text,
    feature_matrix,
    run_gp,
)
from .lti import (
    ParameterError,
    TestBenchFamily,
    TestBenchSpec,
    make_testbench,
)
from .reduction import (
    PARAM_LO,
    Objective,
    ReductionRecord,
    Template,
    default_reduction_ga,
    reduce_plant,
)
from .robustness import (
    default_corners,
    dominant_selector_for,
    factored_bench,
    is_settled,
    overshoot_pct,
    robustness_sweep,
    settling_time,
)
from .rules import GeneMode, RuleKind, apply_rule
from .simulation import (
    ControllerKind,
    FOPIDParams,
    SimConfig,
    closed_loop_step,
    cost_J,
    default_tuning_ga,
    tune_controller,
)

__all__ = [
    "Source", "TuningRecord", "StageSpec", "RunManifest", "StageReport",
    "STAGE_ORDER", "cmd_reduce", "cmd_tune", "cmd_evolve_rules",
    "cmd_evaluate", "cmd_robustness", "run_stage", "run_pipeline",
    "stage_hash",
]

log = logging.getLogger(__name__)

STAGE_ORDER = ("reduce", "tune", "gp", "evaluate", "robustness")


class Source(str, enum.Enum):
    """Provenance of a controller parameter set."""

    GA = "GA"
    SG_RULE = "sg_rule"
    MG_RULE = "mg_rule"


@dataclass(frozen=True)
class TuningRecord:
    """One tuned controller with its closed-loop cost."""

    spec: TestBenchSpec
    controller: ControllerKind
    source: Source
    params: FOPIDParams
    J: float

    def __post_init__(self):
        object.__setattr__(self, "controller", ControllerKind(self.controller))
        object.__setattr__(self, "source", Source(self.source))
        if math.isnan(self.J) or self.J < 0.0:
            raise ParameterError("J must be >= 0")


@dataclass(frozen=True)
class StageSpec:
    name: str
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in STAGE_ORDER:
            raise ParameterError(
                f"unknown stage {self.name!r}; expected one of {STAGE_ORDER}")


@dataclass(frozen=True)
class RunManifest:
    """Everything a run needs: seed, stage list, and directories.

    ``fixture_dir`` is informational unless set: the packaged fixture
    tables are always the parsing source, and a non-default directory is
    verified byte-for-byte against the packaged checksums so a run can
    never diff against silently divergent numbers.
    """

    seed: int
    stages: tuple[StageSpec, ...]
    output_dir: Path
    fixture_dir: Path | None = None

    def __post_init__(self):
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ParameterError("seed must be an integer")
        names = [s.name for s in self.stages]
        if len(set(names)) != len(names):
            raise ParameterError("duplicate stage names in manifest")
        ordered = tuple(sorted(self.stages, key=lambda s: STAGE_ORDER.index(s.name)))
        object.__setattr__(self, "stages", ordered)
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        if self.fixture_dir is not None:
            object.__setattr__(self, "fixture_dir", Path(self.fixture_dir))

    @classmethod
    def from_dict(cls, data: dict) -> "RunManifest":
        stages = tuple(
            StageSpec(s["name"], dict(s.get("options") or {}))
            for s in data.get("stages", [{"name": n} for n in STAGE_ORDER])
        )
        fx = data.get("fixture_dir")
        return cls(
            seed=data.get("seed", 0),
            stages=stages,
            output_dir=Path(data.get("output_dir", "fractune_out")),
            fixture_dir=Path(fx) if fx else None,
        )

    @classmethod
    def from_json_file(cls, path) -> "RunManifest":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "stages": [{"name": s.name, "options": s.options} for s in self.stages],
            "output_dir": str(self.output_dir),
            "fixture_dir": None if self.fixture_dir is None else str(self.fixture_dir),
        }

    def options_for(self, name: str) -> dict:
        for s in self.stages:
            if s.name == name:
                return dict(s.options)
        return {}

    def with_stage(self, name: str, **options) -> "RunManifest":
        kept = tuple(s for s in self.stages if s.name != name)
        return replace(self, stages=kept + (StageSpec(name, options),))


def default_manifest(seed: int, output_dir, stages=STAGE_ORDER) -> RunManifest:
    return RunManifest(
        seed=seed,
        stages=tuple(StageSpec(n) for n in stages),
        output_dir=Path(output_dir),
    )


@dataclass
class StageReport:
    """What one stage did: products, hard gate failures, soft notes."""

    stage: str
    rows: int
    outputs: tuple[Path, ...]
    gate_failures: tuple[str, ...] = ()
    notes: tuple[str, ...] = ()
    skipped: bool = False


# ---------------------------------------------------------------------------
# deterministic serialization helpers

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, float):
        # plain-float repr is shortest-roundtrip; numpy scalars are not
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    path.write_text(buf.getvalue())


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _mix(seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:4], "big")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _canon(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _spec_from_label(label: str) -> TestBenchSpec:
    try:
        fam_s, rest = label.split("_", 1)
        fam = TestBenchFamily(fam_s)
        value = rest.lstrip("nalphT")
        return TestBenchSpec(fam, float(value))
    except (ValueError, KeyError) as exc:
        raise ParameterError(f"bad plant label {label!r}") from exc


def _spec_from_row(row: dict) -> TestBenchSpec:
    return TestBenchSpec(TestBenchFamily(row["family"]), float(row["param"]))


def _resolve_specs(opt) -> list[TestBenchSpec]:
    if opt is None:
        return published.benchmark_specs()
    return [_spec_from_label(s) for s in opt]


def _verify_fixture_dir(manifest: RunManifest) -> None:
    if manifest.fixture_dir is None:
        return
    packaged = {name: published._manifest()[name] for name in published._manifest()}
    for name, want in sorted(packaged.items()):
        p = manifest.fixture_dir / name
        if not p.is_file():
            raise published.FixtureError(f"fixture_dir is missing {name}")
        got = hashlib.sha256(p.read_bytes()).hexdigest()
        if got != want:
            raise published.FixtureError(
                f"fixture_dir copy of {name} diverges from the packaged table")


def _guarded(manifest: RunManifest, stage: str, body):
    """Run a stage body; on failure leave a partial-results marker."""
    out = manifest.output_dir
    out.mkdir(parents=True, exist_ok=True)
    _verify_fixture_dir(manifest)
    marker = out / f"{stage}.partial.json"
    try:
        report = body()
    except Exception as exc:
        _write_json(marker, {"stage": stage, "error": f"{type(exc).__name__}: {exc}"})
        raise
    if marker.exists():
        marker.unlink()
    return report


# ---------------------------------------------------------------------------
# reduce

_REDUCE_HEADER = ("family", "param", "template", "objective",
                  "J_min", "K", "tau_max", "tau_min", "L")
_DIFF_HEADER = ("family", "param", "template", "objective", "cell",
                "ours", "fixture", "ratio", "rel_dev")

_FIXTURE_CELLS = {
    Template.FOPTD: (("J_min", "foptd_J"), ("tau_max", "foptd_tau"),
                     ("L", "foptd_L")),
    Template.SOPTD: (("J_min", "soptd_J"), ("tau_max", "soptd_tau_max"),
                     ("tau_min", "soptd_tau_min"), ("L", "soptd_L")),
}


def _reduction_fixture(objective: Objective):
    rows = (published.load_h2_reductions() if objective is Objective.H2
            else published.load_nyquist_reductions())
    return {r.spec: r for r in rows}


def cmd_reduce(manifest: RunManifest) -> StageReport:
    """Fit both templates under both objectives across the bench.

    The second-order search is warm-seeded with the first-order optimum,
    which also realizes the expected ordering between the two fits.
    """
    return _guarded(manifest, "reduce", lambda: _reduce_body(manifest))


def _reduce_body(manifest: RunManifest) -> StageReport:
    opts = manifest.options_for("reduce")
    pop = int(opts.get("pop_size", 50))
    gens = int(opts.get("max_generations", 100))
    templates = [Template(t) for t in opts.get("templates", ("foptd", "soptd"))]
    objectives = [Objective(o) for o in opts.get("objectives", ("h2", "nyquist"))]
    specs = _resolve_specs(opts.get("specs"))
    out = manifest.output_dir

    table_rows = []
    results: dict[tuple, ReductionRecord] = {}
    for spec in specs:
        plant = make_testbench(spec)
        for objective in objectives:
            guesses = None
            for template in templates:
                ga_cfg = replace(default_reduction_ga(template, pop),
                                 max_generations=gens)
                rec = reduce_plant(
                    plant, template, objective,
                    ga_cfg=ga_cfg,
                    seed=_mix(manifest.seed,
                              f"reduce:{spec.label()}:{template.value}:{objective.value}"),
                    initial_guesses=guesses,
                )
                results[(spec, template, objective)] = rec
                m = rec.model
                if template is Template.FOPTD:
                    # degenerate and critically damped second-order starts
                    guesses = [(m.tau_max, PARAM_LO, m.L),
                               (m.tau_max, m.tau_max, m.L)]
                table_rows.append((
                    spec.family.value, spec.param, template.value,
                    objective.value, rec.j_value, m.K, m.tau_max,
                    m.tau_min, m.L,
                ))

    csv_path = out / "reduce.csv"
    _write_csv(csv_path, _REDUCE_HEADER, table_rows)

    diff_rows = []
    for (spec, template, objective), rec in results.items():
        fixture = _reduction_fixture(objective).get(spec)
        if fixture is None:
            continue
        ours = {"J_min": rec.j_value, "tau_max": rec.model.tau_max,
                "tau_min": rec.model.tau_min, "L": rec.model.L}
        for cell, fx_name in _FIXTURE_CELLS[template]:
            ref = getattr(fixture, fx_name)
            val = ours[cell]
            ratio = val / ref if ref else None
            rel = abs(val - ref) / abs(ref) if ref else None
            diff_rows.append((spec.family.value, spec.param, template.value,
                              objective.value, cell, val, ref, ratio, rel))
    diff_path = out / "reduce_diff.csv"
    _write_csv(diff_path, _DIFF_HEADER, diff_rows)

    failures = []
    notes = []
    if Objective.NYQUIST in objectives:
        fixture = _reduction_fixture(Objective.NYQUIST)
        for spec in specs:
            rec = results.get((spec, Template.SOPTD, Objective.NYQUIST))
            if rec is not None and spec in fixture:
                bound = 2.0 * fixture[spec].soptd_J
                if rec.j_value > bound:
                    failures.append(
                        f"{spec.label()} nyquist soptd J {rec.j_value:.6g} "
                        f"exceeds 2x fixture {bound:.6g}")
            f_rec = results.get((spec, Template.FOPTD, Objective.NYQUIST))
            if rec is not None and f_rec is not None \
                    and rec.j_value > f_rec.j_value:
                failures.append(
                    f"{spec.label()} nyquist soptd J {rec.j_value:.6g} "
                    f"above foptd J {f_rec.j_value:.6g}")
    if Objective.H2 in objectives and Template.SOPTD in templates:
        worse = sum(
            1 for spec in specs
            if (spec, Template.SOPTD, Objective.H2) in results
            and (spec, Template.FOPTD, Objective.H2) in results
            and results[(spec, Template.SOPTD, Objective.H2)].j_value
            > results[(spec, Template.FOPTD, Objective.H2)].j_value)
        notes.append(f"h2 soptd worse than foptd on {worse} plants")

    return StageReport("reduce", len(table_rows), (csv_path, diff_path),
                       tuple(failures), tuple(notes))


# ---------------------------------------------------------------------------
# tune

_TUNE_HEADER = ("family", "param", "controller", "source",
                "J", "Kp", "Ki", "Kd", "lam", "mu")
_TUNE_DIFF_HEADER = ("family", "param", "controller", "source", "cell",
                     "ours", "fixture", "ratio", "rel_dev")


def _tuning_fixture(kind: ControllerKind):
    rows = (published.load_pid_tunings() if kind is ControllerKind.PID
            else published.load_fopid_tunings())
    return {r.spec: r for r in rows}


def cmd_tune(manifest: RunManifest) -> StageReport:
    """GA-tune PID and FOPID controllers against the full-order plants."""
    return _guarded(manifest, "tune", lambda: _tune_body(manifest))


def _tune_body(manifest: RunManifest) -> StageReport:
    opts = manifest.options_for("tune")
    scfg = SimConfig(dt=float(opts.get("dt", 0.05)),
                     horizon=float(opts.get("horizon", 100.0)))
    pop = int(opts.get("pop_size", 20))
    gens = int(opts.get("max_generations", 100))
    kinds = [ControllerKind(k) for k in opts.get("kinds", ("pid", "fopid"))]
    specs = _resolve_specs(opts.get("specs"))
    out = manifest.output_dir

    records: list[TuningRecord] = []
    for kind in kinds:
        for spec in specs:
            ga_cfg = replace(default_tuning_ga(kind, pop), max_generations=gens)
            res = tune_controller(
                make_testbench(spec), kind, scfg=scfg, ga_cfg=ga_cfg,
                seed=_mix(manifest.seed, f"tune:{spec.label()}:{kind.value}"))
            records.append(TuningRecord(spec, kind, Source.GA,
                                        res.params, res.j_value))

    csv_path = out / "tuning.csv"
    _write_csv(csv_path, _TUNE_HEADER, [
        (r.spec.family.value, r.spec.param, r.controller.value,
         r.source.value, r.J, r.params.Kp, r.params.Ki, r.params.Kd,
         r.params.lam, r.params.mu)
        for r in records
    ])

    diff_rows = []
    within = {k: 0 for k in kinds}
    compared = {k: 0 for k in kinds}
    for r in records:
        fixture = _tuning_fixture(r.controller).get(r.spec)
        if fixture is None:
            continue
        cells = [("J", r.J, fixture.J),
                 ("Kp", r.params.Kp, fixture.params.Kp),
                 ("Ki", r.params.Ki, fixture.params.Ki),
                 ("Kd", r.params.Kd, fixture.params.Kd)]
        if r.controller is ControllerKind.FOPID:
            cells += [("lam", r.params.lam, fixture.params.lam),
                      ("mu", r.params.mu, fixture.params.mu)]
        for cell, val, ref in cells:
            ratio = val / ref if ref else None
            rel = abs(val - ref) / abs(ref) if ref else None
            diff_rows.append((r.spec.family.value, r.spec.param,
                              r.controller.value, "GA", cell, val, ref,
                              ratio, rel))
        compared[r.controller] += 1
        if abs(r.J - fixture.J) <= 0.10 * fixture.J:
            within[r.controller] += 1
    diff_path = out / "tuning_diff.csv"
    _write_csv(diff_path, _TUNE_DIFF_HEADER, diff_rows)

    failures = []
    notes = []
    full_bench = len(specs) == len(published.benchmark_specs())
    for kind in kinds:
        notes.append(f"{kind.value}: J within 10% of the printed table on "
                     f"{within[kind]} of {compared[kind]} plants")
        if full_bench and within[kind] < 30:
            failures.append(
                f"{kind.value}: only {within[kind]} of {compared[kind]} "
                "plants within 10% (need 30)")
    fopid = [r for r in records if r.controller is ControllerKind.FOPID]
    if fopid:
        in_band = sum(1 for r in fopid if 0.9 <= r.params.lam <= 1.0)
        notes.append(f"lam in [0.9, 1.0] for {in_band} of {len(fopid)} "
                     "fopid tunings")

    report_path = out / "tuning_report.txt"
    report_path.write_text("".join(n + "\n" for n in notes))
    return StageReport("tune", len(records), (csv_path, diff_path, report_path),
                       tuple(failures), tuple(notes))


# ---------------------------------------------------------------------------
# gp (rule evolution)

_TARGETS = (
    (ControllerKind.PID, "Kp"), (ControllerKind.PID, "Ki"),
    (ControllerKind.PID, "Kd"),
    (ControllerKind.FOPID, "Kp"), (ControllerKind.FOPID, "Ki"),
    (ControllerKind.FOPID, "Kd"), (ControllerKind.FOPID, "lam"),
    (ControllerKind.FOPID, "mu"),
)

_PARETO_HEADER = ("node_count", "mae", "model")


def _model_text(model: MultiGeneModel) -> str:
    parts = [repr(model.bias)]
    parts += [f"{w!r}*({expr_to_text(g)})"
              for w, g in zip(model.weights, model.genes)]
    return " + ".join(parts)


def _training_features(manifest: RunManifest):
    """Feature rows keyed by spec, preferring this run's reduce output."""
    path = manifest.output_dir / "reduce.csv"
    if path.is_file():
        feats = {}
        for row in csv.DictReader(path.read_text().splitlines()):
            if row["template"] == "soptd" and row["objective"] == "nyquist":
                feats[_spec_from_row(row)] = FeatureVector(
                    float(row["K"]), float(row["tau_max"]),
                    float(row["tau_min"]), float(row["L"]))
        if feats:
            return feats, "reduce.csv"
    feats = {r.spec: r.soptd().features()
             for r in published.load_nyquist_reductions()}
    return feats, "fixtures"


def _training_targets(manifest: RunManifest):
    """(spec, kind) -> FOPIDParams used as regression targets."""
    path = manifest.output_dir / "tuning.csv"
    if path.is_file():
        out = {}
        for row in csv.DictReader(path.read_text().splitlines()):
            if row["source"] != Source.GA.value:
                continue
            key = (_spec_from_row(row), ControllerKind(row["controller"]))
            out[key] = FOPIDParams(float(row["Kp"]), float(row["Ki"]),
                                   float(row["Kd"]), float(row["lam"]),
                                   float(row["mu"]))
        if out:
            return out, "tuning.csv"
    out = {}
    for r in published.load_pid_tunings():
        out[(r.spec, ControllerKind.PID)] = r.params
    for r in published.load_fopid_tunings():
        out[(r.spec, ControllerKind.FOPID)] = r.params
    return out, "fixtures"


def cmd_evolve_rules(manifest: RunManifest) -> StageReport:
    """Regress controller parameters on reduced-model features with GP.

    Training rows come from this run's reduce and tune outputs when
    present, and from the packaged tables otherwise (where the printed
    fractional table is one plant short, that target trains on 37 rows).
    """
    return _guarded(manifest, "gp", lambda: _gp_body(manifest))


def _gp_body(manifest: RunManifest) -> StageReport:
    opts = manifest.options_for("gp")
    cfg = GPConfig(pop_size=int(opts.get("pop_size", 200)),
                   generations=int(opts.get("generations", 30)))
    aliases = {"single": GPMode.SINGLE_GENE, "multi": GPMode.MULTI_GENE}
    modes = [aliases.get(m, None) or GPMode(m)
             for m in opts.get("modes", ("single_gene", "multi_gene"))]
    wanted = opts.get("targets")
    targets = [t for t in _TARGETS
               if wanted is None or f"{t[0].value}.{t[1]}" in wanted]
    out = manifest.output_dir

    feats, feat_src = _training_features(manifest)
    params, param_src = _training_targets(manifest)

    outputs = []
    failures = []
    notes = [f"features from {feat_src}; targets from {param_src}"]
    for mode in modes:
        mode_tag = "single" if mode is GPMode.SINGLE_GENE else "multi"
        models_doc = {}
        for kind, name in targets:
            specs = sorted(
                (s for s in feats if (s, kind) in params),
                key=lambda s: published.benchmark_specs().index(s))
            X = feature_matrix([feats[s] for s in specs])
            y = np.array([getattr(params[(s, kind)], name) for s in specs])
            model, pareto = run_gp(
                X, y, cfg, mode,
                seed=_mix(manifest.seed, f"gp:{mode_tag}:{kind.value}:{name}"))
            pred = model.predict(X)
            if not np.all(np.isfinite(pred)):
                failures.append(
                    f"{mode_tag} {kind.value}.{name}: model not total on "
                    "its training rows")
            mae = float(np.mean(np.abs(pred - y)))
            key = f"{kind.value}.{name}"
            models_doc[key] = {
                "bias": model.bias,
                "weights": list(model.weights),
                "genes": [expr_to_text(g) for g in model.genes],
                "train_mae": mae,
                "rows": len(specs),
            }
            notes.append(f"{mode_tag} {key}: mae {mae:.6g} on {len(specs)} rows")
            pareto_path = out / f"pareto_{mode_tag}_{kind.value}_{name}.csv"
            _write_csv(pareto_path, _PARETO_HEADER, [
                (e.node_count, e.mae, _model_text(e.model)) for e in pareto
            ])
            outputs.append(pareto_path)
        doc_path = out / f"rules_{mode_tag}.json"
        _write_json(doc_path, models_doc)
        outputs.append(doc_path)

    n_models = len(modes) * len(targets)
    return StageReport("gp", n_models, tuple(outputs), tuple(failures),
                       tuple(notes))


# ---------------------------------------------------------------------------
# evaluate

_EVAL_HEADER = ("plant", "controller", "source", "Kp", "Ki", "Kd",
                "lam", "mu", "J", "overshoot", "settled", "settling_time")


def _ga_params(manifest: RunManifest, spec: TestBenchSpec,
               kind: ControllerKind) -> FOPIDParams | None:
    """GA-source parameters: this run's tuning output, else the printed row."""
    path = manifest.output_dir / "tuning.csv"
    if path.is_file():
        for row in csv.DictReader(path.read_text().splitlines()):
            if (row["source"] == Source.GA.value
                    and ControllerKind(row["controller"]) is kind
                    and _spec_from_row(row) == spec):
                return FOPIDParams(
                    float(row["Kp"]), float(row["Ki"]), float(row["Kd"]),
                    float(row["lam"]), float(row["mu"]))
    fixture = _tuning_fixture(kind).get(spec)
    return None if fixture is None else fixture.params


def cmd_evaluate(manifest: RunManifest) -> StageReport:
    """Compare GA, single-gene, and multi-gene controllers head to head."""
    return _guarded(manifest, "evaluate", lambda: _evaluate_body(manifest))


def _evaluate_body(manifest: RunManifest) -> StageReport:
    opts = manifest.options_for("evaluate")
    scfg = SimConfig(dt=float(opts.get("dt", 0.05)),
                     horizon=float(opts.get("horizon", 100.0)))
    kinds = [ControllerKind(k) for k in opts.get("kinds", ("pid", "fopid"))]
    sources = [Source(s) for s in opts.get(
        "sources", ("GA", "sg_rule", "mg_rule"))]
    plants = opts.get("plants")
    specs = (list(published.representative_specs().values())
             if plants is None else [_spec_from_label(p) for p in plants])
    out = manifest.output_dir

    rows = []
    outputs = []
    J_by = {}
    table_J = {}
    for spec in specs:
        plant = make_testbench(spec)
        soptd = published.soptd_for(spec)
        for kind in kinds:
            for source in sources:
                if source is Source.GA:
                    params = _ga_params(manifest, spec, kind)
                    if params is None:
                        continue
                    fixture = _tuning_fixture(kind).get(spec)
                    if fixture is not None:
                        table_J[(spec, kind)] = fixture.J
                else:
                    gene = (GeneMode.SINGLE if source is Source.SG_RULE
                            else GeneMode.MULTI)
                    params = apply_rule(RuleKind(kind, gene), soptd)
                traj = closed_loop_step(plant, params, scfg=scfg, kind=kind)
                J = cost_J(traj, scfg.w_itae, scfg.w_isco)
                J_by[(spec, kind, source)] = J
                st = settling_time(traj)
                rows.append((spec.label(), kind.value, source.value,
                             params.Kp, params.Ki, params.Kd, params.lam,
                             params.mu, J, overshoot_pct(traj),
                             is_settled(traj), st))
                traj_path = out / f"traj_{spec.label()}_{kind.value}_{source.value}.csv"
                _write_csv(traj_path, ("t", "y", "u", "e"),
                           zip(traj.t, traj.y, traj.u, traj.e))
                outputs.append(traj_path)

    csv_path = out / "evaluate.csv"
    _write_csv(csv_path, _EVAL_HEADER, rows)
    outputs.insert(0, csv_path)

    failures = []
    notes = []
    sg_not_worse = 0
    cells = 0
    for spec in specs:
        for kind in kinds:
            ga = J_by.get((spec, kind, Source.GA))
            mg = J_by.get((spec, kind, Source.MG_RULE))
            sg = J_by.get((spec, kind, Source.SG_RULE))
            if ga is not None and mg is not None:
                if not (math.isfinite(mg) and abs(mg - ga) <= 0.05 * ga):
                    failures.append(
                        f"{spec.label()} {kind.value}: mg-rule J {mg:.6g} "
                        f"not within 5% of GA J {ga:.6g}")
            if ga is not None and (spec, kind) in table_J:
                ref = table_J[(spec, kind)]
                if ref and abs(ga - ref) > 0.10 * ref:
                    failures.append(
                        f"{spec.label()} {kind.value}: GA J {ga:.6g} not "
                        f"within 10% of the printed {ref:.6g}")
            if sg is not None and mg is not None:
                cells += 1
                if sg >= mg:
                    sg_not_worse += 1
    if cells:
        notes.append(f"sg-rule J >= mg-rule J in {sg_not_worse} of {cells} cells")

    return StageReport("evaluate", len(rows), tuple(outputs),
                       tuple(failures), tuple(notes))


# ---------------------------------------------------------------------------
# robustness

_ROBUST_HEADER = ("dK", "dTau", "dL", "J", "overshoot", "settled")


def _rule_table_params(spec: TestBenchSpec, kind: ControllerKind,
                       source: Source) -> FOPIDParams | None:
    for r in published.load_rule_table():
        if r.spec == spec and r.controller is kind and r.source == source.value:
            return r.params
    return None


def cmd_robustness(manifest: RunManifest) -> StageReport:
    """Corner sweeps of the printed rule controllers on the bench plants."""
    return _guarded(manifest, "robustness", lambda: _robustness_body(manifest))


def _robustness_body(manifest: RunManifest) -> StageReport:
    opts = manifest.options_for("robustness")
    scfg = SimConfig(dt=float(opts.get("dt", 0.05)),
                     horizon=float(opts.get("horizon", 100.0)))
    kind = ControllerKind(opts.get("kind", "fopid"))
    source = Source(opts.get("source", "mg_rule"))
    plants = opts.get("plants")
    specs = (list(published.representative_specs().values())
             if plants is None else [_spec_from_label(p) for p in plants])
    out = manifest.output_dir

    outputs = []
    notes = []
    n_rows = 0
    for spec in specs:
        params = _rule_table_params(spec, kind, source)
        if params is None:
            if source is Source.GA:
                params = _ga_params(manifest, spec, kind)
                if params is None:
                    raise ParameterError(
                        f"no GA parameters available for {spec.label()} "
                        f"{kind.value}")
            else:
                gene = (GeneMode.SINGLE if source is Source.SG_RULE
                        else GeneMode.MULTI)
                params = apply_rule(RuleKind(kind, gene),
                                    published.soptd_for(spec))
                notes.append(f"{spec.label()}: no printed row; rule evaluated")
        rows = robustness_sweep(
            factored_bench(spec), params, corners=default_corners(),
            scfg=scfg, kind=kind,
            dominant_tau_selector=dominant_selector_for(spec))
        csv_path = out / f"robustness_{spec.label()}.csv"
        _write_csv(csv_path, _ROBUST_HEADER, [
            (r.spec.dK_pct, r.spec.dTau_pct, r.spec.dL_pct,
             r.J, r.overshoot, r.settled) for r in rows
        ])
        outputs.append(csv_path)
        for i, r in enumerate(rows):
            traj_path = out / f"robust_traj_{spec.label()}_corner{i}.csv"
            _write_csv(traj_path, ("t", "y", "u", "e"),
                       zip(r.traj.t, r.traj.y, r.traj.u, r.traj.e))
            outputs.append(traj_path)
        unsettled = sum(1 for r in rows if not r.settled)
        if unsettled:
            notes.append(f"{spec.label()}: {unsettled} of {len(rows)} "
                         "corners did not settle")
        n_rows += len(rows)

    return StageReport("robustness", n_rows, tuple(outputs), (), tuple(notes))


# ---------------------------------------------------------------------------
# orchestration

_STAGE_FUNCS = {
    "reduce": cmd_reduce,
    "tune": cmd_tune,
    "gp": cmd_evolve_rules,
    "evaluate": cmd_evaluate,
    "robustness": cmd_robustness,
}


def run_stage(manifest: RunManifest, name: str) -> StageReport:
    if name not in _STAGE_FUNCS:
        raise ParameterError(f"unknown stage {name!r}")
    return _STAGE_FUNCS[name](manifest)


def stage_hash(manifest: RunManifest, name: str) -> str:
    """Content hash covering the seed, this stage's options, and upstream."""
    upstream = [stage_hash(manifest, s.name) for s in manifest.stages
                if STAGE_ORDER.index(s.name) < STAGE_ORDER.index(name)]
    doc = {"seed": manifest.seed, "stage": name,
           "options": manifest.options_for(name), "upstream": upstream}
    return hashlib.sha256(_canon(doc).encode()).hexdigest()


def _stamp_path(manifest: RunManifest, name: str) -> Path:
    return manifest.output_dir / f"{name}.stamp.json"


def _stamp_valid(manifest: RunManifest, name: str) -> bool:
    path = _stamp_path(manifest, name)
    if not path.is_file():
        return False
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError:
        return False
    if doc.get("hash") != stage_hash(manifest, name):
        return False
    for rel, digest in doc.get("outputs", {}).items():
        target = manifest.output_dir / rel
        if not target.is_file() or _sha256(target) != digest:
            return False
    return True


def _write_stamp(manifest: RunManifest, name: str,
                 report: StageReport) -> None:
    doc = {
        "stage": name,
        "hash": stage_hash(manifest, name),
        "outputs": {
            str(p.relative_to(manifest.output_dir)): _sha256(p)
            for p in report.outputs
        },
    }
    _write_json(_stamp_path(manifest, name), doc)


def run_pipeline(manifest: RunManifest, force: bool = False) -> list[StageReport]:
    """Run every manifest stage in dependency order with hash skipping."""
    reports = []
    for stage in manifest.stages:
        if not force and _stamp_valid(manifest, stage.name):
            log.info("stage %s: outputs up to date, skipping", stage.name)
            reports.append(StageReport(stage.name, 0, (), skipped=True))
            continue
        report = run_stage(manifest, stage.name)
        _write_stamp(manifest, stage.name, report)
        reports.append(report)
    return reports
