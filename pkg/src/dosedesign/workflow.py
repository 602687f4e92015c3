"""Two-stage workflow orchestration and its configuration schema.

A run takes stage-1 count data (or explicit nominal parameter sets),
fits one model per partition cell to get the K nominal sets, searches
for the robust stage-II design with the configured fixed arms, certifies
it with the equivalence theorem, and writes a JSON report plus the
sensitivity curve as CSV and SVG.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataio, fitting, models
from .criteria import CriterionSpec
from .designs import Design
from .equivalence import DEFAULT_TOL, SensitivityCurve, verify_design
from .errors import ValidationError
from .pso import SwarmConfig
from .search import SearchResult, find_design

DEFAULT_ARMS_RAW = ((0.0, 0.225), (10000.0, 0.225))
DEFAULT_BOX_RAW = (0.0, 30000.0)


def transform_dose(raw, transform="log1p"):
    raw = np.asarray(raw, dtype=float)
    if transform == "log1p":
        return np.log1p(raw)
    if transform == "identity":
        return raw
    raise ValidationError(f"unknown dose transform {transform!r}")


def untransform_dose(x, transform="log1p"):
    x = np.asarray(x, dtype=float)
    return np.expm1(x) if transform == "log1p" else x


@dataclass
class WorkflowConfig:
    model: str = "po_trinomial"
    transform: str = "log1p"
    data: str | None = None           # stage-1 CSV path
    nominals: list | None = None      # explicit K x p parameter sets
    partition: str = "date"           # nominal-set partition column
    alpha: float = 0.5                # stage-I proportion (for info mixing)
    include_stage1_info: bool = False
    criterion: str = "robust_D"
    lam: float | list = 0.5
    lam2: float | list = 0.0
    fixed_arms_raw: list = field(default_factory=lambda: [list(a) for a in DEFAULT_ARMS_RAW])
    arms_defaulted: bool = False
    n_support: int | None = None
    n_particles: int = 200
    iters: int = 500
    seed: int = 0
    dose_box_raw: list = field(default_factory=lambda: list(DEFAULT_BOX_RAW))
    grid_points: int = 2001
    tolerance: float = DEFAULT_TOL
    output_dir: str = "."

    @classmethod
    def from_dict(cls, d: dict) -> "WorkflowConfig":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        if "lambda2" in d:
            d["lam2"] = d.pop("lambda2")
        arms_defaulted = "fixed_arms_raw" not in d and "fixed_arms" not in d
        if "fixed_arms" in d:
            d["fixed_arms_raw"] = d.pop("fixed_arms")
        pso = d.pop("pso", {})
        for k in ("n_particles", "iters", "seed", "n_support"):
            if k in pso:
                d[k] = pso[k]
        if "dose_box_raw" in pso:
            d["dose_box_raw"] = pso["dose_box_raw"]
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown config fields: {sorted(unknown)}")
        cfg = cls(**d, arms_defaulted=arms_defaulted) if "arms_defaulted" not in d else cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path_or_text) -> "WorkflowConfig":
        p = Path(path_or_text) if not str(path_or_text).lstrip().startswith("{") else None
        text = p.read_text() if p else path_or_text
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config is not valid JSON: {exc}") from None

    def validate(self):
        if self.model not in models.SPECS:
            raise ValidationError(f"unknown model {self.model!r}")
        if not 0.0 < self.alpha < 1.0 and self.include_stage1_info:
            raise ValidationError("alpha must lie in (0, 1)")
        if self.data is not None and not Path(self.data).exists():
            raise ValidationError(f"data file does not exist: {self.data}")
        if self.data is None and self.nominals is None:
            raise ValidationError("config needs either 'data' or 'nominals'")
        arm_mass = sum(w for _, w in self.fixed_arms_raw)
        if arm_mass >= 1.0:
            raise ValidationError("fixed arms exhaust the design mass")

    def model_spec(self) -> models.ModelSpec:
        return models.get_spec(self.model)

    def fixed_arms_transformed(self):
        return tuple(
            (float(transform_dose(d, self.transform)), float(w))
            for d, w in self.fixed_arms_raw
        )

    def swarm(self, p: int) -> SwarmConfig:
        box = tuple(float(transform_dose(b, self.transform)) for b in self.dose_box_raw)
        return SwarmConfig(
            n_support=self.n_support or p + 1,
            n_particles=self.n_particles,
            iters=self.iters,
            seed=self.seed,
            dose_box=box,
        )


@dataclass
class StageReport:
    config: dict
    nominal_sets: list
    design: Design
    criterion_value: float
    verdict: str
    max_sensitivity: float
    curve: SensitivityCurve
    fits: list

    def design_dict(self):
        return self.design.to_dict(criterion=self.config.get("criterion"),
                                   value=self.criterion_value)

    def to_dict(self):
        return {
            "config": self.config,
            "nominal_sets": self.nominal_sets,
            "fits": self.fits,
            "design": self.design_dict(),
            "criterion_value": self.criterion_value,
            "verdict": self.verdict,
            "max_sensitivity": self.max_sensitivity,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def fit_nominal_sets(cfg: WorkflowConfig):
    """K nominal sets from the stage-1 data (one fit per partition cell)."""
    spec = cfg.model_spec()
    records = dataio.ingest_csv(Path(cfg.data))
    if cfg.partition == "date":
        groups = dataio.group_by_date(records)
    elif cfg.partition == "pooled":
        groups = {"pooled": records}
    else:
        raise ValidationError(f"unknown partition {cfg.partition!r}")
    fits = []
    for key in sorted(groups):
        fits.append((key, fitting.fit_mle(spec, groups[key])))
    return fits


def build_criterion(cfg: WorkflowConfig, nominal_sets) -> CriterionSpec:
    spec = cfg.model_spec()
    noms = tuple(spec.params(np.asarray(v, dtype=float)) for v in nominal_sets)
    stage1 = None
    alpha = 0.0
    if cfg.include_stage1_info and cfg.data is not None:
        records = dataio.ingest_csv(Path(cfg.data))
        pts = transform_dose([r.dose for r in records], cfg.transform)
        wts = np.array([r.observed for r in records], dtype=float)
        stage1 = Design(*_dedupe(pts, wts / wts.sum()))
        alpha = cfg.alpha
    return CriterionSpec(
        kind=cfg.criterion,
        nominal_sets=noms,
        lambdas=cfg.lam if isinstance(cfg.lam, (list, tuple)) else (float(cfg.lam),),
        lambdas2=cfg.lam2 if isinstance(cfg.lam2, (list, tuple)) else (float(cfg.lam2),),
        stage1=stage1,
        stage1_alpha=alpha,
    )


def _dedupe(pts, wts):
    from .designs import merge_support

    return merge_support(np.asarray(pts, float), np.asarray(wts, float))


def run_two_stage(cfg: WorkflowConfig) -> StageReport:
    """Fit stage-1 nominal sets, search the robust stage-II design,
    certify it, and write report + sensitivity artifacts."""
    spec = cfg.model_spec()
    fits = []
    if cfg.nominals is not None:
        nominal_sets = [list(map(float, v)) for v in cfg.nominals]
    else:
        fitted = fit_nominal_sets(cfg)
        nominal_sets = [list(map(float, f.theta_hat.values)) for _, f in fitted]
        fits = [dict(group=key, **f.to_dict()) for key, f in fitted]
    if cfg.arms_defaulted:
        warnings.warn(
            "no fixed arms configured; defaulting to 22.5% at dose 0 and "
            "22.5% at raw dose 10000",
            stacklevel=2,
        )
    crit = build_criterion(cfg, nominal_sets)
    result = find_design(
        spec, crit,
        fixed_arms=cfg.fixed_arms_transformed(),
        swarm=cfg.swarm(spec.p),
        n_support=cfg.n_support,
    )
    grid = np.linspace(0.0, cfg.swarm(spec.p).dose_box[1], cfg.grid_points)
    curve, verdict = verify_design(result.design, crit, spec, grid=grid,
                                   tol=cfg.tolerance)
    report = StageReport(
        config=_config_dict(cfg),
        nominal_sets=nominal_sets,
        design=result.design,
        criterion_value=result.value,
        verdict=verdict,
        max_sensitivity=curve.max_value,
        curve=curve,
        fits=fits,
    )
    _write_outputs(cfg, report, result)
    return report


def _config_dict(cfg: WorkflowConfig) -> dict:
    d = {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}
    d["criterion"] = cfg.criterion
    return d


def _write_outputs(cfg: WorkflowConfig, report: StageReport, result: SearchResult):
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    (out / "design.json").write_text(
        json.dumps(report.design_dict(), indent=2, sort_keys=True)
    )
    (out / "sensitivity.csv").write_text(report.curve.to_csv())
    (out / "pso_trace.csv").write_text(result.trace_csv())
    render_sensitivity_svg(report.curve, report.design, out / "sensitivity.svg")


def render_sensitivity_svg(curve: SensitivityCurve, design: Design | None, path):
    """Sensitivity line chart with the zero baseline and support markers."""
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    ax.plot(curve.grid, curve.values, color="#1f77b4", lw=1.5,
            label="sensitivity")
    ax.axhline(0.0, color="red", lw=1.2, label="zero baseline")
    if design is not None:
        support = design.all_points()
        sel = np.interp(support, curve.grid, curve.values)
        ax.plot(support, sel, "o", color="#1f77b4", ms=5, mfc="white",
                label="support")
    ax.set_xlabel("dose (transformed scale)")
    ax.set_ylabel("sensitivity")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
