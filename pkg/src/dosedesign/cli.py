"""Command-line interface.

Exit codes: 0 success, 2 validation error (bad input, bad config),
3 numerical failure (non-convergence, singular information, degenerate
doses).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import bivprobit, dataio, fitting, models, workflow
from .criteria import efficiency as compute_efficiency
from .designs import Design, uniform_design
from .errors import (
    ConvergenceError,
    DegenerateDoseError,
    DesignError,
    DoseDesignError,
    FitError,
    NoRootError,
    SingularEndpointError,
    SingularInformationError,
    SwarmInitError,
    ValidationError,
)
from .pso import SwarmConfig

EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

_NUMERICAL = (
    ConvergenceError, FitError, SingularInformationError, NoRootError,
    SingularEndpointError, DegenerateDoseError, SwarmInitError,
)
_VALIDATION = (ValidationError, DesignError, ValueError, KeyError)


def _run(fn):
    try:
        fn()
    except _NUMERICAL as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    except _VALIDATION as exc:
        click.echo(f"validation error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)


@click.group()
def main():
    """Sequential robust optimal designs for dose-response experiments."""


@main.command()
@click.argument("csv_path", type=click.Path(exists=True))
@click.option("--model", default="po_trinomial", show_default=True)
@click.option("--by-date", is_flag=True, help="fit each date group separately")
@click.option("--out", type=click.Path(), default=None, help="write JSON here")
def fit(csv_path, model, by_date, out):
    """Fit a trinomial model to count data; prints FitResult JSON."""

    def go():
        spec = models.get_spec(model)
        records = dataio.ingest_csv(Path(csv_path))
        if by_date:
            fits = {
                date: fitting.fit_mle(spec, rows).to_dict()
                for date, rows in sorted(dataio.group_by_date(records).items())
            }
            payload = json.dumps(fits, indent=2, sort_keys=True)
        else:
            result = fitting.fit_mle(spec, records)
            d = result.to_dict()
            try:
                est = fitting.endpoint_variance(result.theta_hat, result.cov, "RD50")
                d["rd50"] = {"value": est.value, "se": est.se}
            except (NoRootError, SingularEndpointError):
                d["rd50"] = None
            payload = json.dumps(d, indent=2, sort_keys=True)
        if out:
            Path(out).write_text(payload)
        click.echo(payload)

    _run(go)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def design(config_path):
    """Run the (two-stage) design workflow from a JSON config.

    Fits nominal sets from stage-1 data when the config points at a CSV,
    or uses explicit nominal sets; writes report.json, design.json and
    the sensitivity CSV/SVG into the configured output directory, and
    prints the design JSON.
    """

    def go():
        cfg = workflow.WorkflowConfig.from_json(Path(config_path).read_text())
        report = workflow.run_two_stage(cfg)
        click.echo(json.dumps(report.design_dict(), indent=2, sort_keys=True))

    _run(go)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--design", "design_path", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None, help="directory for CSV/SVG")
def verify(config_path, design_path, out):
    """Equivalence-theorem check of a design against a criterion config."""

    def go():
        from .equivalence import verify_design

        cfg = workflow.WorkflowConfig.from_json(Path(config_path).read_text())
        spec = cfg.model_spec()
        d = Design.from_dict(json.loads(Path(design_path).read_text()))
        if cfg.nominals is None:
            raise ValidationError("verify requires explicit 'nominals' in config")
        crit = workflow.build_criterion(cfg, cfg.nominals)
        grid = np.linspace(0.0, cfg.swarm(spec.p).dose_box[1], cfg.grid_points)
        curve, verdict = verify_design(d, crit, spec, grid=grid, tol=cfg.tolerance)
        if out:
            outdir = Path(out)
            outdir.mkdir(parents=True, exist_ok=True)
            (outdir / "sensitivity.csv").write_text(curve.to_csv())
            workflow.render_sensitivity_svg(curve, d, outdir / "sensitivity.svg")
        click.echo(json.dumps(
            {"verdict": verdict, "max_sensitivity": curve.max_value,
             "argmax": curve.argmax},
            indent=2, sort_keys=True,
        ))

    _run(go)


@main.command()
@click.option("--design", "design_path", required=True, type=click.Path(exists=True))
@click.option("--reference", "reference_path", required=True, type=click.Path(exists=True))
@click.option("--kind", type=click.Choice(["D", "c"]), required=True)
@click.option("--model", default="po_trinomial", show_default=True)
@click.option("--theta", required=True, help="comma-separated nominal values")
def efficiency(design_path, reference_path, kind, model, theta):
    """Relative D- or c-efficiency of a design against a reference."""

    def go():
        spec = models.get_spec(model)
        tp = spec.params(np.array([float(v) for v in theta.split(",")]))
        d = Design.from_dict(json.loads(Path(design_path).read_text()))
        ref = Design.from_dict(json.loads(Path(reference_path).read_text()))
        eff = compute_efficiency(d, ref, kind, spec, tp)
        click.echo(json.dumps({"kind": kind, "efficiency": eff}, sort_keys=True))

    _run(go)


def _bp_scenario(path):
    d = json.loads(Path(path).read_text())
    try:
        params = bivprobit.BPParams(tuple(d["theta1"]), tuple(d["theta2"]), d["rho"])
        targets = bivprobit.BPTargets(
            d["p_eff_star"], d["p_tox_star"], d.get("w", 0.5),
            d.get("ce", 0.0), d.get("ct", 0.0),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"bad scenario file: missing {exc}") from None
    xi = d.get("stage1")
    stage1 = (
        Design.from_dict(xi) if xi else
        uniform_design([0.2, 0.5, 0.8, 1.1, 1.4])
    )
    return params, targets, stage1, d


@main.command("bp-design")
@click.option("--scenario", required=True, type=click.Path(exists=True))
@click.option("--criterion", type=click.Choice(["D", "L"]), default="D", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--n-support", type=int, default=4, show_default=True)
@click.option("--curve-out", type=click.Path(), default=None,
              help="write the sensitivity curve (no certificate) as CSV")
def bp_design(scenario, criterion, seed, n_support, curve_out):
    """Locally optimal design for the efficacy-toxicity probit model."""

    def go():
        params, targets, _, _ = _bp_scenario(scenario)
        swarm = SwarmConfig(n_support=n_support, n_particles=80, iters=200,
                            dose_box=(0.0, 1.5), seed=seed)
        d = bivprobit.find_bp_design(params, targets, criterion, swarm, n_support)
        d_val, l_val = bivprobit.reported_criteria(d, params, targets)
        payload = d.to_dict(criterion=criterion)
        payload["reported"] = {"D": d_val, "L": l_val}
        if curve_out:
            grid, vals = bivprobit.sensitivity_curve(d, params, targets, criterion)
            lines = ["dose,sensitivity"]
            lines += [f"{float(x)!r},{float(v)!r}" for x, v in zip(grid, vals)]
            Path(curve_out).write_text("\n".join(lines) + "\n")
        click.echo(json.dumps(payload, indent=2, sort_keys=True))

    _run(go)


@main.command("bp-simulate")
@click.option("--scenario", required=True, type=click.Path(exists=True))
@click.option("--criterion", type=click.Choice(["D", "L"]), default="D", show_default=True)
@click.option("--alpha", type=float, default=0.5, show_default=True)
@click.option("--n-total", type=int, default=500, show_default=True)
@click.option("--replicates", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def bp_simulate(scenario, criterion, alpha, n_total, replicates, seed, out):
    """Two-stage simulation study under a known truth; prints SimReport."""

    def go():
        params, targets, stage1, _ = _bp_scenario(scenario)
        report = bivprobit.simulate_study(
            params, stage1, alpha, criterion, seed, n_total, targets,
            n_replicates=replicates,
        )
        payload = report.to_json()
        if out:
            Path(out).write_text(payload)
        click.echo(payload)

    _run(go)


@main.command()
@click.option("--port", type=int, default=None, help="overrides $DOSEDESIGN_PORT")
@click.option("--host", default="127.0.0.1", show_default=True)
def serve(port, host):
    """Run the stateless HTTP service."""
    import os

    import uvicorn

    from .service import app

    port = port or int(os.environ.get("DOSEDESIGN_PORT", "8000"))
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
