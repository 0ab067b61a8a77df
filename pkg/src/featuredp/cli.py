"""Command-line entry point.

Exit codes: 0 on success, 2 on invalid input, 3 when an audit assertion fails.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import click

from featuredp.errors import FeatureDPError
from featuredp.tradeoff.curve import SCHEMA_VERSION

EXIT_OK, EXIT_INVALID, EXIT_AUDIT_FAILED = 0, 2, 3


class AuditFailed(Exception):
    pass


def _finite(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return x


def _emit(ctx: click.Context, name: str, doc: dict) -> None:
    doc = {"schema_version": SCHEMA_VERSION, **{k: _finite(v) for k, v in doc.items()}}
    text = json.dumps(doc, indent=2, sort_keys=True)
    out_dir = ctx.obj["out_dir"]
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / name).write_text(text + "\n")
    click.echo(text)


def _out_dir(ctx: click.Context) -> Path:
    out = ctx.obj["out_dir"] or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


@click.group()
@click.option("--seed", type=int, default=0, show_default=True, help="Master seed.")
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Directory for output files.")
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True,
              help="Concurrent sweep cells.")
@click.pass_context
def cli(ctx: click.Context, seed: int, out_dir: Path | None, workers: int) -> None:
    """Feature-level differential privacy: accounting, training and audits."""
    ctx.obj = {"seed": seed, "out_dir": out_dir, "workers": workers}


@cli.command()
@click.option("--mechanism", type=click.Choice(["gaussian", "subsampled-gaussian"]), default="subsampled-gaussian",
              show_default=True)
@click.option("--sigma", type=float, required=True, help="Noise standard deviation.")
@click.option("--sensitivity", type=float, default=1.0, show_default=True)
@click.option("--p", "sampling_prob", type=float, default=1.0, show_default=True, help="Sampling probability.")
@click.option("--steps", type=int, default=1, show_default=True)
@click.option("--delta", type=float, required=True)
@click.option("--curve-out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Also write the composed trade-off curve as JSON.")
@click.pass_context
def account(ctx, mechanism, sigma, sensitivity, sampling_prob, steps, delta, curve_out):
    """Epsilon at DELTA of a (subsampled) Gaussian mechanism composed over STEPS."""
    from featuredp.tradeoff.accountant import MechanismSpec, accounted_curve, epsilon_for
    if mechanism == "gaussian":
        sampling_prob = 1.0
    spec = MechanismSpec(sensitivity, sigma, sampling_prob, steps)
    eps = epsilon_for(spec, delta)
    if curve_out is not None:
        accounted_curve(spec).save(curve_out)
    _emit(ctx, "account.json", {"mechanism": mechanism, "sigma": sigma, "sensitivity": sensitivity,
                                "sampling_prob": sampling_prob, "steps": steps, "delta": delta, "epsilon": eps})


@cli.command()
@click.option("--epsilon", type=float, required=True)
@click.option("--delta", type=float, required=True)
@click.option("--p", "sampling_prob", type=float, default=1.0, show_default=True)
@click.option("--steps", type=int, default=1, show_default=True)
@click.option("--sensitivity", type=float, default=1.0, show_default=True)
@click.pass_context
def calibrate(ctx, epsilon, delta, sampling_prob, steps, sensitivity):
    """Smallest noise standard deviation meeting (EPSILON, DELTA)."""
    from featuredp.tradeoff.accountant import calibrate_sigma
    from featuredp.tradeoff.curve import PrivacyParams
    sigma = calibrate_sigma(PrivacyParams(epsilon, delta), sampling_prob, steps, sensitivity)
    _emit(ctx, "calibrate.json", {"epsilon": epsilon, "delta": delta, "sampling_prob": sampling_prob,
                                  "steps": steps, "sensitivity": sensitivity, "sigma": float(sigma),
                                  "achieved_epsilon": sigma.achieved_epsilon, "flags": list(sigma.flags)})


def _load_data(data: Path, manifest: Path | None):
    from featuredp.harness.data import load_dataset
    manifest = manifest or data.with_suffix(".manifest.json")
    return load_dataset(data, manifest)


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True,
              help="Training config JSON; may add 'method', 'split' and 'target_epsilon'.")
@click.option("--data", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None)
@click.pass_context
def train(ctx, config_path, data, manifest):
    """Train one model and write its report and weights."""
    from featuredp.harness.sweep import build_split, calibrated_config, run_method
    from featuredp.sgd.train import TrainConfig, save_weights
    doc = json.loads(config_path.read_text())
    method = doc.pop("method", "fdp-sgd")
    split_kind = doc.pop("split", "auto")
    target = doc.pop("target_epsilon", None)
    doc.setdefault("sigma", 0.0)
    doc.setdefault("seed", ctx.obj["seed"])
    cfg = TrainConfig.from_json(doc)
    ds = _load_data(data, manifest)
    split, batch = build_split(ds, split_kind)
    if target is not None:
        delta = cfg.delta if cfg.delta is not None else 1.0 / (2 * len(batch))
        cfg = calibrated_config(method, cfg, split, len(batch), float(target), delta)
    report = run_method(method, batch, split, cfg)
    out = _out_dir(ctx)
    save_weights(out / "weights.bin", report.final_weights, cfg.seed)
    _emit(ctx, "train_report.json", report.to_json())


@cli.command()
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--data", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None)
@click.pass_context
def sweep(ctx, spec_path, data, manifest):
    """Run a privacy-utility sweep and write results.json."""
    from featuredp.harness.sweep import SweepSpec, run_sweep
    doc = json.loads(spec_path.read_text())
    doc.setdefault("seed", ctx.obj["seed"])
    spec = SweepSpec.from_json(doc)
    results = run_sweep(_load_data(data, manifest), spec, workers=ctx.obj["workers"])
    out = _out_dir(ctx)
    results.save(out / "results.json")
    click.echo(json.dumps(results.to_json(), indent=2, sort_keys=True))


@cli.command()
@click.option("--game", type=click.Choice(["attr", "distinguish", "noamp"]), required=True)
@click.option("--samples", type=click.IntRange(min=10_000), default=1_000_000, show_default=True,
              help="Trials per side for the distinguishing game.")
@click.option("--epsilon", type=float, default=math.log(2.0), show_default=True,
              help="Per-record epsilon of the randomized-response construction.")
@click.option("--probs", default="0.1,0.5,1.0", show_default=True, help="Comma-separated sampling rates.")
@click.option("--dims", type=click.IntRange(2, 4), default=2, show_default=True)
@click.option("--understate", type=float, default=1.0, show_default=True,
              help="Divide each reference curve's privacy loss by this factor (power check).")
@click.pass_context
def audit(ctx, game, samples, epsilon, probs, dims, understate):
    """Run an audit game; exits with 3 if its assertion fails."""
    from featuredp import audit as audits
    if game == "attr":
        results = audits.attribute_suite(understate)
        passed = all(r.passed for _, r in results)
        _emit(ctx, "audit_attr.json", {"game": game, "passed": passed,
                                        "instances": [{"name": n, **r.to_json()} for n, r in results]})
    elif game == "distinguish":
        problem = audits.ScalarProblem()
        report = audits.fdp_sgd_game(problem, [0.3], 1.0, n_samples=samples, seed=ctx.obj["seed"])
        passed = bool(report.passed)
        _emit(ctx, "audit_distinguish.json", {"game": game, **report.to_json()})
    else:
        ps = [float(p) for p in probs.split(",") if p.strip()]
        table = audits.nonamplification_demo(epsilon, ps, dims)
        passed = table.non_decreasing
        (_out_dir(ctx) / "noamp.csv").write_text(table.to_csv())
        _emit(ctx, "audit_noamp.json", {"game": game, "passed": passed, **table.to_json()})
    if not passed:
        raise AuditFailed(f"{game} audit failed")


@cli.command()
@click.option("--kind", type=click.Choice(["purchase-like", "criteo-like", "label-dp-gaussian",
                                           "strongly-convex-quadratic"]), required=True)
@click.option("--size", type=click.IntRange(min=1), required=True)
@click.option("--dims", type=click.IntRange(min=1), default=None)
@click.option("--name", default=None, help="File stem; defaults to the kind.")
@click.pass_context
def synth(ctx, kind, size, dims, name):
    """Generate a synthetic dataset as CSV plus manifest."""
    from featuredp.harness.data import write_dataset
    from featuredp.harness.synth import synth_generate
    ds = synth_generate(kind, size, dims, ctx.obj["seed"])
    out = _out_dir(ctx)
    stem = name or kind
    write_dataset(ds, out / f"{stem}.csv", out / f"{stem}.manifest.json")
    _emit(ctx, f"{stem}.synth.json", {"kind": kind, "size": size, "dims": ds.features.shape[1],
                                       "seed": ctx.obj["seed"], "csv": str(out / f"{stem}.csv"),
                                       "manifest": str(out / f"{stem}.manifest.json")})


@cli.command()
@click.option("--results", "results_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              required=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "json", "svg"]), required=True)
@click.pass_context
def report(ctx, results_path, fmt):
    """Re-verify sweep results and write them as CSV, JSON or SVG."""
    from featuredp.harness.report import emit_report
    from featuredp.harness.sweep import SweepResults
    path = emit_report(SweepResults.load(results_path), fmt, _out_dir(ctx) / f"report.{fmt}")
    click.echo(str(path))


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="featuredp", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_INVALID
    except click.ClickException as exc:
        exc.show()
        return EXIT_INVALID
    except AuditFailed as exc:
        click.echo(f"audit failed: {exc}", err=True)
        return EXIT_AUDIT_FAILED
    except (FeatureDPError, ValueError, KeyError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
