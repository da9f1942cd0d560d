"""Command-line interface.

Commands: simulate, fit, select, calibrate, limits, experiment. All
randomness flows from ``--seed``; when the flag is omitted a seed is
drawn from the system and reported in the output, never silently.

Exit codes: 0 success; 1 error; 2 completed with a qualification
(non-converged fit, or anchored expectations not met).
"""

from __future__ import annotations

import json
import secrets
import sys
from pathlib import Path

import click
import numpy as np

from .dataio import read_dataset, write_dataset
from .errors import FlimselError
from .estimator import FitConfig, FitResult, fit
from .experiments import (EXPERIMENT_PULSE_COUNT, ExperimentPlan,
                          plan_from_manifest, run)
from .models import (LIFETIME_BOUNDS_NS, DecayModel, PhotonDataset,
                     SpeciesParams, signal_proportions)
from .selection import (DEFAULT_THRESHOLD_GRID, Scenario, calibrate,
                        lrt_statistic, select)
from .simulate import SimulationSpec, sample_dataset_with_counts


def _echo_json(payload: dict) -> None:
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


def _fresh_seed(seed: int | None) -> int:
    return secrets.randbelow(2**63) if seed is None else seed


def _parse_floats(text: str, what: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError:
        raise click.UsageError(f"{what} must be comma-separated numbers")


def _fit_payload(result: FitResult, n: int, pulse_count: float) -> dict:
    model = result.model
    return {
        "model": model.to_dict(),
        "lifetimes_ns": model.lifetimes.tolist(),
        "signal_proportions": signal_proportions(model).tolist()
        if model.total_intensity > model.noise_intensity else [],
        "loglik": result.loglik,
        "iterations": result.iterations,
        "converged": result.converged,
        "start_index": result.start_index,
        "n": n,
        "pulse_count": pulse_count,
    }


def _noise_per_pulse(option_value, header: dict) -> float:
    if option_value is not None:
        return option_value
    if "noise_per_pulse" in header:
        return header["noise_per_pulse"]
    raise click.UsageError(
        "--noise-per-pulse is required (the dataset header carries no "
        "noise_photons field)")


def _fit_config(max_iterations, gradient_tolerance, multistarts) -> FitConfig:
    return FitConfig(max_iterations=max_iterations,
                     gradient_tolerance=gradient_tolerance,
                     multistart_count=multistarts)


fit_config_options = [
    click.option("--max-iterations", default=500, show_default=True),
    click.option("--gradient-tolerance", default=1e-6, show_default=True),
    click.option("--multistarts", default=6, show_default=True,
                 help="Cap on the number of deterministic starting points."),
]


def _add_options(options):
    def wrap(func):
        for option in reversed(options):
            func = option(func)
        return func
    return wrap


@click.group()
def main():
    """Photon-arrival decay fitting, mono/bi model selection, and
    discrimination limits."""


@main.command()
@click.option("--lifetimes", required=True,
              help="Comma-separated mean lifetimes in ns, e.g. 0.6,2.4.")
@click.option("--proportions", default=None,
              help="Signal proportions per lifetime (normalized). "
                   "Default: equal.")
@click.option("--photons", type=float, required=True,
              help="Expected total photons, noise included.")
@click.option("--noise-photons", type=float, default=0.0, show_default=True,
              help="Expected noise photons out of the total.")
@click.option("--pulses", type=float, default=EXPERIMENT_PULSE_COUNT,
              show_default=True, help="Excitation pulse count T.")
@click.option("--period", type=float, default=12.0, show_default=True)
@click.option("--seed", type=int, default=None,
              help="Omitted: drawn from the system and reported.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              required=True)
@click.option("--reveal-labels", is_flag=True,
              help="Also print per-species counts (labels are never "
                   "written to the file).")
def simulate(lifetimes, proportions, photons, noise_photons, pulses, period,
             seed, out_path, reveal_labels):
    """Write a synthetic dataset drawn from a decay model."""
    taus = _parse_floats(lifetimes, "--lifetimes")
    lo, hi = LIFETIME_BOUNDS_NS
    for tau in taus:
        if not lo <= tau <= hi:
            raise click.UsageError(
                f"lifetime {tau} ns outside the [{lo}, {hi}] ns box")
    if proportions is None:
        props = np.full(len(taus), 1.0 / len(taus))
    else:
        raw = np.array(_parse_floats(proportions, "--proportions"))
        if len(raw) != len(taus):
            raise click.UsageError("--proportions must match --lifetimes")
        if np.any(raw < 0) or raw.sum() <= 0:
            raise click.UsageError("--proportions must be non-negative "
                                   "with a positive sum")
        props = raw / raw.sum()
    if photons < noise_photons or noise_photons < 0:
        raise click.UsageError("need 0 <= noise photons <= total photons")
    if pulses < 1:
        raise click.UsageError("--pulses must be >= 1")

    seed = _fresh_seed(seed)
    signal = photons - noise_photons
    model = DecayModel(
        species=tuple(SpeciesParams(1.0 / tau, p * signal / pulses)
                      for tau, p in zip(taus, props) if p > 0),
        noise_intensity=noise_photons / pulses, period=period)
    spec = SimulationSpec(model=model, pulse_count=pulses, seed=seed)
    dataset, counts = sample_dataset_with_counts(spec)
    provenance = (f"simulate seed={seed} photons={photons:g} "
                  f"noise={noise_photons:g}")
    write_dataset(out_path, dataset, noise_photons=noise_photons,
                  provenance=provenance)
    summary = {"path": str(out_path), "n": dataset.n, "seed": seed,
               "expected_photons": photons}
    if reveal_labels:
        summary["counts_by_species"] = {
            "noise": int(counts[0]),
            **{f"{s.lifetime:g}ns": int(c)
               for s, c in zip(model.species, counts[1:])},
        }
    _echo_json(summary)


@main.command(name="fit")
@click.argument("dataset_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--k", type=int, required=True, help="Species count, 1 or 2.")
@click.option("--noise-per-pulse", type=float, default=None,
              help="Known noise intensity I0; defaults to the header value.")
@_add_options(fit_config_options)
def fit_command(dataset_path, k, noise_per_pulse, max_iterations,
                gradient_tolerance, multistarts):
    """Maximum-likelihood fit of a K-species model. Exit 2 if the fit
    did not converge."""
    if k not in (1, 2):
        raise click.UsageError("--k must be 1 or 2 (larger models are not "
                               "part of the selection pipeline)")
    dataset, header = read_dataset(dataset_path)
    noise = _noise_per_pulse(noise_per_pulse, header)
    try:
        result = fit(dataset, k, noise,
                     _fit_config(max_iterations, gradient_tolerance,
                                 multistarts))
    except FlimselError as exc:
        raise click.ClickException(str(exc))
    _echo_json(_fit_payload(result, dataset.n, dataset.pulse_count))
    if not result.converged:
        sys.exit(2)


@main.command(name="select")
@click.argument("dataset_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--threshold", type=float, default=4.0, show_default=True)
@click.option("--noise-per-pulse", type=float, default=None)
@_add_options(fit_config_options)
def select_command(dataset_path, threshold, noise_per_pulse, max_iterations,
                   gradient_tolerance, multistarts):
    """Likelihood-ratio choice between 1 and 2 species."""
    if threshold < 0:
        raise click.UsageError("--threshold must be >= 0")
    dataset, header = read_dataset(dataset_path)
    noise = _noise_per_pulse(noise_per_pulse, header)
    try:
        outcome = select(lrt_statistic(
            dataset, noise,
            _fit_config(max_iterations, gradient_tolerance, multistarts)),
            threshold)
    except FlimselError as exc:
        raise click.ClickException(str(exc))
    payload = {
        "statistic_d": outcome.statistic_d,
        "threshold": outcome.threshold,
        "chosen_k": outcome.chosen_k,
        "fit1": _fit_payload(outcome.fit1, dataset.n, dataset.pulse_count),
        "fit2": _fit_payload(outcome.fit2, dataset.n, dataset.pulse_count),
    }
    _echo_json(payload)


def _echo_expectations(result) -> None:
    for e in result.expectations:
        status = "ok" if e.ok else "MISSED"
        click.echo(f"  [{status}] {e.description}: {e.observed:.6g} "
                   f"(window [{e.low:.6g}, {e.high:.6g}])")


def _run_plan(plan: ExperimentPlan):
    try:
        result = run(plan)
    except FlimselError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"wrote {result.json_path}")
    click.echo(f"wrote {result.csv_path}")
    click.echo(f"wrote {result.manifest_path}")
    if hasattr(result.report, "best_threshold"):
        report = result.report
        click.echo(f"best threshold {report.best_threshold:g} "
                   f"(mean error {report.mean_error_per_threshold.min():.4f}); "
                   f"balanced threshold {report.balanced_threshold}")
    _echo_expectations(result)
    if not result.ok:
        sys.exit(2)


@main.command(name="calibrate")
@click.option("--lifetimes", default="0.6,2.4", show_default=True)
@click.option("--pi1-prime", "pi1_list", default="0,0.077,0.2,0.43,1",
              show_default=True,
              help="Comma-separated species-1 signal proportions; 0 and 1 "
                   "mean mono-exponential truths.")
@click.option("--photons", type=float, default=10000, show_default=True)
@click.option("--noise-photons", type=float, default=100, show_default=True)
@click.option("--trials", type=int, required=True)
@click.option("--grid", default=None,
              help="Comma-separated ascending thresholds; default built-in.")
@click.option("--seed", type=int, default=None)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False),
              default=".", show_default=True)
@click.option("--name", default="calibration", show_default=True)
def calibrate_command(lifetimes, pi1_list, photons, noise_photons, trials,
                      grid, seed, threads, out_dir, name):
    """Calibrate thresholds on a custom scenario grid."""
    if trials < 1:
        raise click.UsageError("--trials must be >= 1")
    taus = _parse_floats(lifetimes, "--lifetimes")
    if len(taus) != 2:
        raise click.UsageError("--lifetimes must name exactly two lifetimes")
    pis = _parse_floats(pi1_list, "--pi1-prime")
    if any(not 0 <= p <= 1 for p in pis):
        raise click.UsageError("--pi1-prime entries must lie in [0, 1]")
    thresholds = (DEFAULT_THRESHOLD_GRID if grid is None
                  else tuple(_parse_floats(grid, "--grid")))
    seed = _fresh_seed(seed)
    from .experiments import _proportion_scenario  # scenario construction
    scenarios = tuple(
        _proportion_scenario(f"{name}-p{pi:g}", taus, pi,
                             photons - noise_photons, noise_photons)
        for pi in pis)
    plan = ExperimentPlan(name=name, generator="custom",
                          output_dir=out_dir, trials=trials, seed=seed,
                          threshold_grid=thresholds, scenarios=scenarios,
                          threads=threads)
    _run_plan(plan)


@main.command(name="limits")
@click.option("--case", type=click.Choice(["a", "b"]), required=True)
@click.option("--samples", type=int, default=1_000_000, show_default=True)
@click.option("--photon-count", type=int, default=32, show_default=True)
@click.option("--noise-fraction", type=float, default=None,
              help="Case a only: noise share of all photons "
                   "(default 1/11, i.e. 1 noise per 10 signal).")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False),
              default=".", show_default=True)
@click.option("--name", default=None)
def limits_command(case, samples, photon_count, noise_fraction, seed,
                   out_dir, name):
    """Best achievable discrimination error for the built-in two-model
    cases; prints the estimate with its 99% CI."""
    seed = _fresh_seed(seed)
    generator = f"limits-case-{case}"
    plan = ExperimentPlan(name=name or generator, generator=generator,
                          output_dir=out_dir, seed=seed, mc_samples=samples,
                          photon_count=photon_count,
                          noise_fraction=noise_fraction)
    try:
        result = run(plan)
    except FlimselError as exc:
        raise click.ClickException(str(exc))
    est = result.report
    click.echo(f"optimal error rate estimate {est.estimate:.6f} "
               f"+/- {est.ci_halfwidth:.6f} (99% CI, {est.method})")
    click.echo(f"wrote {result.json_path}")
    click.echo(f"wrote {result.csv_path}")
    click.echo(f"wrote {result.manifest_path}")
    _echo_expectations(result)
    if not result.ok:
        sys.exit(2)


@main.command(name="experiment")
@click.option("--plan", "plan_name", default=None,
              help="Built-in plan: table2, closer-lifetimes, limits-case-a, "
                   "limits-case-b.")
@click.option("--plan-file", type=click.Path(exists=True, dir_okay=False),
              default=None,
              help="Re-run a plan from a manifest (or bare plan) JSON file.")
@click.option("--photons", type=float, default=10000, show_default=True)
@click.option("--trials", type=int, default=500, show_default=True)
@click.option("--pi1-prime", type=float, default=0.5, show_default=True)
@click.option("--lifetimes", default="1,2", show_default=True,
              help="closer-lifetimes only.")
@click.option("--noise-ratio", type=float, default=0.01, show_default=True,
              help="closer-lifetimes noise-to-signal photon ratio.")
@click.option("--samples", type=int, default=1_000_000, show_default=True,
              help="limits cases only.")
@click.option("--grid", default=None)
@click.option("--seed", type=int, default=None)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False),
              default=".", show_default=True)
@click.option("--name", default=None)
def experiment_command(plan_name, plan_file, photons, trials, pi1_prime,
                       lifetimes, noise_ratio, samples, grid, seed, threads,
                       out_dir, name):
    """Run a built-in experiment plan and check its anchored outcomes.
    Exit 2 when the run completes but an expectation is missed."""
    if (plan_name is None) == (plan_file is None):
        raise click.UsageError("give exactly one of --plan or --plan-file")
    if plan_file is not None:
        plan = plan_from_manifest(plan_file, output_dir=out_dir)
        _run_plan(plan)
        return
    builtin = ("table2", "closer-lifetimes", "limits-case-a", "limits-case-b")
    if plan_name not in builtin:
        raise click.UsageError(
            f"unknown plan '{plan_name}'; built-ins: {', '.join(builtin)}")
    taus = _parse_floats(lifetimes, "--lifetimes")
    if len(taus) != 2:
        raise click.UsageError("--lifetimes must name exactly two lifetimes")
    seed = _fresh_seed(seed)
    thresholds = (DEFAULT_THRESHOLD_GRID if grid is None
                  else tuple(_parse_floats(grid, "--grid")))
    if name is None:
        name = (plan_name if plan_name.startswith("limits")
                else f"{plan_name}-n{int(photons)}")
    plan = ExperimentPlan(
        name=name,
        generator=plan_name, output_dir=out_dir, trials=trials, seed=seed,
        threshold_grid=thresholds, photons=photons, pi1_prime=pi1_prime,
        lifetimes_ns=(taus[0], taus[1]), noise_to_signal=noise_ratio,
        mc_samples=samples, threads=threads)
    _run_plan(plan)


if __name__ == "__main__":
    main()
