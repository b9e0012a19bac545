"""Config-driven experiment drivers behind the command line interface.

Each driver takes a resolved :class:`~sgdkernel.config.ExperimentConfig`,
writes CSV tables plus a ``summary.json`` into the output directory, and
returns the summary as a dict.  Outputs are byte-deterministic for a fixed
config; wall-clock timestamps go only to the ``run.log`` sidecar.
"""

from __future__ import annotations

import datetime
import json
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, config_hash
from .errors import ConfigError, DegenerateSeriesError
from .estimator import TransitionKernelEstimator
from .forecasting import compare_to_sgd, sample_trajectory
from .providers import hierarchy_pdf, make_empirical, make_remote
from .quantizer import TrajectoryQuantizer, decode, serialize
from .scaling import (
    TwoStateChain,
    empirical_provider_factory,
    icl_scaling_experiment,
    mixing_bound_check,
    oracle_provider_factory,
    spectral_gap,
)
from .sgd import make_linreg, make_sine, run_gld, run_sgd


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_table(path, header, rows, digest: str) -> None:
    lines = [f"# config_hash={digest}", ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _write_summary(out_dir: Path, summary: dict) -> None:
    text = json.dumps(summary, indent=2, sort_keys=True)
    (out_dir / "summary.json").write_text(text + "\n")


def _log(out_dir: Path, message: str) -> None:
    stamp = datetime.datetime.now().isoformat(timespec="seconds")
    with open(out_dir / "run.log", "a") as fh:
        fh.write(f"{stamp} {message}\n")


def _prepare(cfg: ExperimentConfig, out_dir) -> tuple[Path, str]:
    out = Path(out_dir) if out_dir is not None else Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out, config_hash(cfg)


class _SeedStream:
    """Named child seeds drawn in a fixed order from the master seed."""

    def __init__(self, master: int):
        self._rng = np.random.default_rng(master)

    def draw(self, n: int | None = None):
        if n is None:
            return int(self._rng.integers(0, 2 ** 31 - 1))
        return [int(s) for s in self._rng.integers(0, 2 ** 31 - 1, size=n)]


def _build_objective(cfg: ExperimentConfig, seed: int, n_samples: int | None = None):
    oc = cfg.objective
    n = oc.n_samples if n_samples is None else n_samples
    if oc.kind == "linreg":
        return make_linreg(n, oc.dim, seed, label_noise=oc.label_noise)
    return make_sine(n, seed, label_noise=oc.label_noise,
                     amplitude=(oc.amplitude_lo, oc.amplitude_hi),
                     frequency=(oc.frequency_lo, oc.frequency_hi))


def _one_run(cfg: ExperimentConfig, objective, theta0, n_steps: int, seed: int):
    theta0 = np.asarray(theta0, dtype=float)
    if theta0.shape[0] != objective.dim:
        raise ConfigError(
            f"theta0 has {theta0.shape[0]} components, objective expects {objective.dim}")
    if cfg.sgd.algorithm == "gld":
        return run_gld(objective, theta0, cfg.sgd.stepsize, n_steps, seed,
                       noise_scale=cfg.sgd.noise_scale)
    batch = min(cfg.sgd.batch_size, objective.dataset.n_samples)
    return run_sgd(objective, theta0, cfg.sgd.stepsize, batch, n_steps, seed)


def _training_runs(cfg: ExperimentConfig, objective, run_seeds):
    return [_one_run(cfg, objective, theta0, cfg.sgd.n_steps, seed)
            for theta0, seed in zip(cfg.sgd.theta0, run_seeds)]


def _estimator(cfg: ExperimentConfig) -> TransitionKernelEstimator:
    pc = cfg.provider
    if pc.kind == "oracle":
        raise ConfigError("the oracle provider needs a known transition matrix "
                          "and is only available in the scaling experiment")
    provider = make_remote(pc.endpoint, temperature=pc.temperature) \
        if pc.kind == "remote" else "empirical"
    return TransitionKernelEstimator(
        provider=provider, precision=cfg.quantizer.precision,
        branch_budget=pc.branch_budget, ngram_order=pc.order,
        smoothing=pc.smoothing, epsilon=cfg.sinkhorn.epsilon,
        sinkhorn_tol=cfg.sinkhorn.tol, sinkhorn_max_iters=cfg.sinkhorn.max_iters,
        target_lo=cfg.quantizer.target_lo, target_hi=cfg.quantizer.target_hi)


def _fit_from_config(cfg: ExperimentConfig):
    """Simulate the training runs and fit the kernel estimator on them."""
    stream = _SeedStream(cfg.seed)
    data_seed = stream.draw()
    run_seeds = list(cfg.sgd.seeds) if cfg.sgd.seeds else stream.draw(len(cfg.sgd.theta0))
    objective = _build_objective(cfg, data_seed)
    runs = _training_runs(cfg, objective, run_seeds)
    estimator = _estimator(cfg)
    estimator.fit([t.thetas for t in runs])
    return objective, runs, estimator, stream


def run_simulate(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Run the configured optimizer and write one CSV per trajectory."""
    out, digest = _prepare(cfg, out_dir)
    _log(out, f"simulate start config_hash={digest}")
    stream = _SeedStream(cfg.seed)
    data_seed = stream.draw()
    run_seeds = list(cfg.sgd.seeds) if cfg.sgd.seeds else stream.draw(len(cfg.sgd.theta0))
    objective = _build_objective(cfg, data_seed)
    runs = _training_runs(cfg, objective, run_seeds)
    files = []
    header = ["t"] + [f"theta_{i + 1}" for i in range(objective.dim)]
    for r, traj in enumerate(runs):
        name = f"trajectory_{r:03d}.csv"
        rows = [[t] + [float(v) for v in traj.thetas[t]]
                for t in range(traj.thetas.shape[0])]
        _write_table(out / name, header, rows, digest)
        files.append(name)
    summary = {
        "experiment": "simulate",
        "config_hash": digest,
        "objective": cfg.objective.kind,
        "algorithm": cfg.sgd.algorithm,
        "n_runs": len(runs),
        "n_steps": cfg.sgd.n_steps,
        "final_thetas": [[float(v) for v in t.thetas[-1]] for t in runs],
        "final_losses": [float(objective.full_loss(t.thetas[-1])) for t in runs],
        "files": files,
    }
    _write_summary(out, summary)
    _log(out, "simulate done")
    return summary


def run_estimate(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Fit the block transition kernel and write it plus coverage tables."""
    out, digest = _prepare(cfg, out_dir)
    _log(out, f"estimate start config_hash={digest}")
    objective, runs, estimator, _ = _fit_from_config(cfg)
    estimator.kernel_.save(out / "kernel.npz")
    coverage = []
    for i, partial in enumerate(estimator.partial_blocks_):
        estimator.kernel_.blocks[i].to_csv(
            out / f"matrix_coord{i + 1}.csv", header_comment=f"config_hash={digest}")
        coverage.append([i + 1, partial.band_size, int(partial.filled.sum()),
                         float(partial.filled.mean()), int(partial.visits.sum())])
    _write_table(out / "coverage.csv",
                 ["coord", "band_size", "filled_rows", "filled_fraction", "visits"],
                 coverage, digest)
    summary = {
        "experiment": "estimate",
        "config_hash": digest,
        "objective": cfg.objective.kind,
        "provider": cfg.provider.kind,
        "precision": cfg.quantizer.precision,
        "n_runs": len(runs),
        "band": [estimator.kernel_.blocks[0].band_lo, estimator.kernel_.blocks[0].band_hi],
        "filled_fractions": [float(p.filled.mean()) for p in estimator.partial_blocks_],
        "files": ["kernel.npz", "coverage.csv"]
        + [f"matrix_coord{i + 1}.csv" for i in range(len(estimator.partial_blocks_))],
    }
    _write_summary(out, summary)
    _log(out, "estimate done")
    return summary


def run_forecast(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Full pipeline: simulate, estimate, then forecast from unseen points.

    Fresh initial points are drawn uniformly inside the observed raw range of
    every coordinate; each point gets one reference optimizer run and one
    sampled kernel rollout, and the two are compared bin-wise at their
    trailing-window modes.
    """
    if cfg.kind == "convex-forecast" and cfg.objective.kind != "linreg":
        raise ConfigError("convex-forecast requires objective.kind = linreg")
    if cfg.kind == "nonconvex-forecast" and cfg.objective.kind != "sine":
        raise ConfigError("nonconvex-forecast requires objective.kind = sine")
    if cfg.kind not in ("convex-forecast", "nonconvex-forecast"):
        raise ConfigError(f"experiment.kind {cfg.kind!r} is not a forecast experiment")
    out, digest = _prepare(cfg, out_dir)
    _log(out, f"forecast start config_hash={digest}")
    objective, runs, estimator, stream = _fit_from_config(cfg)
    _log(out, "kernel fitted")
    fc = cfg.forecast
    maps = estimator.quantizer_.maps_
    d = len(maps)
    init_rng = np.random.default_rng(stream.draw())
    lo = np.array([m.source_lo for m in maps])
    hi = np.array([m.source_hi for m in maps])
    inits = init_rng.uniform(lo, hi, size=(fc.n_points, d))
    ref_seeds = stream.draw(fc.n_points)
    sim_seeds = stream.draw(fc.n_points)
    references = [_one_run(cfg, objective, inits[i], fc.n_steps, ref_seeds[i])
                  for i in range(fc.n_points)]
    rollouts = [sample_trajectory(estimator.kernel_, inits[i], fc.n_steps,
                                  sim_seeds[i], maps)
                for i in range(fc.n_points)]
    report = compare_to_sgd(rollouts, references, tol_bins=fc.tol_bins, window=fc.window)
    _log(out, f"success fraction {report.success_fraction!r}")

    point_header = (["point"] + [f"theta0_{j + 1}" for j in range(d)]
                    + ["matched_reference", "converged", "success"])
    for j in range(d):
        point_header += [f"forecast_bin_{j + 1}", f"reference_bin_{j + 1}",
                         f"bin_distance_{j + 1}"]
    point_rows = []
    for rec in report.records:
        row = [rec.run_index] + [float(v) for v in inits[rec.run_index]]
        row += [rec.reference_index, bool(rec.run_converged), bool(rec.success)]
        ref_modes = report.reference_modes[rec.reference_index]
        for j in range(d):
            row += [int(rec.run_modes[j]), int(ref_modes[j]), int(rec.bin_distances[j])]
        point_rows.append(row)
    _write_table(out / "forecast_points.csv", point_header, point_rows, digest)

    traj_header = (["point", "t"] + [f"state_{j + 1}" for j in range(d)]
                   + [f"theta_{j + 1}" for j in range(d)])
    roll_rows = []
    for i, fr in enumerate(rollouts):
        for t in range(fr.states.shape[0]):
            roll_rows.append([i, t] + [int(s) for s in fr.states[t]]
                             + [float(v) for v in fr.values[t]])
    _write_table(out / "kernel_runs.csv", traj_header, roll_rows, digest)
    ref_header = ["point", "t"] + [f"theta_{j + 1}" for j in range(d)]
    ref_rows = []
    for i, traj in enumerate(references):
        for t in range(traj.thetas.shape[0]):
            ref_rows.append([i, t] + [float(v) for v in traj.thetas[t]])
    _write_table(out / "reference_runs.csv", ref_header, ref_rows, digest)
    estimator.kernel_.save(out / "kernel.npz")

    summary = {
        "experiment": cfg.kind,
        "config_hash": digest,
        "objective": cfg.objective.kind,
        "n_training_runs": len(runs),
        "n_points": fc.n_points,
        "n_success": int(sum(rec.success for rec in report.records)),
        "success_fraction": report.success_fraction,
        "tol_bins": fc.tol_bins,
        "window": fc.window,
        "reference_modes": [[int(v) for v in row] for row in report.reference_modes],
        "files": ["forecast_points.csv", "kernel_runs.csv", "reference_runs.csv",
                  "kernel.npz"],
    }
    _write_summary(out, summary)
    _log(out, "forecast done")
    return summary


def run_regime_probe(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Contrast the predicted next-state law in the two sample-count regimes.

    One optimizer run each with fewer samples than parameters and with more
    samples than parameters; the provider is built on the encoded run and
    queried once at the full context.  A coordinate whose series has zero
    spread is reported as an exact point mass.
    """
    if cfg.kind != "regime-probe":
        raise ConfigError(f"experiment.kind {cfg.kind!r} is not regime-probe")
    if cfg.objective.kind != "linreg":
        raise ConfigError("the regime probe contrasts linear regression sample counts")
    if cfg.provider.kind == "oracle":
        raise ConfigError("the oracle provider needs a known transition matrix "
                          "and is only available in the scaling experiment")
    out, digest = _prepare(cfg, out_dir)
    _log(out, f"regime-probe start config_hash={digest}")
    stream = _SeedStream(cfg.seed)
    k = cfg.quantizer.precision
    theta0 = cfg.sgd.theta0[0]
    regimes = [("overparametrized", cfg.probe.n_samples_over),
               ("underparametrized", cfg.objective.n_samples)]
    rows = []
    regime_summaries = {}
    for name, n_samples in regimes:
        data_seed = stream.draw()
        run_seed = stream.draw()
        objective = _build_objective(cfg, data_seed, n_samples=n_samples)
        traj = _one_run(cfg, objective, theta0, cfg.sgd.n_steps, run_seed)
        coord_stats = []
        for j in range(objective.dim):
            series = traj.thetas[:, j]
            stats = _probe_coordinate(cfg, series, k)
            stats["coord"] = j + 1
            coord_stats.append(stats)
            rows.append([name, n_samples, j + 1, stats["max_mass"], stats["mean_bin"],
                         stats["var_bins"], stats["mean_value"], stats["var_value"],
                         stats["verdict"]])
        verdicts = {c["verdict"] for c in coord_stats}
        regime_summaries[name] = {
            "n_samples": n_samples,
            "verdict": verdicts.pop() if len(verdicts) == 1 else "mixed",
            "coordinates": coord_stats,
        }
        _log(out, f"{name}: {regime_summaries[name]['verdict']}")
    _write_table(out / "probe.csv",
                 ["regime", "n_samples", "coord", "max_mass", "mean_bin", "var_bins",
                  "mean_value", "var_value", "verdict"], rows, digest)
    summary = {
        "experiment": "regime-probe",
        "config_hash": digest,
        "dim": cfg.objective.dim,
        "n_steps": cfg.sgd.n_steps,
        "dirac_threshold": cfg.probe.dirac_threshold,
        "diffuse_threshold": cfg.probe.diffuse_threshold,
        "regimes": regime_summaries,
        "files": ["probe.csv"],
    }
    _write_summary(out, summary)
    _log(out, "regime-probe done")
    return summary


def _probe_coordinate(cfg: ExperimentConfig, series: np.ndarray, k: int) -> dict:
    qc = cfg.quantizer
    try:
        quantizer = TrajectoryQuantizer(
            precision=k, target_lo=qc.target_lo, target_hi=qc.target_hi)
        quantizer.fit(series[:, None])
    except DegenerateSeriesError:
        return {"max_mass": 1.0, "mean_bin": float("nan"), "var_bins": 0.0,
                "mean_value": float(series[0]), "var_value": 0.0, "verdict": "dirac"}
    states = quantizer.transform(series[:, None])[:, 0]
    if cfg.provider.kind == "remote":
        provider = make_remote(cfg.provider.endpoint, temperature=cfg.provider.temperature)
    else:
        order = cfg.provider.order if cfg.provider.order is not None else k
        provider = make_empirical([states], order=order,
                                  smoothing=cfg.provider.smoothing, precision=k)
    context = serialize(states, k)
    probs = hierarchy_pdf(provider, context, k,
                          branch_budget=cfg.provider.branch_budget).probs
    idx = np.arange(probs.shape[0])
    mean_bin = float(probs @ idx)
    var_bins = float(probs @ (idx - mean_bin) ** 2)
    values = quantizer.maps_[0].invert(decode(idx, k))
    mean_value = float(probs @ values)
    var_value = float(probs @ (values - mean_value) ** 2)
    max_mass = float(probs.max())
    if max_mass > cfg.probe.dirac_threshold:
        verdict = "dirac"
    elif max_mass < cfg.probe.diffuse_threshold and var_bins > 0:
        verdict = "diffuse"
    else:
        verdict = "ambiguous"
    return {"max_mass": max_mass, "mean_bin": mean_bin, "var_bins": var_bins,
            "mean_value": mean_value, "var_value": var_value, "verdict": verdict}


def run_scaling(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Estimation error versus context length for two-state chains."""
    if cfg.kind != "scaling-laws":
        raise ConfigError(f"experiment.kind {cfg.kind!r} is not scaling-laws")
    out, digest = _prepare(cfg, out_dir)
    _log(out, f"scaling start config_hash={digest}")
    sc = cfg.scaling
    stream = _SeedStream(cfg.seed)
    exp_seed = stream.draw()
    chains = [TwoStateChain(1.0 - rho / 2.0, 1.0 - rho / 2.0) for rho in sc.rhos]
    state_values = (sc.state_lo, sc.state_hi)
    if cfg.provider.kind == "empirical":
        factory = empirical_provider_factory(order=sc.order, smoothing=sc.smoothing)
    elif cfg.provider.kind == "oracle":
        factory = oracle_provider_factory(state_values=state_values)
    else:
        remote = make_remote(cfg.provider.endpoint, temperature=cfg.provider.temperature)

        def factory(chain, states, precision):
            return remote

    curves = icl_scaling_experiment(
        chains, factory, sc.lengths, sc.n_trials, seed=exp_seed,
        state_values=state_values, branch_budget=cfg.provider.branch_budget,
        fit_min_length=sc.min_fit_length)
    curve_rows, fit_rows, mixing_rows = [], [], []
    chain_summaries = []
    for rho, chain, curve in zip(sc.rhos, chains, curves):
        for li in range(curve.lengths.shape[0]):
            curve_rows.append([rho, chain.p, chain.q, int(curve.lengths[li]),
                               float(curve.kl[li]), float(curve.tv[li])])
        fit_rows.append([rho, "kl", curve.kl_fit.alpha, curve.kl_fit.beta,
                         curve.kl_fit.r2])
        fit_rows.append([rho, "tv", curve.tv_fit.alpha, curve.tv_fit.beta,
                         curve.tv_fit.r2])
        check = mixing_bound_check(chain, np.array([1.0, 0.0]), n_steps=sc.mixing_steps)
        gap = spectral_gap(chain)
        mixing_rows.append([rho, chain.p, chain.q, gap, check.rate, check.contraction])
        chain_summaries.append({
            "rho": rho, "p": chain.p, "q": chain.q, "gap": gap,
            "kl_alpha": curve.kl_fit.alpha, "kl_r2": curve.kl_fit.r2,
            "tv_alpha": curve.tv_fit.alpha, "tv_r2": curve.tv_fit.r2,
            "mixing_rate": float(check.rate) if np.isfinite(check.rate) else None,
            "one_step_contraction": check.contraction,
        })
        _log(out, f"rho={rho}: tv alpha {curve.tv_fit.alpha!r}")
    _write_table(out / "scaling_curves.csv",
                 ["rho", "p", "q", "length", "kl", "tv"], curve_rows, digest)
    _write_table(out / "scaling_fits.csv",
                 ["rho", "metric", "alpha", "beta", "r2"], fit_rows, digest)
    _write_table(out / "mixing.csv",
                 ["rho", "p", "q", "gap", "fitted_rate", "one_step_contraction"],
                 mixing_rows, digest)
    summary = {
        "experiment": "scaling-laws",
        "config_hash": digest,
        "provider": cfg.provider.kind,
        "n_trials": sc.n_trials,
        "lengths": [int(v) for v in sc.lengths],
        "chains": chain_summaries,
        "files": ["scaling_curves.csv", "scaling_fits.csv", "mixing.csv"],
    }
    _write_summary(out, summary)
    _log(out, "scaling done")
    return summary
