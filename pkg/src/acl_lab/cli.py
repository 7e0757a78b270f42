"""Command line: ``acl-lab {build,evolve,distributions,report,all,config}``.

Exit codes: 0 success, 2 configuration or missing-dependency error,
3 resource error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import experiments as ex
from . import io, reduced, spectral
from .config import ConfigError, ExperimentConfig
from .hamiltonian import ResourceError, dense_bytes
from .model import ACLModel, cache_path
from .oscillator import TruncationWarning

log = logging.getLogger("acl_lab")

EXIT_OK, EXIT_CONFIG, EXIT_RESOURCE, EXIT_NUMERICAL = 0, 2, 3, 4


class DependencyError(ConfigError):
    pass


def coupling_dir(cfg: ExperimentConfig, coupling: float) -> Path:
    return Path(cfg.output_dir) / f"ei_{coupling:g}"


def _model(cfg: ExperimentConfig, coupling: float) -> ACLModel:
    return ACLModel.from_params(cfg.model_params(coupling), cache_dir=cfg.cache_dir, memory_cap=cfg.memory_cap)


def load_models(cfg: ExperimentConfig, build_missing: bool = False) -> dict:
    """Fitted models keyed by coupling; missing caches are an error unless ``build_missing``."""
    models = {}
    for c in cfg.couplings:
        model = _model(cfg, c)
        path = cache_path(cfg.cache_dir, cfg.model_params(c))
        if not path.exists() and not build_missing:
            raise DependencyError(
                f"no eigendecomposition cache for E_I={c:g} at {path}; run `acl-lab build` first "
                "or pass --build-missing"
            )
        models[c] = model.fit()
    return models


def write_provenance(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return cfg.save(out / "config.json")


def cmd_build(cfg: ExperimentConfig) -> list:
    n_w = cfg.N_s * cfg.N_e
    print(f"N_w = {n_w}; dense storage per decomposition ~ {dense_bytes(n_w, 3) / 1e9:.3f} GB "
          f"(H_w, eigenvectors, residual workspace)")
    summaries = []
    for c in cfg.couplings:
        model = _model(cfg, c).fit()
        ev = model.decomposition_.eigenvalues
        rep = model.decomposition_report_ or {"max_residual": None, "orthonormality": None}
        line = {
            "E_I": c,
            "cache": str(cache_path(cfg.cache_dir, model.params_)),
            "n_eigenvalues": int(ev.size),
            "min": float(ev[0]),
            "max": float(ev[-1]),
            "max_residual": rep["max_residual"],
            "orthonormality": rep["orthonormality"],
        }
        res = "cached" if rep["max_residual"] is None else f"max residual {rep['max_residual']:.3g}"
        print(f"E_I={c:g}: {ev.size} eigenvalues in [{ev[0]:.6g}, {ev[-1]:.6g}], {res} -> {line['cache']}")
        summaries.append(line)
    return summaries


def cmd_evolve(cfg: ExperimentConfig, build_missing: bool = False) -> list:
    written = []
    h = cfg.config_hash()
    for c, model in load_models(cfg, build_missing).items():
        times = ex.default_times(model, cfg.n_samples, cfg.t_max)
        for ic in cfg.initial_conditions():
            psi0, tuned = ex.initial_state(model, ic)
            series = ex.run_equilibration(model, psi0, times, cfg.log_base)
            stats = ex.equilibrium_stats(series, cfg.late_fraction, model)
            d = coupling_dir(cfg, c)
            rows = zip(series.times, series.entropy, series.E_s, series.E_e, series.E_int)
            written.append(io.write_csv(d / f"timeseries_ic{ic.env_index}.csv",
                                        ["t", "entropy", "E_s", "E_e", "E_int"], rows, h,
                                        {"E_I": f"{c:g}", "env_index": ic.env_index}))
            io.write_json(d / f"timeseries_ic{ic.env_index}.stats.json", {
                "E_I": c,
                "env_index": ic.env_index,
                "alpha": [tuned.alpha.real, tuned.alpha.imag],
                "truncation_leakage": tuned.leakage,
                "initial_world_energy": tuned.world_energy,
                "window": stats.window,
                "n_window_samples": stats.n_samples,
                "mean": stats.mean,
                "std": stats.std,
                "standard_error": stats.sem,
                "diagonal_ensemble": ex.diagonal_ensemble_energies(model, series.state),
                "dephasing_gap_E_s": stats.dephasing_gap,
                "definitions": {
                    "window": f"final {cfg.late_fraction:g} of the time grid",
                    "standard_error": "std * sqrt(tau_int / n), tau_int summed to the first non-positive autocorrelation lag",
                },
            }, h)
    return written


def _dist_rows(dist: reduced.EnergyDistribution):
    if dist.binned:
        return ["bin_left", "bin_right", "probability"], zip(dist.bin_edges[:-1], dist.bin_edges[1:], dist.probabilities)
    return ["energy", "probability"], zip(dist.energies, dist.probabilities)


def _emit(path, dist, h, meta):
    header, rows = _dist_rows(dist)
    return io.write_csv(path, header, rows, h, meta)


def eigenstate_selection(n_w: int, n_scan: int) -> list:
    """Evenly spaced indices from bottom to top plus an adjacent triple at mid-spectrum."""
    picks = set(np.linspace(0, n_w - 1, max(n_scan, 2)).round().astype(int).tolist())
    picks.update(ex.adjacent_triple(n_w // 2, n_w))
    return sorted(picks)


def cmd_distributions(cfg: ExperimentConfig, build_missing: bool = False) -> list:
    """Files ``dist_{s,e,w,wb}_ic{i}_{t0,late}.csv`` and ``dist_{s,e}_eig{k}.csv`` per coupling."""
    written = []
    h = cfg.config_hash()
    for c, model in load_models(cfg, build_missing).items():
        d = coupling_dir(cfg, c)
        times = ex.default_times(model, cfg.n_samples, cfg.t_max)
        win = ex.late_window(len(times), cfg.late_fraction)
        e_s = model.sys_decomposition_.eigenvalues
        e_e = model.env_decomposition_.eigenvalues
        e_w = model.decomposition_.eigenvalues
        edges = ex.env_bin_edges(model, cfg.n_env_bins)
        for ic in cfg.initial_conditions():
            psi0, _ = ex.initial_state(model, ic)
            series = ex.run_equilibration(model, psi0, times, cfg.log_base)
            # P_w is time independent, so both epochs use the t=0 moduli
            p_w = reduced.world_energy_distribution(series.state, e_w)
            epochs = {
                "t0": (series.P_s[0], series.P_e[0]),
                "late": (series.P_s[win].mean(axis=0), series.P_e[win].mean(axis=0)),
            }
            for epoch, (ps, pe) in epochs.items():
                meta = {"E_I": f"{c:g}", "env_index": ic.env_index, "epoch": epoch}
                tag = f"ic{ic.env_index}_{epoch}"
                written.append(_emit(d / f"dist_s_{tag}.csv", reduced.EnergyDistribution(e_s, ps), h, meta))
                env = reduced.bin_distribution(reduced.EnergyDistribution(e_e, pe), cfg.n_env_bins, edges)
                written.append(_emit(d / f"dist_e_{tag}.csv", env, h, meta))
                written.append(_emit(d / f"dist_w_{tag}.csv", p_w, h, meta))
                written.append(_emit(d / f"dist_wb_{tag}.csv", reduced.bin_distribution(p_w, cfg.n_world_bins), h, meta))
        for a in ex.eigenstate_scan(model, eigenstate_selection(model.params_.N_w, cfg.n_scan_eigenstates), cfg.n_env_bins):
            meta = {"E_I": f"{c:g}", "eigenstate": a.index, "eigenvalue": repr(a.energy)}
            written.append(_emit(d / f"dist_s_eig{a.index}.csv", a.P_s, h, meta))
            written.append(_emit(d / f"dist_e_eig{a.index}.csv", a.P_e, h, meta))
    return written


def _coupling_summary(r: ex.CouplingResult) -> dict:
    return {
        "E_I": r.coupling,
        "env_indices": list(r.env_indices),
        "initial_E_s": r.initial_E_s,
        "late_E_s": r.late_E_s,
        "late_E_e": r.late_E_e,
        "sigma_ic_E_s": r.sigma_ic,
        "fluctuation_scale_E_s": r.fluctuation,
        "ratio": r.ratio,
        "verdict": r.verdict,
        "tv_late_P_s": r.tv_P_s,
        "tv_late_P_e_binned": r.tv_P_e,
        "deff": r.deff,
    }


def cmd_report(cfg: ExperimentConfig, build_missing: bool = False) -> dict:
    h = cfg.config_hash()
    models = load_models(cfg, build_missing)
    ics = cfg.initial_conditions()
    results = []
    for c, model in models.items():
        times = ex.default_times(model, cfg.n_samples, cfg.t_max)
        results.append(ex.coupling_run(model, ics, times, cfg.late_fraction, cfg.n_env_bins))
    out = Path(cfg.output_dir)
    rows = ex.deff_table(results, cfg.reference_coupling)
    cols = ["E_I", "mean_deff_over_Nw", "delta_pct", "pct_of_reference"]
    io.write_csv(out / "deff_table.csv", cols, ([r[k] for k in cols] for r in rows), h)
    io.write_json(out / "thermalization_report.json", {
        "definitions": {
            "sigma_ic_E_s": "population standard deviation across initial conditions of the late-window mean of <H_s>",
            "fluctuation_scale_E_s": "mean over initial conditions of the late-window temporal standard deviation of <H_s>",
            "verdict": f"converged if sigma_ic < {ex.CONVERGED_BELOW:g} x fluctuation, "
                       f"not converged if > {ex.SEPARATED_ABOVE:g} x fluctuation, marginal otherwise",
            "tv": "total variation distance 0.5 * sum |p - q| between late-window averaged distributions",
            "late_window": f"final {cfg.late_fraction:g} of the time grid",
        },
        "couplings": [_coupling_summary(r) for r in results],
    }, h)
    eth = [ex.eth_diagnostic(models[r.coupling], r, cfg.n_env_bins) for r in results]
    io.write_json(out / "eth_report.json", {
        "definitions": {
            "selection": "eigenstate with the largest |alpha_i|^2 for each initial state and its two index neighbours",
            "tv_P_s/tv_P_e": "total variation from each selected eigenstate's distribution to the late-window one",
            "eigenstate_scatter": "mean pairwise total variation among all selected eigenstate distributions",
            "equilibrium_scatter": "mean pairwise total variation among the late-window distributions",
        },
        "couplings": eth,
    }, h)
    return {"deff_table": rows, "scan": results, "eth": eth}


def build_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.load(args.config)
    else:
        cfg = ExperimentConfig.full_scale() if args.full_scale else ExperimentConfig.desk_scale()
    if args.config and (args.full_scale or args.desk_scale):
        preset = ExperimentConfig.full_scale() if args.full_scale else ExperimentConfig.desk_scale()
        for name in ("N_s", "N_e", "E_e", "env_indices", "target_energy"):
            setattr(cfg, name, getattr(preset, name))
        cfg.validate()
    cfg.resolve_dirs(args.output_dir, args.cache_dir)
    return cfg


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="acl-lab", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=["build", "evolve", "distributions", "report", "all", "config"])
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--output-dir", help="output directory (env: ACL_OUTPUT_DIR)")
    p.add_argument("--cache-dir", help="eigendecomposition cache directory (env: ACL_CACHE_DIR)")
    p.add_argument("--threads", type=int, default=None, help="BLAS/LAPACK thread count")
    scale = p.add_mutually_exclusive_group()
    scale.add_argument("--desk-scale", action="store_true", help="N_s=10, N_e=120 preset")
    scale.add_argument("--full-scale", action="store_true", help="N_s=30, N_e=600 preset")
    p.add_argument("--build-missing", action="store_true", help="build absent caches instead of failing")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def run(args) -> int:
    cfg = build_config(args)
    if args.command == "config":
        print(cfg.dumps())
        return EXIT_OK
    write_provenance(cfg)
    if args.command in ("build", "all"):
        cmd_build(cfg)
    if args.command in ("evolve", "all"):
        cmd_evolve(cfg, args.build_missing)
    if args.command in ("distributions", "all"):
        cmd_distributions(cfg, args.build_missing)
    if args.command in ("report", "all"):
        cmd_report(cfg, args.build_missing)
    return EXIT_OK


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with warnings.catch_warnings(), threadpool_limits(limits=args.threads):
            warnings.simplefilter("once", TruncationWarning)
            return run(args)
    except (ConfigError, ex.BracketError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ResourceError, MemoryError) as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (spectral.NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
