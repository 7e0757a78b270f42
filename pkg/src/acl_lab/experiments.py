"""Experiment drivers built on a fitted :class:`~acl_lab.model.ACLModel`.

Initial states are products of a coherent oscillator state and one
environment eigenstate, with the coherent amplitude tuned so that the
world energy (interaction included) hits a target value.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import reduced, spectral
from .hamiltonian import expectation
from .oscillator import TruncationWarning, coherent_state
from .validation import check_times

FULL_ENV_INDICES = (300, 400, 450, 500, 550)
DESK_ENV_INDICES = (60, 80, 90, 100, 110)
STANDARD_COUPLINGS = (1.0, 0.1, 0.02, 0.007)
REFERENCE_COUPLING = 0.1

CONVERGED_BELOW = 2.0
SEPARATED_ABOVE = 5.0
MIN_WINDOW = 50


class BracketError(ValueError):
    pass


@dataclass(frozen=True)
class InitialConditionSpec:
    env_index: int
    target_energy: float = 25.0
    alpha_phase: float = 0.0


@dataclass(frozen=True)
class TunedAlpha:
    alpha: complex
    leakage: float
    world_energy: float

    @property
    def degraded(self) -> bool:
        return self.leakage > 1e-6


def _env_eigenstate(model, index):
    n_e = model.dims[1]
    if not 0 <= index < n_e:
        raise IndexError(f"environment eigenstate index {index} outside [0, {n_e})")
    return model.env_decomposition_.eigenvectors[:, index]


def tune_alpha(model, ic: InitialConditionSpec) -> TunedAlpha:
    """Find |alpha| so that <H_w> of coherent(alpha) x |i>_e equals the target.

    The truncated coherent-state energy is not monotonic in |alpha|; the
    smallest root on a grid scan is refined with Brent's method.
    """
    ops = model.operators_
    n_s = model.dims[0]
    env = _env_eigenstate(model, ic.env_index)
    e_env = expectation(ops.H_e, env)
    h_int = expectation(ops.H_eI, env)
    phase = np.exp(1j * ic.alpha_phase)

    def world_energy(r):
        c = coherent_state(n_s, r * phase, warn=False).vector
        # product state: <q_s (x) H_e^I> factorizes
        return expectation(ops.H_s, c) + e_env + expectation(ops.q_s, c) * h_int

    target = ic.target_energy
    grid = np.linspace(0.0, math.sqrt(n_s) + 2.0, 40 * n_s)
    values = np.array([world_energy(r) - target for r in grid])
    if abs(values[0]) <= 1e-12:
        r = 0.0
    else:
        above = np.flatnonzero(values >= 0)
        if values[0] > 0 or above.size == 0:
            raise BracketError(
                f"target <H_w>={target} unreachable for env index {ic.env_index}: "
                f"reachable range [{values[0] + target:.6g}, {values.max() + target:.6g}]"
            )
        k = above[0] - 1
        r = brentq(lambda x: world_energy(x) - target, grid[k], grid[k + 1], xtol=1e-15, rtol=1e-15, maxiter=200)

    alpha = complex(r * phase)
    cs = coherent_state(n_s, alpha, warn=False)
    if cs.degraded:
        warnings.warn(
            f"env index {ic.env_index}: coherent state alpha={alpha:.5g} has top-level weight {cs.leakage:.3g}",
            TruncationWarning,
            stacklevel=2,
        )
    return TunedAlpha(alpha, cs.leakage, world_energy(r))


def initial_state(model, ic: InitialConditionSpec) -> tuple[np.ndarray, TunedAlpha]:
    tuned = tune_alpha(model, ic)
    sys_vec = coherent_state(model.dims[0], tuned.alpha, warn=False).vector
    return np.kron(sys_vec, _env_eigenstate(model, ic.env_index)), tuned


def default_horizon(model, factor: float = 20.0) -> float:
    """``factor`` over the median nearest-neighbour spacing of the world spectrum."""
    spacing = np.median(np.diff(model.decomposition_.eigenvalues))
    return factor / spacing


def default_times(model, n_samples: int = 1000, t_max: float | None = None) -> np.ndarray:
    return np.linspace(0.0, default_horizon(model) if t_max is None else t_max, n_samples)


@dataclass(frozen=True)
class TimeSeriesRecord:
    time: float
    entropy: float
    E_s: float
    E_e: float
    E_int: float


@dataclass(eq=False)
class TimeSeries:
    times: np.ndarray
    entropy: np.ndarray
    E_s: np.ndarray
    E_e: np.ndarray
    E_int: np.ndarray
    P_s: np.ndarray  # (n_times, N_s)
    P_e: np.ndarray  # (n_times, N_e)
    state: spectral.EigenbasisState
    world_energy: float

    OBSERVABLES = ("entropy", "E_s", "E_e", "E_int")

    def records(self):
        for row in zip(self.times, self.entropy, self.E_s, self.E_e, self.E_int):
            yield TimeSeriesRecord(*map(float, row))

    def __len__(self):
        return len(self.times)


def subsystem_populations(model, psi) -> tuple[np.ndarray, np.ndarray]:
    """P_s and P_e of a world vector in the subsystem energy eigenbases."""
    m = np.asarray(psi).reshape(model.dims)
    vs = model.sys_decomposition_.eigenvectors
    ve = model.env_decomposition_.eigenvectors
    p_s = (np.abs(vs.conj().T @ m) ** 2).sum(axis=1)
    p_e = (np.abs(m @ ve.conj()) ** 2).sum(axis=0)
    return p_s, p_e


def run_equilibration(model, psi0, times, entropy_base: float = math.e) -> TimeSeries:
    """Evolve ``psi0`` (world vector or EigenbasisState) over ``times``."""
    decomp = model.decomposition_
    times = check_times(times)
    if isinstance(psi0, spectral.EigenbasisState):
        st, start = psi0, None
    else:
        start = np.asarray(psi0, dtype=np.complex128)
        st = spectral.to_eigenbasis(decomp, start)
    n = len(times)
    n_s, n_e = model.dims
    out = {k: np.empty(n) for k in ("entropy", "E_s", "E_e", "E_int")}
    p_s = np.empty((n, n_s))
    p_e = np.empty((n, n_e))
    for k, (t, psi) in enumerate(spectral.trajectory(st, decomp, times)):
        if t == 0.0 and start is not None:
            psi = start  # exact at t = 0, avoids a V V^dagger round trip
        rho_s = reduced.partial_trace(psi, reduced.Space.SYSTEM, (n_s, n_e))
        out["entropy"][k] = reduced.entanglement_entropy(rho_s, entropy_base)
        out["E_s"][k], out["E_e"][k], out["E_int"][k] = model.operators_.energies(psi)
        p_s[k], p_e[k] = subsystem_populations(model, psi)
    e_w = float(st.probabilities @ decomp.eigenvalues)
    return TimeSeries(times, out["entropy"], out["E_s"], out["E_e"], out["E_int"], p_s, p_e, st, e_w)


def window_stats(x) -> tuple[float, float, float]:
    """Mean, standard deviation and autocorrelation-corrected standard error.

    The integrated autocorrelation time sums the sample autocorrelation up
    to its first non-positive lag.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    mean = float(x.mean())
    std = float(x.std())
    if std == 0.0:
        return mean, 0.0, 0.0
    d = x - mean
    acf = np.correlate(d, d, mode="full")[n - 1:] / (d @ d)
    tau = 1.0
    for lag in range(1, n // 2):
        if acf[lag] <= 0:
            break
        tau += 2.0 * acf[lag]
    return mean, std, std * math.sqrt(tau / n)


@dataclass(frozen=True)
class EquilibriumStats:
    window: tuple[float, float]
    n_samples: int
    mean: dict
    std: dict
    sem: dict
    dephasing_gap: float | None = None


def late_window(n: int, late_fraction: float) -> slice:
    if not 0 < late_fraction <= 1:
        raise ValueError("late_fraction must lie in (0, 1]")
    start = n - max(1, int(round(n * late_fraction)))
    if n - start < MIN_WINDOW:
        raise ValueError(f"late window has {n - start} samples; at least {MIN_WINDOW} required")
    return slice(start, n)


def equilibrium_stats(series: TimeSeries, late_fraction: float = 0.25, model=None) -> EquilibriumStats:
    """Late-window statistics; with ``model`` also the gap to the diagonal-ensemble E_s."""
    win = late_window(len(series), late_fraction)
    if series.times[win][-1] <= series.times[win][0]:
        raise ValueError("late window has zero duration")
    mean, std, sem = {}, {}, {}
    for name in TimeSeries.OBSERVABLES:
        mean[name], std[name], sem[name] = window_stats(getattr(series, name)[win])
    gap = None
    if model is not None:
        de_s = float(series.state.probabilities @ model.part_diagonals()[0])
        gap = abs(mean["E_s"] - de_s)
    return EquilibriumStats(
        (float(series.times[win][0]), float(series.times[win][-1])), win.stop - win.start, mean, std, sem, gap
    )


def diagonal_ensemble_energies(model, state: spectral.EigenbasisState) -> dict:
    e_s, e_e, e_i = state.probabilities @ model.part_diagonals().T
    return {"E_s": float(e_s), "E_e": float(e_e), "E_int": float(e_i)}


@dataclass(eq=False)
class DephasingReport:
    ordinary: TimeSeries
    randomized: list
    ordinary_stats: EquilibriumStats
    randomized_stats: list
    gaps: dict  # observable -> array over phase seeds
    tolerances: dict  # observable -> array of 4-sigma bounds
    seed_scatter: dict  # observable -> std of randomized late means across seeds
    pw_identical: bool

    @property
    def converged(self) -> bool:
        return all(np.all(self.gaps[k] <= self.tolerances[k]) for k in self.gaps)


def run_dephasing_comparison(model, psi0, times, phase_seeds=(1,), late_fraction: float = 0.25,
                             n_sigma: float = 4.0) -> DephasingReport:
    """Ordinary evolution against evolutions with phases randomized at t=0."""
    decomp = model.decomposition_
    st = psi0 if isinstance(psi0, spectral.EigenbasisState) else spectral.to_eigenbasis(decomp, psi0)
    ordinary = run_equilibration(model, st, times)
    o_stats = equilibrium_stats(ordinary, late_fraction, model)
    randomized, r_stats = [], []
    pw_same = True
    for seed in phase_seeds:
        rs = spectral.randomize_phases(st, seed)
        pw_same &= bool(np.allclose(rs.probabilities, st.probabilities, rtol=1e-12, atol=1e-15))
        series = run_equilibration(model, rs, times)
        randomized.append(series)
        r_stats.append(equilibrium_stats(series, late_fraction, model))
    gaps, tols, scatter = {}, {}, {}
    for name in ("entropy", "E_s", "E_e"):
        gaps[name] = np.array([abs(o_stats.mean[name] - r.mean[name]) for r in r_stats])
        tols[name] = np.array([n_sigma * math.hypot(o_stats.sem[name], r.sem[name]) for r in r_stats])
        scatter[name] = float(np.std([r.mean[name] for r in r_stats]))
    return DephasingReport(ordinary, randomized, o_stats, r_stats, gaps, tols, scatter, pw_same)


def env_bin_edges(model, n_bins: int) -> np.ndarray:
    e = model.env_decomposition_.eigenvalues
    return np.linspace(e.min(), e.max(), n_bins + 1)


@dataclass(eq=False)
class CouplingResult:
    coupling: float
    env_indices: tuple
    initial_E_s: np.ndarray
    late_E_s: np.ndarray
    late_E_e: np.ndarray
    sigma_ic: float
    fluctuation: float
    verdict: str
    late_P_s: np.ndarray  # (n_ic, N_s)
    late_P_e: np.ndarray  # (n_ic, n_bins), binned
    tv_P_s: np.ndarray  # (n_ic, n_ic)
    tv_P_e: np.ndarray
    deff: np.ndarray  # per initial condition, unbinned P_w
    N_w: int
    series: list = field(repr=False, default_factory=list)
    tuned: list = field(repr=False, default_factory=list)

    @property
    def ratio(self) -> float:
        return self.sigma_ic / self.fluctuation if self.fluctuation > 0 else math.inf


def _verdict(sigma, fluct):
    if sigma < CONVERGED_BELOW * fluct:
        return "converged"
    if sigma > SEPARATED_ABOVE * fluct:
        return "not converged"
    return "marginal"


def _pairwise_tv(rows):
    n = len(rows)
    out = np.zeros((n, n))
    for i, j in itertools.combinations(range(n), 2):
        out[i, j] = out[j, i] = reduced.total_variation(rows[i], rows[j])
    return out


def coupling_run(model, ics, times, late_fraction: float = 0.25, n_env_bins: int = 30) -> CouplingResult:
    """All initial conditions for one fitted model."""
    win = late_window(len(times), late_fraction)
    edges = env_bin_edges(model, n_env_bins)
    env_e = model.env_decomposition_.eigenvalues
    series, tuned = [], []
    for ic in ics:
        psi0, t = initial_state(model, ic)
        series.append(run_equilibration(model, psi0, times))
        tuned.append(t)
    late_s = np.array([s.E_s[win].mean() for s in series])
    late_e = np.array([s.E_e[win].mean() for s in series])
    fluct = float(np.mean([s.E_s[win].std() for s in series]))
    sigma = float(late_s.std())
    p_s = np.array([s.P_s[win].mean(axis=0) for s in series])
    p_e = np.array([
        reduced.bin_distribution(reduced.EnergyDistribution(env_e, s.P_e[win].mean(axis=0)), n_env_bins, edges).probabilities
        for s in series
    ])
    deff = np.array([reduced.effective_dimension(s.state.probabilities) for s in series])
    return CouplingResult(
        float(model.params_.E_I), tuple(ic.env_index for ic in ics), np.array([s.E_s[0] for s in series]),
        late_s, late_e, sigma, fluct, _verdict(sigma, fluct), p_s, p_e, _pairwise_tv(p_s), _pairwise_tv(p_e),
        deff, model.params_.N_w, series, tuned,
    )


def thermalization_scan(models, ics, times, late_fraction: float = 0.25, n_env_bins: int = 30) -> list:
    """One :class:`CouplingResult` per fitted model; the models differ only in E_I."""
    models = list(models)
    base = models[0].params_
    for m in models[1:]:
        p = m.params_
        if (p.N_s, p.N_e, p.seed, p.E_e) != (base.N_s, base.N_e, base.seed, base.E_e):
            raise ValueError("thermalization_scan models must share N_s, N_e, E_e and seed")
    return [coupling_run(m, ics, times, late_fraction, n_env_bins) for m in models]


@dataclass(frozen=True)
class EigenstateAnatomy:
    index: int
    energy: float
    P_s: reduced.EnergyDistribution
    P_e: reduced.EnergyDistribution  # binned


def eigenstate_scan(model, selection, n_env_bins: int = 30) -> list:
    """P_s and binned P_e for each selected world eigenstate."""
    decomp = model.decomposition_
    edges = env_bin_edges(model, n_env_bins)
    out = []
    for k in selection:
        k = int(k)
        if not 0 <= k < decomp.dim:
            raise IndexError(f"eigenstate index {k} outside [0, {decomp.dim})")
        p_s, p_e = subsystem_populations(model, decomp.eigenvectors[:, k])
        ps = reduced.EnergyDistribution(model.sys_decomposition_.eigenvalues.copy(), p_s)
        pe = reduced.bin_distribution(
            reduced.EnergyDistribution(model.env_decomposition_.eigenvalues.copy(), p_e), n_env_bins, edges
        )
        out.append(EigenstateAnatomy(k, float(decomp.eigenvalues[k]), ps, pe))
    return out


def adjacent_triple(center: int, n: int) -> list:
    lo = min(max(center - 1, 0), n - 3)
    return [lo, lo + 1, lo + 2]


def adjacent_distances(model, band=(0.4, 0.6)) -> np.ndarray:
    """Total-variation distance of P_s between neighbouring world eigenstates in a spectral band."""
    n = model.decomposition_.dim
    lo, hi = int(band[0] * n), int(band[1] * n)
    scan = eigenstate_scan(model, range(lo, hi + 1))
    return np.array([reduced.total_variation(a.P_s, b.P_s) for a, b in zip(scan, scan[1:])])


def deff_table(results, reference_coupling: float = REFERENCE_COUPLING) -> list:
    """Rows of (E_I, <d_eff>/N_w, Delta in % of the mean, % of the reference row)."""
    ref = [r for r in results if math.isclose(r.coupling, reference_coupling)]
    if not ref:
        raise ValueError(f"no result for reference coupling {reference_coupling}")
    ref_mean = float(ref[0].deff.mean())
    rows = []
    for r in results:
        mean = float(r.deff.mean())
        rows.append({
            "E_I": r.coupling,
            "mean_deff_over_Nw": mean / r.N_w,
            "delta_pct": 100.0 * float(r.deff.std()) / mean,
            "pct_of_reference": 100.0 * mean / ref_mean,
        })
    return rows


def eth_diagnostic(model, result: CouplingResult, n_env_bins: int = 30) -> dict:
    """Compare eigenstate subsystem distributions to late-time ones.

    For each initial state the eigenstate with the largest |alpha_i|^2 and
    its two index neighbours are used.
    """
    n = model.decomposition_.dim
    per_state = []
    eig_ps, eig_pe = [], []
    for k, series in enumerate(result.series):
        peak = int(np.argmax(series.state.probabilities))
        scan = eigenstate_scan(model, adjacent_triple(peak, n), n_env_bins)
        eig_ps += [a.P_s.probabilities for a in scan]
        eig_pe += [a.P_e.probabilities for a in scan]
        energies = [a.energy for a in scan]
        per_state.append({
            "env_index": result.env_indices[k],
            "eigenstates": [a.index for a in scan],
            "eigenvalues": energies,
            "relative_spread": (max(energies) - min(energies)) / max(abs(np.mean(energies)), 1e-300),
            "tv_P_s": [reduced.total_variation(a.P_s, result.late_P_s[k]) for a in scan],
            "tv_P_e": [reduced.total_variation(a.P_e, result.late_P_e[k]) for a in scan],
        })

    def mean_offdiag(m):
        return float(m[np.triu_indices(len(m), 1)].mean()) if len(m) > 1 else 0.0

    return {
        "coupling": result.coupling,
        "states": per_state,
        "mean_tv_to_equilibrium_P_s": float(np.mean([s["tv_P_s"] for s in per_state])),
        "mean_tv_to_equilibrium_P_e": float(np.mean([s["tv_P_e"] for s in per_state])),
        "eigenstate_scatter_P_s": mean_offdiag(_pairwise_tv(eig_ps)),
        "eigenstate_scatter_P_e": mean_offdiag(_pairwise_tv(eig_pe)),
        "equilibrium_scatter_P_s": mean_offdiag(result.tv_P_s),
        "equilibrium_scatter_P_e": mean_offdiag(result.tv_P_e),
    }
