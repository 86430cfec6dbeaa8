"""Four-stroke Otto cycle of a qubit dressed by a thermal cavity photon.

Stroke 1 ramps the qubit from omega_1 < omega_L to omega_2 > omega_L with the
baths off, stroke 2 thermalizes at omega_2, stroke 3 ramps back (the work
stroke) and stroke 4 lets the qubit decay at omega_1. Energies are in units
of hbar * omega_L.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import constants
from scipy.special import cosdg

from .dynamics import (
    BathParams, EnsembleResult, MeasurementScheme, RampSchedule, TRACKED, evolve_master, hold,
    max_stable_dt, rng_stream, run_trajectories,
)
from .jaynes_cummings import (
    MUCH_GREATER, JCParams, dressed_energies, dressed_levels, jc_hamiltonian, regime_warnings,
    two_qubit_dressed,
)
from .quantum_core import HilbertSpace, ket2dm

TAIL_TOL = 1e-8
MIN_CUTOFF = 3
TRAJECTORY_CUTOFF = 3
BATCH_SIZE = 250
DEFAULT_BIN_WIDTH = 0.005


class HierarchyWarning(UserWarning):
    pass


@dataclass(frozen=True)
class EngineConfig:
    """Cycle parameters in natural units (hbar = omega_L = 1).

    The thermal field is given either by ``n_bar`` or by the cavity angular
    frequency ``omega_L_rad_s`` (rad/s) together with ``T_f_kelvin``.
    ``tau`` lists the four stroke durations; ``tau[0] = None`` means tau_1 = tau_3.
    ``p1`` overrides the single-photon weight used to seed measured trajectories.
    """
    delta_1: float = -0.2
    delta_2: float = 0.2
    g: float = 0.013
    kappa: float = 2e-7
    gamma: float = 2e-5
    n_bar: float | None = 0.1
    omega_L_rad_s: float | None = None
    T_f_kelvin: float | None = None
    tau: tuple = (None, 5e7, 5000.0, 5e5)
    fock_cutoff: int | str = "auto"
    field_prep: str = "thermal"
    p1: float | None = None
    dt_master: float | None = None
    dt_sse: float = 0.1
    n_cycles: int = 2
    transmon_omega_0: float = 1.5

    def __post_init__(self):
        errors = config_errors(self)
        if errors:
            raise ValueError("; ".join(errors))

    @property
    def omega_1(self) -> float:
        return 1.0 + self.delta_1

    @property
    def omega_2(self) -> float:
        return 1.0 + self.delta_2

    @property
    def taus(self) -> tuple:
        t1, t2, t3, t4 = self.tau
        return (t3 if t1 is None else t1, t2, t3, t4)

    @property
    def resolved_n_bar(self) -> float:
        if self.n_bar is not None:
            return float(self.n_bar)
        return thermal_photon_number(self.omega_L_rad_s, self.T_f_kelvin)

    @property
    def cutoff(self) -> int:
        if self.fock_cutoff == "auto":
            return auto_fock_cutoff(self.resolved_n_bar)
        return int(self.fock_cutoff)

    def field_distribution(self) -> np.ndarray:
        return prepare_field_state(self.field_prep, self.resolved_n_bar, self.cutoff)

    @property
    def single_photon_weight(self) -> float:
        if self.p1 is not None:
            return float(self.p1)
        return float(self.field_distribution()[1])

    def params(self, omega: float, n_qubits: int = 1) -> JCParams:
        return JCParams(omega=omega, g=self.g, n_qubits=n_qubits)


def config_errors(c: EngineConfig) -> list[str]:
    """Every violated precondition of an EngineConfig, for aggregated reporting."""
    errs = []
    if c.delta_1 > 0 > c.delta_2:
        errs.append("delta_1 > 0 > delta_2 describes the reversed (heat-pump) cycle, which needs a hot "
                    "qubit bath and is not supported")
    elif not c.delta_1 < 0 < c.delta_2:
        errs.append(f"need delta_1 < 0 < delta_2, got delta_1={c.delta_1}, delta_2={c.delta_2}")
    if c.omega_1 <= 0:
        errs.append(f"omega_1 = 1 + delta_1 must be positive, got {c.omega_1}")
    if c.g <= 0:
        errs.append(f"g must be positive, got {c.g}")
    if c.kappa < 0 or c.gamma < 0:
        errs.append("kappa and gamma must be >= 0")
    if c.n_bar is None:
        if c.omega_L_rad_s is None or c.T_f_kelvin is None:
            errs.append("give n_bar, or both omega_L_rad_s and T_f_kelvin")
        else:
            if c.T_f_kelvin < 0:
                errs.append(f"temperature must be >= 0, got {c.T_f_kelvin}")
            if c.omega_L_rad_s <= 0:
                errs.append(f"omega_L_rad_s must be positive, got {c.omega_L_rad_s}")
    elif c.n_bar < 0:
        errs.append(f"n_bar must be >= 0, got {c.n_bar}")
    if len(c.tau) != 4:
        errs.append(f"tau needs four stroke durations, got {len(c.tau)}")
    elif any(t is not None and t <= 0 for t in c.tau) or c.tau[2] is None:
        errs.append(f"stroke durations must be positive, got {c.tau}")
    if not (c.fock_cutoff == "auto" or (isinstance(c.fock_cutoff, int) and c.fock_cutoff >= 1)):
        errs.append(f"fock_cutoff must be 'auto' or an integer >= 1, got {c.fock_cutoff!r}")
    if c.field_prep not in ("thermal", "even_only"):
        errs.append(f"field_prep must be 'thermal' or 'even_only', got {c.field_prep!r}")
    if c.p1 is not None and not 0 <= c.p1 <= 1:
        errs.append(f"p1 must lie in [0, 1], got {c.p1}")
    if c.dt_sse <= 0 or (c.dt_master is not None and c.dt_master <= 0):
        errs.append("time steps must be positive")
    if c.n_cycles < 1:
        errs.append(f"n_cycles must be >= 1, got {c.n_cycles}")
    return errs


def hierarchy_warnings(c: EngineConfig) -> list[str]:
    """Violations of omega, omega_L >> |Delta| >> g and tau_2 >> 1/kappa >> tau_4 >> 1/gamma >> tau_3 >> 1/g."""
    out = []
    for name, omega in (("omega_1", c.omega_1), ("omega_2", c.omega_2)):
        out += [f"{name}: {w}" for w in regime_warnings(c.params(omega))]
    _, t2, t3, t4 = c.taus
    inv = lambda r: math.inf if r == 0 else 1.0 / r  # noqa: E731
    chain = [("tau_2", t2), ("1/kappa", inv(c.kappa)), ("tau_4", t4),
             ("1/gamma", inv(c.gamma)), ("tau_3", t3), ("1/g", 1.0 / c.g)]
    for (na, a), (nb, b) in zip(chain, chain[1:]):
        if not a >= MUCH_GREATER * b * (1 - 1e-9):
            out.append(f"{na}={a:.4g} is not >> {nb}={b:.4g}")
    return out


# ------------------------------------------------------------ thermal field

def thermal_photon_number(omega_L_rad_s: float, T_kelvin: float) -> float:
    """Bose-Einstein occupation for a mode of angular frequency ``omega_L_rad_s`` (pass 2*pi*f)."""
    if T_kelvin < 0:
        raise ValueError(f"temperature must be >= 0, got {T_kelvin}")
    if omega_L_rad_s <= 0:
        raise ValueError(f"frequency must be positive, got {omega_L_rad_s}")
    if T_kelvin == 0:
        return 0.0
    x = constants.hbar * omega_L_rad_s / (constants.k * T_kelvin)
    return 1.0 / math.expm1(x) if x < 700 else 0.0


def thermal_distribution(n_bar: float, n_max: int):
    """(p_0..p_{n_max}, tail mass beyond n_max) of a thermal field."""
    if n_bar < 0:
        raise ValueError(f"n_bar must be >= 0, got {n_bar}")
    n = np.arange(n_max + 1)
    if n_bar == 0:
        p = (n == 0).astype(float)
        return p, 0.0
    ratio = n_bar / (n_bar + 1.0)
    p = ratio ** n / (n_bar + 1.0)
    return p, float(ratio ** (n_max + 1))


def auto_fock_cutoff(n_bar: float) -> int:
    """Smallest cutoff with thermal tail mass below TAIL_TOL, at least MIN_CUTOFF."""
    if n_bar <= 0:
        return MIN_CUTOFF
    ratio = n_bar / (n_bar + 1.0)
    n = math.ceil(math.log(TAIL_TOL) / math.log(ratio)) - 1
    while ratio ** (n + 1) >= TAIL_TOL:
        n += 1
    while n > 0 and ratio ** n < TAIL_TOL:
        n -= 1
    return max(MIN_CUTOFF, n)


def prepare_field_state(kind: str, n_bar: float, n_max: int) -> np.ndarray:
    p, _ = thermal_distribution(n_bar, n_max)
    if kind == "thermal":
        return p
    if kind == "even_only":
        # renormalize by the full even-n thermal mass (n_bar + 1) / (2 n_bar + 1)
        p = np.where(np.arange(n_max + 1) % 2 == 0, p, 0.0)
        return p * (2.0 * n_bar + 1.0) / (n_bar + 1.0)
    raise ValueError(f"unknown field preparation {kind!r}")


# ------------------------------------------------------------ analytic work

@dataclass
class CycleResult:
    W_out: float
    W_in: float
    W_tot: float
    stroke_energies: dict
    p_n: np.ndarray
    source: str
    warnings: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)


def _lower_dressed_energy(c: EngineConfig, omega: float) -> float:
    return dressed_energies(c.params(omega), 0)[1]


def analytic_work_single(c: EngineConfig) -> CycleResult:
    """W = p_1 [E_{2,0}(omega_1) - E_{2,0}(omega_2)].

    |W| <= p_1 |Delta_1| holds exactly when Delta_2 <= |Delta_1|; for a wider
    hot detuning the dressed shifts push |W| above it by O(p_1 g^2 / |Delta_1|).
    """
    p1 = c.single_photon_weight
    e_hot = _lower_dressed_energy(c, c.omega_2)
    e_cold = _lower_dressed_energy(c, c.omega_1)
    W = p1 * (e_cold - e_hot)
    energies = {"A": p1 * e_hot, "B": p1 * e_cold, "C": 0.0, "D": 0.0}
    return CycleResult(W, 0.0, W, energies, c.field_distribution(), "analytic", hierarchy_warnings(c),
                       {"bound": p1 * abs(c.delta_1)})


def analytic_work_multi(c: EngineConfig) -> CycleResult:
    """Bare-state multi-photon cycle: stroke energies A-D and W_tot = W + W'."""
    p = c.field_distribution()
    n = np.arange(len(p))
    w1, w2 = c.omega_1, c.omega_2
    p_next = np.append(p[1:], 0.0)  # p_{n+1}, zero beyond the cutoff
    m = n >= 1
    H_A = float(np.sum(n * p))
    H_B = float(np.sum(((n - 1) + w1) * p * m))
    H_C = float(np.sum(n * p_next * m))
    H_D = float(np.sum(((n - 1) + w2) * p_next * m))
    W_out, W_in = H_B - H_A, H_D - H_C
    energies = {"A": H_A, "B": H_B, "C": H_C, "D": H_D}
    closed = (w1 - 1.0) * p[1] + (w1 + w2 - 2.0) * (1.0 - p[0] - p[1])
    return CycleResult(W_out, W_in, W_out + W_in, energies, p, "analytic", hierarchy_warnings(c),
                       {"W_tot_closed_form": closed})


def analytic_work_two_qubit(c: EngineConfig) -> CycleResult:
    """Single-photon work with E_{2,0} replaced by the lower two-qubit polariton energy."""
    p1 = c.single_photon_weight
    e_hot = two_qubit_dressed(c.params(c.omega_2, n_qubits=2))[3]
    e_cold = two_qubit_dressed(c.params(c.omega_1, n_qubits=2))[3]
    W = p1 * (e_cold - e_hot)
    energies = {"A": p1 * e_hot, "B": p1 * e_cold, "C": 0.0, "D": 0.0}
    return CycleResult(W, 0.0, W, energies, c.field_distribution(), "analytic", hierarchy_warnings(c))


def transmon_frequency(phi_over_phi0: float, omega_0: float) -> float:
    return float(omega_0 * np.sqrt(np.abs(cosdg(180.0 * phi_over_phi0))))


def flux_for_frequency(omega: float, omega_0: float) -> float:
    """Smallest non-negative flux (in units of the flux quantum) giving qubit frequency ``omega``."""
    if not 0 <= omega <= omega_0:
        raise ValueError(f"frequency {omega} outside the tunable range [0, {omega_0}]")
    return float(np.arccos((omega / omega_0) ** 2) / np.pi)


# ------------------------------------------------------------ numeric cycle

def _energy(params, space, rho):
    return float(np.real(np.trace(rho @ jc_hamiltonian(params, space))))


def _field_populations(space, rho):
    d = np.real(np.diag(rho)).reshape(space.qubit_dim, space.n_fock)
    return d.sum(axis=0)


def simulate_cycle(c: EngineConfig) -> CycleResult:
    """Integrate the master equation through ``n_cycles`` full cycles from |g,0> at omega_1.

    Work is Tr[rho dH] accumulated over the two ramps of the last cycle; the
    stroke-boundary energies A-D give an independent accounting whose
    mismatch is reported in ``diagnostics``.
    """
    space = HilbertSpace(1, c.cutoff)
    w1, w2 = c.omega_1, c.omega_2
    t1, t2, t3, t4 = c.taus
    bath = BathParams(c.kappa, c.gamma, c.resolved_n_bar)
    closed = BathParams()
    strokes = [
        (RampSchedule(w1, w2, t1), closed, w2),
        (hold(w2, t2), bath, w2),
        (RampSchedule(w2, w1, t3), closed, w1),
        (hold(w1, t4), bath, w1),
    ]
    params = c.params(w1)
    dt = c.dt_master
    if dt is None:
        dt = 0.999 * min(max_stable_dt(params, s, b, space) for s, b, _ in strokes)
    if c.field_prep != "thermal":
        raise ValueError("simulate_cycle thermalizes with a thermal bath; field_prep must be 'thermal'")

    rho = ket2dm(space.basis("g", 0))
    drift = 0.0
    for _ in range(c.n_cycles):
        E_C = _energy(params.with_omega(w1), space, rho)
        works, ends = [], []
        for k, (schedule, b, w_end) in enumerate(strokes):
            run = evolve_master(rho, params, schedule, b, dt, space)
            rho = run.final
            drift = max(drift, run.max_trace_drift)
            works.append(run.work)
            ends.append(_energy(params.with_omega(w_end), space, rho))
            if k == 1:
                p_field = _field_populations(space, rho)
    E_D, E_A, E_B, _ = ends
    W_in, W_out = works[0], works[2]
    result = CycleResult(
        W_out=W_out, W_in=W_in, W_tot=W_in + W_out,
        stroke_energies={"A": E_A, "B": E_B, "C": E_C, "D": E_D},
        p_n=p_field, source="numeric", warnings=hierarchy_warnings(c),
        diagnostics={
            "energy_mismatch_in": abs((E_D - E_C) - W_in),
            "energy_mismatch_out": abs((E_B - E_A) - W_out),
            "max_trace_drift": drift,
            "dt": dt,
            "fock_cutoff": space.fock_cutoff,
        },
    )
    for w in result.warnings:
        warnings.warn(w, HierarchyWarning, stacklevel=2)
    return result


# ------------------------------------------------------- measured stroke 3

@dataclass
class WorkDistribution:
    bin_edges: np.ndarray
    counts: np.ndarray
    n_trajectories: int
    mean: float
    variance: float

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.n_trajectories

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])


def histogram_work(works, bin_width: float = DEFAULT_BIN_WIDTH) -> WorkDistribution:
    """Histogram with bins centred on integer multiples of ``bin_width``."""
    works = np.asarray(works, dtype=float)
    if works.size == 0:
        raise ValueError("no work samples")
    if bin_width <= 0:
        raise ValueError(f"bin width must be positive, got {bin_width}")
    k_lo = math.floor(works.min() / bin_width + 0.5)
    k_hi = math.floor(works.max() / bin_width + 0.5)
    edges = (np.arange(k_lo, k_hi + 2) - 0.5) * bin_width
    counts, _ = np.histogram(works, bins=edges)
    var = float(works.var(ddof=1)) if works.size > 1 else 0.0
    return WorkDistribution(edges, counts, int(works.size), float(works.mean()), var)


def _run_batch(c, scheme, space, indices, master_seed, keep_records):
    streams = [rng_stream(master_seed, k) for k in indices]
    p1 = c.single_photon_weight
    upper_hot = dressed_levels(c.params(c.omega_2), 0, space)[1].state
    ground = space.basis("g", 0)
    excited = np.array([s.random() < p1 for s in streams])
    psi0 = np.where(excited[:, None], upper_hot[None, :], ground[None, :])
    schedule = RampSchedule(c.omega_2, c.omega_1, c.taus[2])
    kind = "dispersive" if scheme.kind == "none" else scheme.kind
    res = run_trajectories(psi0, c.params(c.omega_2), space, schedule, scheme, c.dt_sse, streams,
                           seed_indices=indices, keep_records=keep_records, kind=kind)
    return res, excited


def run_measured_stroke(c: EngineConfig, scheme: MeasurementScheme, n_traj: int, master_seed: int,
                        threads: int = 1, keep_records: bool = False):
    """Monitored stroke 3 for ``n_traj`` trajectories.

    Trajectory k draws its initial state (|2,0> at omega_2 with probability
    p_1, else |g,0>) and then all its noise from stream (master_seed, k).
    Trajectories run in fixed batches, so results do not depend on ``threads``.
    Returns the merged EnsembleResult and the boolean mask of excited starts.
    """
    if n_traj < 1:
        raise ValueError(f"need at least one trajectory, got {n_traj}")
    cutoff = TRAJECTORY_CUTOFF if c.fock_cutoff == "auto" else c.cutoff
    space = HilbertSpace(1, cutoff)
    batches = [list(range(s, min(s + BATCH_SIZE, n_traj))) for s in range(0, n_traj, BATCH_SIZE)]

    def job(idx):
        return _run_batch(c, scheme, space, idx, master_seed, keep_records)

    if threads > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, batches))
    else:
        parts = [job(b) for b in batches]

    sizes = np.array([len(b) for b in batches], dtype=float)
    first = parts[0][0]
    mean_pops = {
        name: sum(r.mean_populations[name] * w for (r, _), w in zip(parts, sizes)) / n_traj
        for name in TRACKED
    }
    merged = EnsembleResult(
        times=first.times,
        mean_populations=mean_pops,
        mean_sigma_z=sum(r.mean_sigma_z * w for (r, _), w in zip(parts, sizes)) / n_traj,
        works=np.concatenate([r.works for r, _ in parts]),
        jump_counts=np.concatenate([r.jump_counts for r, _ in parts]),
        records=[rec for r, _ in parts for rec in r.records] if keep_records else None,
    )
    return merged, np.concatenate([e for _, e in parts])


def work_distribution(c: EngineConfig, scheme: MeasurementScheme, n_traj: int,
                      bin_width: float = DEFAULT_BIN_WIDTH, master_seed: int = 0,
                      threads: int = 1) -> WorkDistribution:
    ensemble, _ = run_measured_stroke(c, scheme, n_traj, master_seed, threads)
    return histogram_work(ensemble.works, bin_width)
