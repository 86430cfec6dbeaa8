"""Time evolution: Lindblad master equation and stochastic Schroedinger unravelings.

Master equation
    Fixed-step RK4 with H(t) = H0 + omega(t) Pe. When the qubit frequency is
    held fixed the one-step RK4 map is built once as a superoperator and
    raised to integer powers, which is the same map as stepping but cheap for
    the very long thermalization strokes.

Trajectories
    Both unravelings advance a batch of state vectors at once. Each step
    applies the measurement increment (Euler-Maruyama for the diffusive
    monitor, a Bernoulli jump draw for the absorptive one) followed by the
    exact propagator exp(-i H(t_mid) dt) and an explicit renormalization.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .jaynes_cummings import JCParams, dressed_levels, hamiltonian_parts
from .quantum_core import HilbertSpace

NOISE_CHUNK = 1024
MAX_SAMPLES = 2000
JUMP_FLOOR = 1e-12
NORM_FLOOR = 1e-6
TRACKED = ("2,0", "1,0", "e,0", "g,1")


@dataclass(frozen=True)
class BathParams:
    kappa: float = 0.0
    gamma: float = 0.0
    n_bar: float = 0.0

    def __post_init__(self):
        for name in ("kappa", "gamma", "n_bar"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class RampSchedule:
    omega_start: float
    omega_end: float
    duration: float
    shape: str = "linear"

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError(f"ramp duration must be positive, got {self.duration}")
        if self.shape != "linear":
            raise ValueError(f"unsupported ramp shape {self.shape!r}")

    @property
    def is_static(self) -> bool:
        return self.omega_start == self.omega_end

    def omega(self, t):
        return self.omega_start + (self.omega_end - self.omega_start) * np.asarray(t) / self.duration


def hold(omega: float, duration: float) -> RampSchedule:
    return RampSchedule(omega, omega, duration)


@dataclass(frozen=True)
class MeasurementScheme:
    kind: str = "none"
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "dispersive", "absorptive"):
            raise ValueError(f"unknown measurement kind {self.kind!r}")
        if self.lam < 0:
            raise ValueError(f"measurement strength must be >= 0, got {self.lam}")
        if self.kind == "none" and self.lam != 0:
            raise ValueError("kind='none' requires lam=0")


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    sigma_z: np.ndarray
    tracked_populations: dict
    work: float
    jump_times: np.ndarray
    seed_index: int


@dataclass
class EnsembleResult:
    """Batched trajectory output. ``records`` is None unless per-trajectory series were kept."""
    times: np.ndarray
    mean_populations: dict
    mean_sigma_z: np.ndarray
    works: np.ndarray
    jump_counts: np.ndarray
    records: list | None = None


@dataclass
class MasterRun:
    times: np.ndarray
    states: np.ndarray
    excited: np.ndarray
    work: float
    max_trace_drift: float
    tracked_populations: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


# ---------------------------------------------------------------- channels

def collapse_channels(space: HilbertSpace, bath: BathParams):
    """(rate, operator) pairs of the qubit-decay and thermal-cavity dissipators."""
    a = space.a()
    out = []
    if bath.gamma > 0:
        for k in range(1, space.n_qubits + 1):
            out.append((bath.gamma, space.sigma(k)[2]))
    if bath.kappa > 0:
        out.append((bath.kappa * (bath.n_bar + 1.0), a))
        if bath.n_bar > 0:
            out.append((bath.kappa * bath.n_bar, a.conj().T.copy()))
    return out


def measurement_channels(space: HilbertSpace, scheme: MeasurementScheme):
    """Lindblad channels reproduced on average by the measurement unravelings."""
    if scheme.kind == "none" or scheme.lam == 0:
        return []
    sz, _, sm = space.sigma(1)
    if scheme.kind == "dispersive":
        return [(2.0 * scheme.lam, sz)]
    return [(scheme.lam, sm)]


def _effective(H, channels):
    K = sum((r * L.conj().T @ L for r, L in channels), np.zeros_like(H))
    return H - 0.5j * K


def lindblad_rhs(rho, H, bath: BathParams, space: HilbertSpace, extra=()):
    """d rho/dt = -i[H, rho] + sum_k r_k (L rho L^dag - {L^dag L, rho}/2)."""
    if rho.shape != H.shape or H.shape[0] != space.dim:
        raise ValueError(f"dimension mismatch: rho {rho.shape}, H {H.shape}, space {space.dim}")
    channels = collapse_channels(space, bath) + list(extra)
    Heff = _effective(H, channels)
    out = -1j * (Heff @ rho - rho @ Heff.conj().T)
    for r, L in channels:
        out += r * (L @ rho @ L.conj().T)
    return out


def _liouvillian(Heff, channels):
    # row-major vec: vec(A X B) = kron(A, B.T) vec(X)
    d = Heff.shape[0]
    eye = np.eye(d)
    Lv = -1j * (np.kron(Heff, eye) - np.kron(eye, Heff.conj()))
    for r, L in channels:
        Lv += r * np.kron(L, L.conj())
    return Lv


def _rk4_map(Lv, h):
    X = h * Lv
    P = np.eye(Lv.shape[0], dtype=complex)
    term = np.eye(Lv.shape[0], dtype=complex)
    for k in range(1, 5):
        term = term @ X / k
        P = P + term
    return P


def _trace_row(d):
    return np.eye(d).reshape(-1)


def _restore_trace(P, t):
    # the exact map satisfies t @ P = t; remove rounding error along that constraint
    err = t - t @ P
    return P + np.outer(t, err) / (t @ t)


def _map_power(P, k, t):
    """P**k by repeated squaring, re-imposing trace preservation after each product."""
    result = None
    base = P
    while k:
        if k & 1:
            result = base if result is None else _restore_trace(result @ base, t)
        k >>= 1
        if k:
            base = _restore_trace(base @ base, t)
    return result


def max_stable_dt(params: JCParams, schedule: RampSchedule, bath: BathParams, space, extra=()):
    omega_max = max(abs(schedule.omega_start), abs(schedule.omega_end), params.omega_L)
    scales = [omega_max, params.g * math.sqrt(space.dim), bath.kappa * (bath.n_bar + 1.0), bath.gamma]
    scales += [r for r, _ in extra]
    return 0.05 / max(scales)


def _n_steps(duration, dt):
    n = max(1, math.ceil(duration / dt - 1e-9))
    return n, duration / n


def _sample_stride(n_steps):
    return max(1, n_steps // MAX_SAMPLES)


def tracked_states(params: JCParams, space: HilbertSpace, omega: float) -> np.ndarray:
    """Rows: |2,0>, |1,0>, |e,0>, |g,1> at qubit frequency ``omega``."""
    one, two = dressed_levels(params.with_omega(omega), 0, space)
    return np.array([two.state, one.state, space.basis("e", 0), space.basis("g", 1)])


def _pops_dm(P, rho):
    return np.real(np.einsum("ki,ij,kj->k", P.conj(), rho, P))


def evolve_master(rho0, params: JCParams, schedule: RampSchedule, bath: BathParams, dt: float,
                  space: HilbertSpace, extra=(), track: bool = False) -> MasterRun:
    """Integrate the master equation over one schedule segment with fixed-step RK4.

    ``extra`` holds additional (rate, operator) channels, e.g. the averaged
    measurement dissipators. Work is accumulated as Tr[rho dH] with a
    midpoint estimate of the excited-state population on each step.
    """
    limit = max_stable_dt(params, schedule, bath, space, extra)
    if dt > limit * (1 + 1e-12):
        raise ValueError(f"dt={dt:.4g} exceeds the stability limit {limit:.4g}")
    rho = np.array(rho0, dtype=complex)
    if rho.shape != (space.dim, space.dim):
        raise ValueError(f"rho0 shape {rho.shape} does not match space dim {space.dim}")

    n, h = _n_steps(schedule.duration, dt)
    stride = _sample_stride(n)
    H0, Pe = hamiltonian_parts(params, space)
    channels = collapse_channels(space, bath) + list(extra)
    pe_diag = np.real(np.diag(Pe))
    d = space.dim

    def excited(r):
        return float(np.real(np.diag(r)) @ pe_diag)

    sample_steps = list(range(0, n, stride)) + [n]
    times, states, exc = [], [], []
    tracked = {name: [] for name in TRACKED} if track and space.n_qubits == 1 and space.fock_cutoff >= 1 else {}

    def record(step, r):
        if not np.all(np.isfinite(r)):
            raise FloatingPointError(f"non-finite density matrix at t={step * h:.6g}")
        t = step * h
        times.append(t)
        states.append(r.copy())
        exc.append(excited(r))
        if tracked:
            P = tracked_states(params, space, float(schedule.omega(t)))
            for name, v in zip(TRACKED, _pops_dm(P, r)):
                tracked[name].append(v)

    drift = 0.0
    work = 0.0
    if schedule.is_static:
        Heff = _effective(H0 + schedule.omega_start * Pe, channels)
        t_row = _trace_row(d)
        P1 = _restore_trace(_rk4_map(_liouvillian(Heff, channels), h), t_row)
        Pstride = _map_power(P1, stride, t_row)
        vec = rho.reshape(-1)
        record(0, rho)
        step = 0
        for nxt in sample_steps[1:]:
            M = Pstride if nxt - step == stride else _map_power(P1, nxt - step, t_row)
            vec = M @ vec
            r = vec.reshape(d, d)
            r = 0.5 * (r + r.conj().T)
            vec = r.reshape(-1)
            drift = max(drift, abs(np.trace(r) - 1.0))
            step = nxt
            record(step, r)
    else:
        K = sum((rate * L.conj().T @ L for rate, L in channels), np.zeros_like(H0))
        jumps = [(rate, L, L.conj().T.copy()) for rate, L in channels]
        A0 = H0 - 0.5j * K

        def rhs(t, r):
            Heff = A0 + schedule.omega(t) * Pe
            out = -1j * (Heff @ r - r @ Heff.conj().T)
            for rate, L, Ld in jumps:
                out += rate * (L @ r @ Ld)
            return out

        record(0, rho)
        p_prev = excited(rho)
        for step in range(n):
            t = step * h
            k1 = rhs(t, rho)
            k2 = rhs(t + h / 2, rho + h / 2 * k1)
            k3 = rhs(t + h / 2, rho + h / 2 * k2)
            k4 = rhs(t + h, rho + h * k3)
            rho = rho + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            rho = 0.5 * (rho + rho.conj().T)
            p_next = excited(rho)
            d_omega = float(schedule.omega(t + h) - schedule.omega(t))
            work += 0.5 * (p_prev + p_next) * d_omega
            p_prev = p_next
            drift = max(drift, abs(np.trace(rho) - 1.0))
            if (step + 1) % stride == 0 or step + 1 == n:
                record(step + 1, rho)
    return MasterRun(
        times=np.array(times), states=np.array(states), excited=np.array(exc), work=work,
        max_trace_drift=float(drift), tracked_populations={k: np.array(v) for k, v in tracked.items()},
    )


# ------------------------------------------------------------ trajectories

def work_increment(sigma_z_expect, d_omega):
    """Tr[rho dH] = (<sigma_z> + 1) d_omega / 2; accepts scalars or arrays."""
    sz = np.asarray(sigma_z_expect, dtype=float)
    if np.any(sz < -1 - 1e-8) or np.any(sz > 1 + 1e-8):
        raise ValueError("<sigma_z> outside [-1, 1]")
    out = 0.5 * (sz + 1.0) * d_omega
    return float(out) if out.ndim == 0 else out


def make_rng_streams(master_seed: int, n_trajectories: int) -> list[np.random.Generator]:
    """Stream k is PCG64 seeded from SeedSequence(master_seed, spawn_key=(k,))."""
    if n_trajectories < 1:
        raise ValueError(f"need at least one trajectory, got {n_trajectories}")
    return [rng_stream(master_seed, k) for k in range(n_trajectories)]


def rng_stream(master_seed: int, k: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(k,))))


def _check_sse_step(params, scheme, dt, kind):
    if scheme.kind not in (kind, "none"):
        raise ValueError(f"expected a {kind} or 'none' measurement scheme, got {scheme.kind!r}")
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dt * scheme.lam >= 0.01:
        raise ValueError(f"dt*lambda={dt * scheme.lam:.3g} must be < 0.01")
    if kind == "dispersive" and dt * params.g >= 0.05:
        raise ValueError(f"dt*g={dt * params.g:.3g} must be < 0.05")


def _propagators(H0, Pe, omegas, dt):
    """exp(-i H(omega_k) dt) for each midpoint frequency, transposed for row-vector use."""
    H = H0[None] + omegas[:, None, None] * Pe[None]
    w, V = np.linalg.eigh(H)
    U = (V * np.exp(-1j * w * dt)[:, None, :]) @ V.conj().transpose(0, 2, 1)
    return U.transpose(0, 2, 1).copy()


def run_trajectories(psi0, params: JCParams, space: HilbertSpace, schedule: RampSchedule,
                     scheme: MeasurementScheme, dt: float, streams, seed_indices=None,
                     keep_records: bool = False, kind: str | None = None) -> EnsembleResult:
    """Advance a batch of trajectories through one ramp.

    ``psi0`` has shape (B, dim); ``streams`` holds one Generator per row and
    each row consumes only its own stream, in step order, so a trajectory's
    noise does not depend on its batch-mates.
    """
    psi = np.array(psi0, dtype=complex)
    if psi.ndim == 1:
        psi = psi[None]
    B, d = psi.shape
    if d != space.dim:
        raise ValueError(f"state dim {d} does not match space dim {space.dim}")
    if len(streams) != B:
        raise ValueError(f"{B} states but {len(streams)} rng streams")
    if space.n_qubits != 1:
        raise ValueError("trajectory unravelings are implemented for a single qubit")
    kind = kind or scheme.kind
    if kind == "none":
        kind = "dispersive"
    _check_sse_step(params, scheme, dt, kind)
    seed_indices = list(range(B)) if seed_indices is None else list(seed_indices)

    lam = scheme.lam
    n, h = _n_steps(schedule.duration, dt)
    stride = _sample_stride(n)
    H0, Pe = hamiltonian_parts(params, space)
    sz_diag = np.real(np.diag(space.sigma(1)[0]))
    pe_diag = 0.5 * (sz_diag + 1.0)
    smT = space.sigma(1)[2].T.copy()
    draws = scheme.kind != "none"

    psi /= np.linalg.norm(psi, axis=1, keepdims=True)
    works = np.zeros(B)
    jumps = [[] for _ in range(B)]
    n_samples = 1 + n // stride + (1 if n % stride else 0)
    times = np.empty(n_samples)
    sz_rec = np.empty((n_samples, B))
    pop_rec = np.empty((len(TRACKED), n_samples, B))
    sample = 0

    def record(step, ez):
        nonlocal sample
        t = step * h
        times[sample] = t
        sz_rec[sample] = ez
        P = tracked_states(params, space, float(schedule.omega(t)))
        pop_rec[:, sample, :] = (np.abs(psi @ P.conj().T) ** 2).T
        sample += 1

    prob = np.abs(psi) ** 2
    ez = prob @ sz_diag
    record(0, ez)
    static_U = _propagators(H0, Pe, np.array([schedule.omega_start]), h)[0] if schedule.is_static else None
    sqrt_h = math.sqrt(h)
    for start in range(0, n, NOISE_CHUNK):
        m = min(NOISE_CHUNK, n - start)
        if draws:
            if kind == "dispersive":
                noise = np.stack([s.standard_normal(m) for s in streams], axis=1) * sqrt_h
            else:
                noise = np.stack([s.random(m) for s in streams], axis=1)
        steps = np.arange(start, start + m)
        if static_U is None:
            Us = _propagators(H0, Pe, schedule.omega((steps + 0.5) * h), h)
        d_omegas = schedule.omega((steps + 1) * h) - schedule.omega(steps * h)
        for j in range(m):
            if kind == "dispersive":
                if lam > 0:
                    D = sz_diag[None, :] - ez[:, None]
                    psi = psi * (1.0 - lam * h * D * D + math.sqrt(2.0 * lam) * D * noise[j][:, None])
            elif lam > 0:
                pe = prob @ pe_diag
                fire = (noise[j] < lam * pe * h) & (pe >= JUMP_FLOOR)
                rows = np.flatnonzero(fire)
                jumped = psi[rows] @ smT
                psi = psi * (1.0 + 0.5 * lam * h * (pe[:, None] - pe_diag[None, :]))
                if rows.size:
                    psi[rows] = jumped
                    for r in rows:
                        jumps[r].append((start + j + 1) * h)
            psi = psi @ (static_U if static_U is not None else Us[j])
            norm = np.sqrt(np.einsum("bi,bi->b", psi.real, psi.real) + np.einsum("bi,bi->b", psi.imag, psi.imag))
            if np.any(norm < NORM_FLOOR):
                raise FloatingPointError(f"state norm collapsed below {NORM_FLOOR} at t={(start + j + 1) * h:.6g}")
            psi /= norm[:, None]
            prob = psi.real ** 2 + psi.imag ** 2
            ez_next = prob @ sz_diag
            works += work_increment(np.clip(0.5 * (ez + ez_next), -1.0, 1.0), d_omegas[j])
            ez = ez_next
            k = start + j + 1
            if k % stride == 0 or k == n:
                record(k, ez)

    records = None
    if keep_records:
        records = [
            TrajectoryRecord(
                times=times, sigma_z=sz_rec[:, b].copy(),
                tracked_populations={name: pop_rec[i, :, b].copy() for i, name in enumerate(TRACKED)},
                work=float(works[b]), jump_times=np.array(jumps[b]), seed_index=seed_indices[b],
            )
            for b in range(B)
        ]
    return EnsembleResult(
        times=times,
        mean_populations={name: pop_rec[i].mean(axis=1) for i, name in enumerate(TRACKED)},
        mean_sigma_z=sz_rec.mean(axis=1), works=works,
        jump_counts=np.array([len(j) for j in jumps]), records=records,
    )


def evolve_sse_dispersive(psi0, params: JCParams, schedule: RampSchedule, scheme: MeasurementScheme,
                          dt: float, rng_stream: np.random.Generator, space: HilbertSpace | None = None,
                          seed_index: int = 0) -> TrajectoryRecord:
    """One diffusive trajectory under continuous sigma_z monitoring of strength ``scheme.lam``."""
    space = space or HilbertSpace(1, 3)
    if scheme.kind not in ("dispersive", "none"):
        raise ValueError(f"expected a dispersive scheme, got {scheme.kind!r}")
    res = run_trajectories(psi0, params, space, schedule, scheme, dt, [rng_stream],
                           seed_indices=[seed_index], keep_records=True, kind="dispersive")
    return res.records[0]


def evolve_sse_jump(psi0, params: JCParams, schedule: RampSchedule, scheme: MeasurementScheme,
                    dt: float, rng_stream: np.random.Generator, space: HilbertSpace | None = None,
                    seed_index: int = 0) -> TrajectoryRecord:
    """One absorptive trajectory; jumps apply sigma_- at rate lam * <sigma_+ sigma_->."""
    space = space or HilbertSpace(1, 3)
    if scheme.kind not in ("absorptive", "none"):
        raise ValueError(f"expected an absorptive scheme, got {scheme.kind!r}")
    res = run_trajectories(psi0, params, space, schedule, scheme, dt, [rng_stream],
                           seed_indices=[seed_index], keep_records=True, kind="absorptive")
    return res.records[0]
