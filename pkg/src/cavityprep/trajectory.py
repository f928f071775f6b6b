"""Open-system evolution: master-equation integration and photodetection
unraveling.

Models are a Hamiltonian (a sum of scalar- or schedule-weighted Hermitian
terms) plus labeled decay channels L_j = amp_j * op_j.  The density-matrix
path integrates the standard generator

    drho/dt = -i[H, rho] + sum_j ( L_j rho L_j^dag - {L_j^dag L_j, rho}/2 )

with fixed-step RK4 on the vectorized form, doubling the step count until
two successive refinements agree.  The trajectory path unravels the same
generator into photodetection records: one Bernoulli draw per step with
click probability <L^dag L> dt, non-Hermitian drift in between, and
per-trajectory random streams from a counter-based generator keyed by
(master seed, trajectory stream), so ensembles are reproducible for any
worker count.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .fock import (DensityMatrix, LayoutError, ModeLayout, ModeOperator,
                   StateVector, TAIL_GUARD, TruncationError, mode_operators)
from .schedule import Schedule


class StepSizeError(RuntimeError):
    """dt too coarse to resolve the click probability in a step."""


class ZeroProbabilityJumpError(RuntimeError):
    """Jump map applied where the click probability vanishes."""


class DegenerateStateError(RuntimeError):
    """State norm collapsed below numerical resolution."""


class IntegrationError(RuntimeError):
    """Master-equation integration failed its accuracy contract."""


MAX_JUMP_PROB = 0.05  # per-step click probability bound, max <L^dag L> dt


@dataclass(frozen=True)
class HamiltonianTerm:
    op: ModeOperator
    coeff: float | Schedule = 1.0


@dataclass(frozen=True)
class Channel:
    label: str
    op: ModeOperator
    amp: float | complex | Schedule = 1.0

    def is_static(self) -> bool:
        return not isinstance(self.amp, Schedule)


@dataclass(frozen=True)
class OpenModel:
    layout: ModeLayout
    hamiltonian: tuple[HamiltonianTerm, ...] = ()
    channels: tuple[Channel, ...] = ()
    # channels removed by a no-knowledge freeze, kept with their original
    # position so the freeze can be undone exactly
    frozen_channels: tuple[tuple[int, Channel], ...] = ()

    def __post_init__(self):
        for term in self.hamiltonian:
            if term.op.layout != self.layout:
                raise LayoutError("hamiltonian term layout mismatch")
        for ch in self.channels:
            if ch.op.layout != self.layout:
                raise LayoutError(f"channel {ch.label!r} layout mismatch")
        labels = [ch.label for ch in self.channels]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate channel labels {labels}")

    def is_static(self) -> bool:
        return all(not isinstance(t.coeff, Schedule) for t in self.hamiltonian) \
            and all(ch.is_static() for ch in self.channels)

    def channel(self, label: str) -> Channel:
        for ch in self.channels:
            if ch.label == label:
                return ch
        raise KeyError(f"no channel {label!r}")

    def hamiltonian_matrix(self, t: float = 0.0) -> np.ndarray:
        h = np.zeros((self.layout.dim, self.layout.dim), dtype=np.complex128)
        for term in self.hamiltonian:
            c = term.coeff.at(t) if isinstance(term.coeff, Schedule) else term.coeff
            h += float(np.real(c)) * term.op.mat
        return h

    def channel_matrix(self, ch: Channel, t: float = 0.0) -> np.ndarray:
        amp = ch.amp.at(t) if isinstance(ch.amp, Schedule) else ch.amp
        return complex(amp) * ch.op.mat


def _as_matrix(r) -> np.ndarray:
    return r.mat if isinstance(r, ModeOperator) else np.asarray(r, dtype=complex)


def _as_rho(rho) -> np.ndarray:
    return rho.mat if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def lindblad_derivative(model: OpenModel, rho, t: float = 0.0) -> DensityMatrix:
    """Right-hand side of the master equation at time t (a matrix rate)."""
    r = _as_rho(rho)
    h = model.hamiltonian_matrix(t)
    out = -1j * (h @ r - r @ h)
    for ch in model.channels:
        L = model.channel_matrix(ch, t)
        Ld = L.conj().T
        LdL = Ld @ L
        out += L @ r @ Ld - 0.5 * (LdL @ r + r @ LdL)
    return DensityMatrix(model.layout, out, copy=False)


def superop_H(r, rho) -> np.ndarray:
    """Nonlinear drift superoperator: r rho + rho r^dag - Tr{.} rho."""
    r = _as_matrix(r)
    p = _as_rho(rho)
    lin = r @ p + p @ r.conj().T
    return lin - np.trace(lin) * p


def superop_G(r, rho) -> np.ndarray:
    """Normalized jump superoperator: r rho r^dag / Tr{.} - rho."""
    r = _as_matrix(r)
    p = _as_rho(rho)
    num = r @ p @ r.conj().T
    tr = np.real(np.trace(num))
    if tr <= 1e-14:
        raise ZeroProbabilityJumpError(
            f"click probability {tr:.3e} vanishes for this state")
    return num / tr - p


def apply_jump(r, rho) -> np.ndarray:
    """Post-click state r rho r^dag / Tr{.} (the rho + G[r] rho of a click)."""
    return _as_rho(rho) + superop_G(r, rho)


# -- vectorized generator -----------------------------------------------------

def _dissipator_super(op: np.ndarray) -> sp.csr_matrix:
    """Vectorized D[op] for row-major flattening of rho."""
    d = op.shape[0]
    s = sp.csr_matrix(op)
    sd = sp.csr_matrix(op.conj().T)
    eye = sp.identity(d, format="csr", dtype=complex)
    sandwich = sp.kron(s, s.conj(), format="csr")
    sds = (sd @ s).tocsr()
    anti = sp.kron(sds, eye, format="csr") + sp.kron(eye, sds.T, format="csr")
    return (sandwich - 0.5 * anti).tocsr()


def _commutator_super(h: np.ndarray) -> sp.csr_matrix:
    d = h.shape[0]
    s = sp.csr_matrix(h)
    eye = sp.identity(d, format="csr", dtype=complex)
    return (-1j * (sp.kron(s, eye, format="csr")
                   - sp.kron(eye, s.T, format="csr"))).tocsr()


def _build_liouvillian(model: OpenModel):
    """Split the generator into a static part and schedule-weighted parts.

    Returns (static_csr, [(coeff_fn, part_csr), ...]) where each coeff_fn
    maps a time to the real weight of its part.
    """
    d = model.layout.dim
    static = sp.csr_matrix((d * d, d * d), dtype=complex)
    parts = []
    for term in model.hamiltonian:
        mat = _commutator_super(term.op.mat)
        if isinstance(term.coeff, Schedule):
            sched = term.coeff
            parts.append((lambda t, s=sched: float(np.real(s.at(t))), mat))
        else:
            static = static + float(np.real(term.coeff)) * mat
    for ch in model.channels:
        mat = _dissipator_super(ch.op.mat)
        if isinstance(ch.amp, Schedule):
            sched = ch.amp
            parts.append((lambda t, s=sched: float(abs(s.at(t)) ** 2), mat))
        else:
            static = static + abs(ch.amp) ** 2 * mat
    return static.tocsr(), parts


def _rate_scale(model: OpenModel) -> float:
    """Crude spectral-radius bound used to pick a starting step."""
    scale = 0.0
    for term in model.hamiltonian:
        c = term.coeff
        cmax = float(np.max(np.abs(c.values))) if isinstance(c, Schedule) \
            else abs(float(np.real(c)))
        scale += 2.0 * cmax * float(np.abs(term.op.mat).sum(axis=1).max())
    for ch in model.channels:
        a = ch.amp
        amax = float(np.max(np.abs(a.values))) if isinstance(a, Schedule) else abs(a)
        m = np.abs(ch.op.mat)
        scale += 2.0 * amax ** 2 * float((m.T @ m).sum(axis=1).max())
    return max(scale, 1e-12)


def _check_tail(rho_mat: np.ndarray, layout: ModeLayout, t: float,
                tol: float):
    diag = np.real(np.diagonal(rho_mat)).reshape(layout.dims)
    nmodes = len(layout.dims)
    for ax, (label, _) in enumerate(layout.modes):
        other = tuple(i for i in range(nmodes) if i != ax)
        pops = diag.sum(axis=other) if other else diag
        if float(pops[-2:].sum()) >= tol:
            raise TruncationError(
                f"mode {label!r} tail population {float(pops[-2:].sum()):.2e} "
                f"breached the truncation guard at t = {t:.6g}")


def _integrate_grid(static, parts, layout, v0, t_grid, n_sub, tail_tol):
    """RK4 over the grid with n_sub substeps per interval.

    Schedule weights are frozen at each substep midpoint, which keeps the
    advertised piecewise-constant sampling while retaining second-order
    accuracy for time-dependent terms.
    """
    v = v0.copy()
    out = [v.copy()]
    for a, b in zip(t_grid[:-1], t_grid[1:]):
        h = (b - a) / n_sub
        for k in range(n_sub):
            t_mid = a + (k + 0.5) * h
            if parts:
                A = static
                for fn, mat in parts:
                    A = A + fn(t_mid) * mat
            else:
                A = static
            k1 = A @ v
            k2 = A @ (v + 0.5 * h * k1)
            k3 = A @ (v + 0.5 * h * k2)
            k4 = A @ (v + h * k3)
            v = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if tail_tol is not None:
            _check_tail(v.reshape(layout.dim, layout.dim), layout, b, tail_tol)
        out.append(v.copy())
    return out


def evolve_master(model: OpenModel, rho0, t_grid, dt0: float | None = None,
                  refine_tol: float = 1e-8, trace_tol: float = 1e-7,
                  tail_tol: float | None = TAIL_GUARD,
                  max_refine: int = 12) -> list[DensityMatrix]:
    """Integrate the master equation, returning the state at each grid time.

    The step is halved (substeps per grid interval doubled) until two
    successive refinements differ by less than refine_tol in max-entry
    norm at every grid point.  Trace drift beyond trace_tol raises; a
    breach of the Fock-tail guard aborts with the offending time.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 2 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing with >= 2 points")
    rho = _as_rho(rho0)
    static, parts = _build_liouvillian(model)
    v0 = rho.reshape(-1).astype(complex)

    if dt0 is None:
        dt0 = 1.5 / _rate_scale(model)
    span = float(np.max(np.diff(t_grid)))
    n_sub = max(1, int(math.ceil(span / dt0)))

    prev = _integrate_grid(static, parts, model.layout, v0, t_grid, n_sub,
                           tail_tol)
    for _ in range(max_refine):
        n_sub *= 2
        cur = _integrate_grid(static, parts, model.layout, v0, t_grid, n_sub,
                              tail_tol)
        diff = max(float(np.abs(c - p).max()) for c, p in zip(cur, prev))
        prev = cur
        if diff < refine_tol:
            break
    else:
        raise IntegrationError(
            f"step refinement stalled above {refine_tol:g} "
            f"(last change {diff:.3e})")

    tr0 = float(np.real(v0.reshape(rho.shape).trace()))
    drift = max(abs(float(np.real(v.reshape(rho.shape).trace())) - tr0)
                for v in prev)
    if drift > trace_tol:
        raise IntegrationError(f"trace drifted by {drift:.3e} > {trace_tol:g}")
    d = model.layout.dim
    return [DensityMatrix(model.layout, v.reshape(d, d), copy=False)
            for v in prev]


def evolve_master_piecewise(model: OpenModel, rho0, t_grid,
                            tail_tol: float | None = TAIL_GUARD,
                            trace_tol: float = 1e-7) -> list[DensityMatrix]:
    """Integrate with one exact matrix exponential per grid interval.

    Schedule coefficients are piecewise constant, so freezing them at the
    interval midpoint makes the generator constant over each interval; the
    dense exponential of the superoperator then propagates it with no
    step-size limit.  Scaling-and-squaring makes the cost logarithmic in
    the coefficient magnitude, so arbitrarily stiff detuning schedules are
    safe as long as the layout is small (cost grows as dim^6).  Exponentials
    are cached per coefficient set, which collapses constant stretches of a
    schedule to a single factorization.  evolve_master's RK4 refinement
    remains the generic fallback and the two must agree wherever both apply.
    """
    import scipy.linalg
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 2 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing with >= 2 points")
    static, parts = _build_liouvillian(model)
    d = model.layout.dim
    v = _as_rho(rho0).reshape(-1).astype(complex)
    tr0 = float(np.real(v.reshape(d, d).trace()))
    out = [DensityMatrix(model.layout, v.reshape(d, d).copy())]
    cache: dict = {}
    for a, b in zip(t_grid[:-1], t_grid[1:]):
        h = b - a
        key = tuple(fn(a + 0.5 * h) for fn, _ in parts) + (h,)
        U = cache.get(key)
        if U is None:
            A = static * h
            for c, (_, mat) in zip(key[:-1], parts):
                A = A + (c * h) * mat
            U = scipy.linalg.expm(A.toarray())
            if len(cache) >= 64:  # distinct-per-interval schedules get no reuse
                cache.clear()
            cache[key] = U
        v = U @ v
        if tail_tol is not None:
            _check_tail(v.reshape(d, d), model.layout, b, tail_tol)
        tr = float(np.real(v.reshape(d, d).trace()))
        if abs(tr - tr0) > trace_tol:
            raise IntegrationError(
                f"trace drifted by {abs(tr - tr0):.3e} at t = {b:.6g}")
        out.append(DensityMatrix(model.layout, v.reshape(d, d).copy()))
    return out


def evolve_until(model: OpenModel, rho0, observable: ModeOperator,
                 threshold: float, dt: float, t_max: float,
                 tail_tol: float | None = TAIL_GUARD):
    """Step the master equation until <observable> crosses threshold.

    Returns (t_cross, rho_at_stop); t_cross is linearly interpolated
    between steps and None if the horizon is reached first.  Used for
    first-passage scans where integrating a full grid would waste most of
    the work.
    """
    static, parts = _build_liouvillian(model)
    d = model.layout.dim
    v = _as_rho(rho0).reshape(-1).astype(complex)
    obs = observable.mat
    n_steps = int(math.ceil(t_max / dt))
    prev_val = float(np.real(np.trace(obs @ v.reshape(d, d))))
    if prev_val >= threshold:
        return 0.0, DensityMatrix(model.layout, v.reshape(d, d))
    t = 0.0
    for k in range(n_steps):
        t_mid = t + 0.5 * dt
        A = static
        for fn, mat in parts:
            A = A + fn(t_mid) * mat
        k1 = A @ v
        k2 = A @ (v + 0.5 * dt * k1)
        k3 = A @ (v + 0.5 * dt * k2)
        k4 = A @ (v + dt * k3)
        v = v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = (k + 1) * dt
        val = float(np.real(np.trace(obs @ v.reshape(d, d))))
        if tail_tol is not None and k % 16 == 0:
            _check_tail(v.reshape(d, d), model.layout, t, tail_tol)
        if val >= threshold:
            frac = (threshold - prev_val) / max(val - prev_val, 1e-300)
            return t - dt + frac * dt, DensityMatrix(model.layout,
                                                     v.reshape(d, d))
        prev_val = val
    return None, DensityMatrix(model.layout, v.reshape(d, d))


# -- trajectories -------------------------------------------------------------

@dataclass
class TrajectoryRecord:
    seed: int
    stream: int
    events: list[tuple[float, str]]
    snapshots: list[tuple[float, StateVector]]
    survival: bool | None = None

    def jump_times(self) -> np.ndarray:
        return np.array([t for t, _ in self.events])

    def final_state(self) -> StateVector:
        return self.snapshots[-1][1]

    def to_json(self) -> str:
        doc = {
            "seed": self.seed,
            "stream": self.stream,
            "events": [{"t": t, "channel": c} for t, c in self.events],
            "snapshots": [
                {"t": t,
                 "amps": [[float(z.real), float(z.imag)] for z in s.amps]}
                for t, s in self.snapshots
            ],
            "survival": self.survival,
        }
        return json.dumps(doc, sort_keys=True)

    @staticmethod
    def from_json(text: str, layout: ModeLayout) -> "TrajectoryRecord":
        doc = json.loads(text)
        snaps = []
        for item in doc["snapshots"]:
            amps = np.array([complex(re, im) for re, im in item["amps"]])
            snaps.append((float(item["t"]), StateVector(layout, amps)))
        return TrajectoryRecord(
            seed=int(doc["seed"]), stream=int(doc["stream"]),
            events=[(float(e["t"]), str(e["channel"])) for e in doc["events"]],
            snapshots=snaps, survival=doc.get("survival"))


def _philox(seed: int, stream: int) -> np.random.Generator:
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
                    np.uint64(stream & 0xFFFFFFFFFFFFFFFF)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class _UniformBuffer:
    """Blocked draws from one stream; order identical to scalar draws."""

    def __init__(self, rng, block: int = 4096):
        self._rng = rng
        self._block = block
        self._buf = rng.random(block)
        self._i = 0

    def next(self) -> float:
        if self._i == self._block:
            self._buf = self._rng.random(self._block)
            self._i = 0
        u = self._buf[self._i]
        self._i += 1
        return float(u)


def _state_tail_weight(psi: np.ndarray, layout: ModeLayout) -> float:
    pops = np.abs(psi) ** 2
    if len(layout.dims) == 1:
        return float(pops[-2:].sum())
    grid = pops.reshape(layout.dims)
    worst = 0.0
    nmodes = len(layout.dims)
    for ax in range(nmodes):
        other = tuple(i for i in range(nmodes) if i != ax)
        marg = grid.sum(axis=other)
        worst = max(worst, float(marg[-2:].sum()))
    return worst


def simulate_trajectory(model: OpenModel, psi0: StateVector, t_final: float,
                        dt: float, seed: int, stream: int = 0,
                        snapshot_times=None, jump_stop=None,
                        tail_tol: float | None = TAIL_GUARD
                        ) -> TrajectoryRecord:
    """Unravel one photodetection trajectory.

    One uniform is drawn per step; a click on channel j replaces the step
    with the normalized application of L_j, otherwise the non-Hermitian
    drift exp[(-iH - K/2) dt] acts and the state is renormalized
    (K = sum L^dag L).  Click times are recorded at the end of the step in
    which the draw fired.  jump_stop, if given, sees the event list after
    every click and ends the trajectory early by returning True.  The
    record is a deterministic function of (model, psi0, T, dt, seed,
    stream).
    """
    if psi0.layout != model.layout:
        raise LayoutError("initial state layout does not match the model")
    if dt <= 0 or t_final <= 0:
        raise ValueError("dt and t_final must be positive")
    n_steps = int(round(t_final / dt))
    if abs(n_steps * dt - t_final) > 1e-9 * t_final or n_steps < 1:
        n_steps = int(math.ceil(t_final / dt))

    static = model.is_static()
    labels = [ch.label for ch in model.channels]
    if static:
        Ls = [model.channel_matrix(ch) for ch in model.channels]
        Ms = [L.conj().T @ L for L in Ls]
        K = sum(Ms, np.zeros((model.layout.dim,) * 2, dtype=complex))
        gen = -1j * model.hamiltonian_matrix() - 0.5 * K
        U = scipy.linalg.expm(gen * dt)

    snap_steps: dict[int, float] = {}
    if snapshot_times is not None:
        for ts in np.atleast_1d(np.asarray(snapshot_times, dtype=float)):
            snap_steps[int(round(ts / dt))] = float(ts)

    rng = _UniformBuffer(_philox(seed, stream))
    psi = psi0.amps.copy()
    events: list[tuple[float, str]] = []
    snapshots: list[tuple[float, StateVector]] = []
    if 0 in snap_steps:
        snapshots.append((0.0, StateVector(model.layout, psi)))

    t = 0.0
    stopped = False
    for k in range(n_steps):
        if not static:
            t_mid = t + 0.5 * dt
            Ls = [model.channel_matrix(ch, t_mid) for ch in model.channels]
            Ms = [L.conj().T @ L for L in Ls]
            K = sum(Ms, np.zeros((model.layout.dim,) * 2, dtype=complex))
            gen = -1j * model.hamiltonian_matrix(t_mid) - 0.5 * K
            U = scipy.linalg.expm(gen * dt)

        rates = [float(np.real(np.vdot(psi, M @ psi))) for M in Ms]
        worst = max(rates, default=0.0) * dt
        if worst >= MAX_JUMP_PROB:
            raise StepSizeError(
                f"<L^dag L> dt = {worst:.3f} >= {MAX_JUMP_PROB} at t = {t:.6g}; "
                "reduce dt")
        u = rng.next()
        p_tot = sum(rates) * dt
        t = (k + 1) * dt
        if u < p_tot:
            # a click: pick the channel by cumulative probability
            acc = 0.0
            j = len(rates) - 1
            for idx, r in enumerate(rates):
                acc += r * dt
                if u < acc:
                    j = idx
                    break
            psi = Ls[j] @ psi
            nrm = np.linalg.norm(psi)
            if nrm < 1e-150:
                raise DegenerateStateError(
                    f"state norm collapsed after click on {labels[j]!r}")
            psi = psi / nrm
            events.append((t, labels[j]))
            if jump_stop is not None and jump_stop(events):
                stopped = True
        else:
            psi = U @ psi
            nrm = np.linalg.norm(psi)
            if nrm < 1e-150:
                raise DegenerateStateError("state norm collapsed during drift")
            psi = psi / nrm
        if tail_tol is not None and _state_tail_weight(psi, model.layout) >= tail_tol:
            raise TruncationError(
                f"trajectory tail weight breached the truncation guard "
                f"at t = {t:.6g} (seed {seed}, stream {stream})")
        if k + 1 in snap_steps and not stopped:
            snapshots.append((snap_steps[k + 1], StateVector(model.layout, psi)))
        if stopped:
            break

    if not snapshots or snapshots[-1][0] != t:
        snapshots.append((t, StateVector(model.layout, psi)))
    return TrajectoryRecord(seed=seed, stream=stream, events=events,
                            snapshots=snapshots)


@dataclass
class EnsembleSummary:
    times: np.ndarray
    means: dict[str, np.ndarray]
    sems: dict[str, np.ndarray]
    n_traj: int

    def write_csv(self, fh, time_unit: str = "1/gamma"):
        names = sorted(self.means)
        fh.write(",".join([f"t[{time_unit}]"]
                          + [f"mean_{n}" for n in names]
                          + [f"sem_{n}" for n in names]) + "\n")
        for i, t in enumerate(self.times):
            row = [repr(float(t))]
            row += [repr(float(self.means[n][i])) for n in names]
            row += [repr(float(self.sems[n][i])) for n in names]
            fh.write(",".join(row) + "\n")

    def to_csv(self, path, time_unit: str = "1/gamma"):
        with open(path, "w") as fh:
            self.write_csv(fh, time_unit)


def _default_observables(layout: ModeLayout) -> dict[str, ModeOperator]:
    from .fock import embed
    obs = {}
    for label, d in layout.modes:
        n_op = mode_operators(d, label)["n"]
        obs[f"n_{label}"] = embed(n_op, layout, label) \
            if len(layout.modes) > 1 else ModeOperator(layout, n_op.mat)
    return obs


def _expectations(record: TrajectoryRecord, obs_mats) -> np.ndarray:
    out = np.empty((len(obs_mats), len(record.snapshots)))
    for i, (_, state) in enumerate(record.snapshots):
        for j, m in enumerate(obs_mats):
            out[j, i] = float(np.real(np.vdot(state.amps, m @ state.amps)))
    return out


def _worker_run(args):
    model, psi0, t_final, dt, seed, streams, snap_times, obs_mats, tail = args
    out = {}
    for s in streams:
        rec = simulate_trajectory(model, psi0, t_final, dt, seed, stream=s,
                                  snapshot_times=snap_times, tail_tol=tail)
        out[s] = _expectations(rec, obs_mats)
    return out


def ensemble_run(model: OpenModel, psi0: StateVector, t_final: float,
                 dt: float, seeds, master_seed: int = 0,
                 observables: dict[str, ModeOperator] | None = None,
                 snapshot_dt: float | None = None,
                 workers: int | None = None,
                 tail_tol: float | None = TAIL_GUARD) -> EnsembleSummary:
    """Run trajectories for every stream index in ``seeds`` and average.

    Statistics are accumulated in the order of ``seeds`` after all workers
    finish, so the summary is bit-identical for any worker count.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("seeds must be non-empty")
    if observables is None:
        observables = _default_observables(model.layout)
    names = sorted(observables)
    obs_mats = [observables[n].mat for n in names]
    if snapshot_dt is None:
        snapshot_dt = t_final / 100.0
    snap_times = np.round(np.arange(0.0, t_final + 0.5 * dt, snapshot_dt)
                          / dt) * dt
    snap_times = np.unique(snap_times[snap_times <= t_final + 1e-12])

    if workers is None:
        workers = 1
    results: dict[int, np.ndarray] = {}
    if workers > 1 and len(seeds) > 1:
        chunks = [seeds[i::workers] for i in range(workers)]
        chunks = [c for c in chunks if c]
        with ProcessPoolExecutor(max_workers=len(chunks)) as ex:
            for part in ex.map(_worker_run,
                               [(model, psi0, t_final, dt, master_seed, c,
                                 snap_times, obs_mats, tail_tol)
                                for c in chunks]):
                results.update(part)
    else:
        results = _worker_run((model, psi0, t_final, dt, master_seed, seeds,
                               snap_times, obs_mats, tail_tol))

    n = len(seeds)
    total = np.zeros((len(names), snap_times.size))
    total_sq = np.zeros_like(total)
    for s in seeds:  # fixed merge order
        vals = results[s]
        total += vals
        total_sq += vals * vals
    mean = total / n
    if n > 1:
        var = (total_sq - n * mean * mean) / (n - 1)
        sem = np.sqrt(np.maximum(var, 0.0) / n)
    else:
        sem = np.zeros_like(mean)
    return EnsembleSummary(
        times=snap_times,
        means={nm: mean[i] for i, nm in enumerate(names)},
        sems={nm: sem[i] for i, nm in enumerate(names)},
        n_traj=n)
