"""Quadrature-jump state preparation in a single pumped cavity mode.

The pair-producing cavity has two monitored outputs: plain loss and the
pair herald, which (after eliminating the fast heralding mode) act on the
stored mode as lowering and raising channels at the same rate.  Interfering
the two outputs on a balanced splitter with a quarter-period offset turns
them into a pair of Hermitian quadrature channels; photodetection on those
ports applies position/momentum quadrature jumps.  Runs of same-port clicks
build coherent-state superpositions, arbitrary click sequences build other
Fock superpositions, and freezing one port (perfect measurement-based
cancellation) leaves quadrature-squeezing dynamics.
"""
from __future__ import annotations

import dataclasses
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import scipy.linalg

from .fock import (DensityMatrix, LayoutError, ModeLayout, ModeOperator,
                   StateVector, cat_state, coherent_state, mode_operators,
                   vacuum_state)
from .trajectory import (Channel, DegenerateStateError, OpenModel,
                         simulate_trajectory, superop_H)

# postselection gate: largest allowed wait between consecutive clicks, in
# units of 1/gamma (the wait before the first click is never gated)
GATE_MAX_GAP = 0.5


class NkfInapplicableError(ValueError):
    """Channel cannot be frozen by no-knowledge feedback."""


@dataclasses.dataclass(frozen=True)
class CssParams:
    """Pump and output rates for the superposition cavity.

    Lambda is the (real) pump amplitude, kappa_h the heralding-output rate.
    The working rate gamma = 4 Lambda^2 / kappa_h is the strength of both
    effective channels; the plain-loss output is balanced to the same rate
    so the interfered ports come out Hermitian.  N is the Fock truncation.
    """

    Lambda: float
    kappa_h: float
    N: int = 24

    def __post_init__(self):
        if self.Lambda == 0:
            raise ValueError("pump amplitude must be nonzero")
        if not self.kappa_h > 0:
            raise ValueError(f"kappa_h must be positive, got {self.kappa_h}")
        if self.N < 4:
            raise ValueError(f"truncation N must be at least 4, got {self.N}")

    @property
    def gamma(self) -> float:
        return 4.0 * self.Lambda ** 2 / self.kappa_h

    @property
    def kappa_e(self) -> float:
        # emission output deliberately matched to the effective pair rate
        return self.gamma

    def layout(self) -> ModeLayout:
        return ModeLayout.single(self.N)


def css_channels(p: CssParams) -> dict[str, ModeOperator]:
    """Monitored channel operators, raw and interfered.

    "loss" and "herald" are the two physical outputs (lowering and raising
    at rate gamma).  "plus" and "minus" are the balanced-splitter ports
    after the quarter-period offset: sqrt(gamma) x and -sqrt(gamma) p.
    Both port operators are Hermitian, which is what makes them freezable.
    """
    ops = mode_operators(p.N)
    r = math.sqrt(p.gamma)
    lay = ops["a"].layout
    return {
        "loss": ModeOperator(lay, r * ops["a"].mat),
        "herald": ModeOperator(lay, r * ops["a_dag"].mat),
        "plus": ModeOperator(lay, r * ops["x"].mat),
        "minus": ModeOperator(lay, -r * ops["p"].mat),
    }


def quadrature_model(p: CssParams, interfered: bool = True) -> OpenModel:
    """Open model of the monitored cavity (no Hamiltonian in the rotating
    frame; all dynamics lives in the channels)."""
    chs = css_channels(p)
    names = ("plus", "minus") if interfered else ("loss", "herald")
    return OpenModel(p.layout(),
                     channels=tuple(Channel(n, chs[n]) for n in names))


def no_jump_generator(channel_ops):
    """Conditional drift between clicks: rho -> -sum_j H[L_j^dag L_j / 2] rho.

    Returns a callable mapping a DensityMatrix (or raw matrix) to d(rho)/dt.
    For the interfered pair this reduces to gamma (2<n> rho - n rho - rho n):
    the superposition drifts toward its smallest occupied Fock level.  With
    only the position port it is the squeezing drift in x^2.
    """
    mats = [op.mat if isinstance(op, ModeOperator) else np.asarray(op)
            for op in channel_ops]
    half_rates = [0.5 * (m.conj().T @ m) for m in mats]

    def gen(rho):
        mat = rho.mat if isinstance(rho, DensityMatrix) else np.asarray(rho)
        out = np.zeros_like(mat)
        for hr in half_rates:
            out -= superop_H(hr, mat)
        return out

    return gen


def no_jump_evolve(state: StateVector, duration: float,
                   channel_ops) -> StateVector:
    """Propagate a pure state through a click-free interval and renormalize."""
    if duration < 0:
        raise ValueError("duration must be non-negative")
    if duration == 0:
        return state
    B = np.zeros((state.layout.dim,) * 2, dtype=np.complex128)
    for op in channel_ops:
        m = op.mat if isinstance(op, ModeOperator) else np.asarray(op)
        B += m.conj().T @ m
    amps = scipy.linalg.expm(-0.5 * duration * B) @ state.amps
    nrm = np.linalg.norm(amps)
    if nrm < 1e-150:
        raise DegenerateStateError("state norm collapsed during no-click drift")
    return StateVector(state.layout, amps / nrm, copy=False)


@dataclasses.dataclass(frozen=True)
class JumpSequence:
    """Ordered quadrature clicks, '+' for the position port, '-' for the
    momentum port.  gaps, when given, holds len(signs)+1 click-free waits
    (units 1/gamma): before the first click, between clicks, and after the
    last; None means all waits are zero."""

    signs: tuple[str, ...]
    gaps: tuple[float, ...] | None = None

    def __post_init__(self):
        for s in self.signs:
            if s not in ("+", "-"):
                raise ValueError(f"sign must be '+' or '-', got {s!r}")
        if self.gaps is not None:
            if len(self.gaps) != len(self.signs) + 1:
                raise ValueError(
                    f"need {len(self.signs) + 1} gaps for {len(self.signs)} "
                    f"clicks, got {len(self.gaps)}")
            if any(g < 0 for g in self.gaps):
                raise ValueError("gaps must be non-negative")

    def to_json(self) -> str:
        return json.dumps({"signs": list(self.signs),
                           "gaps": None if self.gaps is None else list(self.gaps)},
                          sort_keys=True)


def apply_jump_sequence(seq: JumpSequence, p: CssParams) -> StateVector:
    """State prepared from vacuum by a click sequence with optional waits.

    Zero-gap sequences are pure normalized operator products; finite gaps
    interleave the click-free drift (which leaks weight toward low Fock
    levels, usable for rebalancing superposition coefficients).
    """
    chs = css_channels(p)
    port = {"+": chs["plus"], "-": chs["minus"]}
    both = (chs["plus"], chs["minus"])
    gamma = p.gamma
    psi = vacuum_state(p.layout())
    gaps = seq.gaps or (0.0,) * (len(seq.signs) + 1)
    for sign, gap in zip(seq.signs, gaps):
        if gap:
            psi = no_jump_evolve(psi, gap / gamma, both)
        amps = port[sign].mat @ psi.amps
        nrm = np.linalg.norm(amps)
        if nrm < 1e-150:
            raise DegenerateStateError(
                f"click {sign!r} annihilated the state")
        psi = StateVector(psi.layout, amps / nrm, copy=False)
    if gaps[-1]:
        psi = no_jump_evolve(psi, gaps[-1] / gamma, both)
    return psi


def sequence_search(target: StateVector, length: int,
                    p: CssParams) -> tuple[JumpSequence, float]:
    """Best zero-gap click sequence of the given length for a pure target.

    Exhaustive over 2^length sequences via depth-first sharing of prefix
    states; ties go to the lexicographically first sequence ('+' < '-').
    """
    if not 0 <= length <= 16:
        raise ValueError(f"length must be in 0..16, got {length}")
    if target.layout != p.layout():
        raise LayoutError("target layout does not match the cavity truncation")
    chs = css_channels(p)
    ports = (("+", chs["plus"].mat), ("-", chs["minus"].mat))
    bra = target.amps.conj()
    best_f = -1.0
    best_signs: tuple[str, ...] = ()
    signs: list[str] = []

    def walk(psi, depth):
        nonlocal best_f, best_signs
        if depth == length:
            f = abs(bra @ psi)
            if f > best_f:
                best_f = f
                best_signs = tuple(signs)
            return
        for sign, mat in ports:
            phi = mat @ psi
            nrm = np.linalg.norm(phi)
            if nrm < 1e-12:
                continue
            signs.append(sign)
            walk(phi / nrm, depth + 1)
            signs.pop()

    walk(vacuum_state(p.layout()).amps, 0)
    return JumpSequence(best_signs), float(best_f)


def four_component_cat(alpha: complex, dim: int,
                       phases=(1.0, 1.0, 1.0, 1.0)) -> StateVector:
    """Normalized sum of |i^k alpha> with the given component phases."""
    if len(phases) != 4:
        raise ValueError("need exactly four component phases")
    amps = np.zeros(dim, dtype=np.complex128)
    for k, c in enumerate(phases):
        amps += complex(c) * coherent_state(alpha * 1j ** k, dim).amps
    nrm = np.linalg.norm(amps)
    if nrm < 1e-12:
        raise ValueError("component phases cancel the state")
    return StateVector(ModeLayout.single(dim), amps / nrm, copy=False)


# ------------------------------------------------------------- postselection


@dataclasses.dataclass(frozen=True)
class PostselectStats:
    n_target: int
    n_run: int
    survivors: int
    fraction: float
    mean_fidelity: float | None
    fidelity_variance: float | None
    gate: str

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)


def _postselect_worker(args):
    p, n_target, T, dt, master_seed, streams, gate = args
    model = quadrature_model(p)
    psi0 = vacuum_state(p.layout())
    max_gap = GATE_MAX_GAP / p.gamma

    def stop(events):
        return events[-1][1] == "minus" or len(events) >= n_target

    out = []
    for s in streams:
        rec = simulate_trajectory(model, psi0, T, dt, master_seed, stream=s,
                                  jump_stop=stop)
        ok = (len(rec.events) == n_target
              and all(lbl == "plus" for _, lbl in rec.events))
        if ok and gate == "max-gap" and n_target > 1:
            times = [t for t, _ in rec.events]
            ok = all(b - a <= max_gap + 1e-12 for a, b in zip(times, times[1:]))
        out.append((s, rec.final_state() if ok else None))
    return out


def postselect_generate(p: CssParams, n_target: int, n_traj: int,
                        T: float | None = None, gate: str = "none",
                        dt: float | None = None, seed: int = 0,
                        workers: int | None = None
                        ) -> tuple[PostselectStats, list[StateVector]]:
    """Run fresh-vacuum attempts and keep those whose first clicks are a
    clean run of n_target position-port detections.

    A momentum-port click ends the attempt (the restart-with-empty-cavity
    protocol counted per attempt), as does running past T (default
    5/gamma) short of the target.  gate="max-gap" additionally demands
    every wait between consecutive clicks stay below 0.5/gamma — the wait
    before the first click is not gated.  Survivor fidelities are taken
    against the two-component coherent-superposition ansatz with peaks at
    +-sqrt(n).  The same seed gives the same attempt pool for every gate
    setting, so gated statistics filter the ungated ensemble.
    """
    if n_target < 1:
        raise ValueError("n_target must be at least 1")
    if gate not in ("none", "max-gap"):
        raise ValueError(f"unknown gate {gate!r}")
    if p.N < n_target + 4:
        raise ValueError(
            f"truncation N={p.N} unsafe for n_target={n_target} "
            f"(need >= {n_target + 4})")
    if T is None:
        T = 5.0 / p.gamma
    if dt is None:
        # keep the worst-case per-step click probability near 0.04
        dt = 0.04 / (p.gamma * (2.0 * n_target + 1.0))
    streams = list(range(n_traj))
    if workers is None:
        workers = min(os.cpu_count() or 1, n_traj)
    workers = max(1, min(workers, n_traj))
    if workers == 1:
        merged = _postselect_worker((p, n_target, T, dt, seed, streams, gate))
    else:
        chunks = [(p, n_target, T, dt, seed, streams[i::workers], gate)
                  for i in range(workers)]
        merged = []
        with ProcessPoolExecutor(max_workers=workers) as ex:
            for part in ex.map(_postselect_worker, chunks):
                merged.extend(part)
        merged.sort(key=lambda sr: sr[0])
    survivors = [st for _, st in merged if st is not None]
    if survivors:
        ideal = cat_state(math.sqrt(n_target / 2.0), n_target % 2, p.N)
        fids = np.array([abs(np.vdot(ideal.amps, st.amps)) for st in survivors])
        mean_f, var_f = float(fids.mean()), float(fids.var())
    else:
        mean_f = var_f = None
    stats = PostselectStats(n_target=n_target, n_run=n_traj,
                            survivors=len(survivors),
                            fraction=len(survivors) / n_traj,
                            mean_fidelity=mean_f, fidelity_variance=var_f,
                            gate=gate)
    return stats, survivors


# ------------------------------------------------- no-knowledge channel freeze


def nkf_transform(model: OpenModel, label: str) -> OpenModel:
    """Remove a Hermitian channel from the dynamics (perfect, zero-delay
    measurement-based cancellation, applied at generator level).

    Physically the cancelled port is monitored with a quadrature-angle
    measurement that yields no state information while its back-action is
    undone by a proportional drive on the cavity; the drive waveform and
    the measurement record have no numeric role at generator level and are
    not modeled.  The frozen channel is retained (with its position) on
    the returned model so nkf_restore can undo the freeze exactly.
    """
    idx = None
    for i, ch in enumerate(model.channels):
        if ch.label == label:
            idx = i
            break
    if idx is None:
        raise KeyError(f"no channel {label!r}")
    ch = model.channels[idx]
    if not ch.is_static():
        raise NkfInapplicableError(
            f"channel {label!r} is time-dependent; cannot freeze")
    mat = model.channel_matrix(ch)
    scale = np.abs(mat).max()
    if scale == 0 or np.abs(mat - mat.conj().T).max() > 1e-10 * scale:
        raise NkfInapplicableError(
            f"channel {label!r} is not Hermitian; no-knowledge cancellation "
            "needs a Hermitian operator")
    return dataclasses.replace(
        model,
        channels=model.channels[:idx] + model.channels[idx + 1:],
        frozen_channels=model.frozen_channels + ((idx, ch),))


def nkf_restore(model: OpenModel, label: str | None = None) -> OpenModel:
    """Undo the most recent freeze (or the freeze of a named channel),
    reinserting the channel at its original position."""
    if not model.frozen_channels:
        raise ValueError("model has no frozen channels")
    pick = len(model.frozen_channels) - 1
    if label is not None:
        pick = None
        for i, (_, ch) in enumerate(model.frozen_channels):
            if ch.label == label:
                pick = i
        if pick is None:
            raise KeyError(f"no frozen channel {label!r}")
    idx, ch = model.frozen_channels[pick]
    chans = list(model.channels)
    chans.insert(min(idx, len(chans)), ch)
    frozen = model.frozen_channels[:pick] + model.frozen_channels[pick + 1:]
    return dataclasses.replace(model, channels=tuple(chans),
                               frozen_channels=frozen)


def squeezing_metric(state) -> tuple[float, float, float]:
    """(Var x, Var p, smaller variance over the vacuum value 1/2)."""
    lay = state.layout
    if len(lay.modes) != 1:
        raise LayoutError("squeezing metric needs a single-mode state")
    ops = mode_operators(lay.dim, lay.modes[0][0])
    x, pm = ops["x"].mat, ops["p"].mat
    if isinstance(state, StateVector):
        v = state.amps
        ex = float(np.real(np.vdot(v, x @ v)))
        ex2 = float(np.real(np.vdot(v, x @ (x @ v))))
        ep = float(np.real(np.vdot(v, pm @ v)))
        ep2 = float(np.real(np.vdot(v, pm @ (pm @ v))))
    else:
        m = state.mat
        ex = float(np.real(np.trace(x @ m)))
        ex2 = float(np.real(np.trace(x @ x @ m)))
        ep = float(np.real(np.trace(pm @ m)))
        ep2 = float(np.real(np.trace(pm @ pm @ m)))
    var_x = ex2 - ex * ex
    var_p = ep2 - ep * ep
    return var_x, var_p, min(var_x, var_p) / 0.5


def nkf_variance_series(p: CssParams, T: float, dt: float, seed: int,
                        stream: int = 0, snap_dt: float = 0.02,
                        tail_tol: float | None = None):
    """Quadrature variances along one trajectory with the momentum port
    frozen: only position clicks occur, and the click-free drift squeezes.

    Returns (times, var_x, var_p) sampled every snap_dt.  tail_tol None
    skips the truncation guard (the caller sizes N; position clicks climb
    the ladder, so generous truncations are needed at long horizons).
    """
    model = nkf_transform(quadrature_model(p), "minus")
    snaps = np.arange(0.0, T + 0.5 * snap_dt, snap_dt)
    rec = simulate_trajectory(model, vacuum_state(p.layout()), T, dt, seed,
                              stream=stream, snapshot_times=snaps,
                              tail_tol=tail_tol)
    times = np.array([t for t, _ in rec.snapshots])
    vx = np.empty(times.size)
    vp = np.empty(times.size)
    for i, (_, st) in enumerate(rec.snapshots):
        vx[i], vp[i], _ = squeezing_metric(st)
    return times, vx, vp


def _nkf_worker(args):
    p, T, dt, master_seed, streams, snap_dt, tail_tol = args
    out = []
    for s in streams:
        _, vx, vp = nkf_variance_series(p, T, dt, master_seed, stream=s,
                                        snap_dt=snap_dt, tail_tol=tail_tol)
        out.append((s, float(min(vx.min(), vp.min()))))
    return out


def nkf_squeeze_stats(p: CssParams, T: float, dt: float, n_traj: int,
                      master_seed: int = 0, snap_dt: float = 0.02,
                      workers: int | None = None,
                      tail_tol: float | None = None) -> list[tuple[int, float]]:
    """Per-stream minimum quadrature variance reached by time T under the
    frozen-momentum dynamics; [(stream, min over time of min(Vx, Vp))]."""
    streams = list(range(n_traj))
    if workers is None:
        workers = min(os.cpu_count() or 1, n_traj)
    workers = max(1, min(workers, n_traj))
    if workers == 1:
        return _nkf_worker((p, T, dt, master_seed, streams, snap_dt, tail_tol))
    chunks = [(p, T, dt, master_seed, streams[i::workers], snap_dt, tail_tol)
              for i in range(workers)]
    merged: list[tuple[int, float]] = []
    with ProcessPoolExecutor(max_workers=workers) as ex:
        for part in ex.map(_nkf_worker, chunks):
            merged.extend(part)
    merged.sort(key=lambda sr: sr[0])
    return merged
