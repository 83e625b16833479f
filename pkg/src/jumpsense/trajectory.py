"""Quantum-jump Monte Carlo with lossy detection, dark counts, dead time,
delayed corrections, Zeno readouts and parity syndromes.

Time is discretized into steps of ``dt``.  Within a step the state evolves
under exp(-i H_nh dt); at the end of the step, in this order:

1. corrections that fall due are applied (no jump is drawn in that step);
2. otherwise a jump in channel J happens with probability
   2 gamma dt <J^dag J>, and a photon jump is detected with probability
   1 - alpha unless the detector is dead;
3. dark clicks arrive with probability kappa dt per photon channel;
4. parity syndromes and Zeno readouts are sampled.

Trajectory i draws all its uniforms from its own Philox stream seeded by
(seed, i), a fixed number of slots per step, so results do not depend on
how trajectories are batched or threaded.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import qlin
from .protocols import NoiseModel, SensorCode

DT_BOUND = 0.01
NORM_FLOOR = 1e-12
QUEUE = 4


class TrajectoryError(ArithmeticError):
    """Non-finite or vanishing state during a trajectory step."""


@dataclass(frozen=True, eq=False)
class TrajectoryConfig:
    code: SensorCode
    noise: NoiseModel
    g: float
    duration: float
    dt: float = 1e-3
    n_traj: int = 1000
    seed: int = 0
    record_times: tuple = ()
    jumps_during_delay: bool = False
    delay_dark_counts: bool = True
    refocus_dead_time: bool = False
    readout_phase: float = 0.0
    record_events: bool = False
    batch: int = 2048
    chunk_steps: int = 64

    def __post_init__(self):
        if not (self.dt > 0 and self.duration >= 0):
            raise ValueError("dt must be positive and duration non-negative")
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        rates = [self.code.gamma, abs(self.g), self.noise.dark_rate]
        if self.code.dephasing.kind == "energy_gap":
            rates.append(self.code.dephasing.gap)
        bound = DT_BOUND / max(max(rates), 1e-300)
        if self.dt > bound * (1 + 1e-9):
            raise ValueError(f"dt={self.dt} exceeds the stability bound {bound:.3g}")
        rt = np.asarray(self.record_times, dtype=float)
        if rt.size and (np.any(np.diff(rt) < 0) or rt[0] < 0 or rt[-1] > self.duration + 1e-12):
            raise ValueError("record_times must be sorted and inside [0, duration]")
        for name, val in (("correction_delay", self.noise.correction_delay),
                          ("dead_time", self.noise.dead_time)):
            _multiple(val, self.dt, name)
        if self.code.dephasing.kind == "zeno":
            if _multiple(self.code.dephasing.zeno_interval, self.dt, "zeno_interval") == 0:
                raise ValueError("zeno_interval must be at least dt")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    def record_steps(self) -> np.ndarray:
        if len(self.record_times) == 0:
            return np.arange(self.n_steps + 1)
        return np.rint(np.asarray(self.record_times) / self.dt).astype(int)


def _multiple(value: float, dt: float, name: str) -> int:
    k = int(round(value / dt))
    if abs(k * dt - value) > 1e-9 * max(value, dt):
        raise ValueError(f"{name}={value} must be a multiple of dt={dt}")
    return k


@dataclass
class TrajectoryResult:
    times: np.ndarray
    p_initial: np.ndarray
    stderr: np.ndarray
    n_clicks_mean: np.ndarray
    click_events: list = field(default_factory=list)
    per_trajectory: np.ndarray | None = None

    def rows(self):
        """(time, p, stderr, n_clicks_mean) per record time."""
        return list(zip(self.times, self.p_initial, self.stderr, self.n_clicks_mean))


def readout_probability(psi: np.ndarray, code: SensorCode, phase: float = 0.0) -> float:
    """|<psi_0|psi>|^2 / <psi|psi> with psi_0 = (|O+> + e^{i phase}|O->)/sqrt(2)."""
    psi0 = code.readout_state(phase)
    nn = np.vdot(psi, psi).real
    if nn <= 0:
        raise ValueError("zero-norm state")
    return float(abs(np.vdot(psi0, psi)) ** 2 / nn)


class _Engine:
    """Precomputed operators shared by all trajectories of one config."""

    def __init__(self, cfg: TrajectoryConfig):
        code, noise = cfg.code, cfg.noise
        self.cfg = cfg
        self.u_on = qlin.propagator(code.nonhermitian(cfg.g), cfg.dt)
        self.u_off = (qlin.propagator(code.nonhermitian(cfg.g, signal_on=False), cfg.dt)
                      if cfg.refocus_dead_time else self.u_on)
        self.jumps = [j.op for j in code.jumps]
        self.labels = [j.label for j in code.jumps]
        self.photon = np.array([j.detection == "photon" for j in code.jumps])
        self.photon_idx = np.flatnonzero(self.photon)
        self.corr = np.array([code.corrections[j.label] for j in code.jumps])
        self.syn_proj = [s.projector for s in code.syndromes]
        self.syn_corr = [self.labels.index(s.correction) for s in code.syndromes]
        self.zeno_q = code.wrong_projector() if code.dephasing.kind == "zeno" else None
        self.zeno_every = (_multiple(code.dephasing.zeno_interval, cfg.dt, "zeno_interval")
                           if self.zeno_q is not None else 0)
        self.n_delay = _multiple(noise.correction_delay, cfg.dt, "correction_delay")
        self.n_dead = _multiple(noise.dead_time, cfg.dt, "dead_time")
        self.rate = 2 * code.gamma * cfg.dt
        self.dark_p = noise.dark_rate * cfg.dt
        # slots: jump, channel, detect, one per photon channel for dark, syndrome, zeno
        self.n_slots = 3 + len(self.photon_idx) + 2
        self.psi0 = code.readout_state(cfg.readout_phase)
        self.rec_steps = cfg.record_steps()

    def streams(self, indices):
        return [np.random.Generator(np.random.Philox(
            np.random.SeedSequence(self.cfg.seed, spawn_key=(int(i),)))) for i in indices]

    def run(self, indices) -> tuple[np.ndarray, np.ndarray, list]:
        cfg = self.cfg
        b = len(indices)
        gens = self.streams(indices)
        psi = np.tile(self.psi0, (b, 1))
        due = np.full((b, QUEUE), -1, dtype=np.int64)
        due_ch = np.zeros((b, QUEUE), dtype=np.int64)
        dead_until = np.full(b, -1, dtype=np.int64)
        clicks = np.zeros(b, dtype=np.int64)
        n_rec = len(self.rec_steps)
        p_out = np.empty((b, n_rec))
        c_out = np.empty((b, n_rec))
        events = [[] for _ in range(b)] if cfg.record_events else None
        rec_ptr = 0
        u_all = None

        def record(k):
            nonlocal rec_ptr
            while rec_ptr < n_rec and self.rec_steps[rec_ptr] == k:
                nn = np.sum(np.abs(psi) ** 2, axis=1)
                p_out[:, rec_ptr] = np.abs(psi @ self.psi0.conj()) ** 2 / nn
                c_out[:, rec_ptr] = clicks
                rec_ptr += 1

        record(0)
        for k in range(1, cfg.n_steps + 1):
            j = (k - 1) % cfg.chunk_steps
            if j == 0:
                m = min(cfg.chunk_steps, cfg.n_steps - k + 1)
                u_all = np.stack([gen.random((m, self.n_slots)) for gen in gens], axis=1)
            u = u_all[j]
            t = k * cfg.dt

            # free evolution
            if cfg.refocus_dead_time and self.n_dead > 0:
                dead = dead_until >= k
                psi = np.where(dead[:, None], psi @ self.u_off.T, psi @ self.u_on.T)
            else:
                psi = psi @ self.u_on.T

            # due corrections
            fire = due == k
            corrected = fire.any(axis=1)
            if corrected.any():
                for q in range(QUEUE):
                    for ch in np.unique(due_ch[fire[:, q], q]):
                        sel = fire[:, q] & (due_ch[:, q] == ch)
                        psi[sel] = psi[sel] @ self.corr[ch].T
                        if events is not None:
                            for i in np.flatnonzero(sel):
                                events[i].append((t, self.labels[ch], "correction"))
                due[fire] = -1

            # real jumps
            nn = np.sum(np.abs(psi) ** 2, axis=1)
            if not np.all(np.isfinite(nn)):
                raise TrajectoryError(f"non-finite amplitudes at step {k} (t={t:.6g}); reduce dt")
            if np.any(nn < NORM_FLOOR):
                raise TrajectoryError(f"state norm^2 below {NORM_FLOOR} at step {k} (t={t:.6g})")
            pending = (due >= 0).any(axis=1)
            eligible = ~corrected & (cfg.jumps_during_delay | ~pending)
            probs = np.stack([np.sum(np.abs(psi @ op.T) ** 2, axis=1) for op in self.jumps],
                             axis=1) * (self.rate / nn)[:, None]
            total = probs.sum(axis=1)
            if np.any(total > 1):
                raise TrajectoryError(f"jump probability {total.max():.3g} > 1 at step {k}; reduce dt")
            jumped = eligible & (u[:, 0] < total)
            new_click = np.zeros(b, dtype=bool)
            click_ch = np.zeros(b, dtype=np.int64)
            if jumped.any():
                idx = np.flatnonzero(jumped)
                cum = np.cumsum(probs[idx], axis=1)
                ch = np.minimum(np.sum(cum < (u[idx, 1] * total[idx])[:, None], axis=1),
                                len(self.jumps) - 1)
                for c in np.unique(ch):
                    sel = idx[ch == c]
                    v = psi[sel] @ self.jumps[c].T
                    psi[sel] = v / np.linalg.norm(v, axis=1)[:, None]
                alive = dead_until[idx] < k
                detected = self.photon[ch] & (u[idx, 2] >= self.cfg.noise.loss_alpha) & alive
                new_click[idx[detected]] = True
                click_ch[idx[detected]] = ch[detected]
                if events is not None:
                    for i, c, d in zip(idx, ch, detected):
                        kind = ("parity" if not self.photon[c] else
                                "detected" if d else "lost")
                        events[i].append((t, self.labels[c], kind))
                self._schedule(psi, due, due_ch, idx[detected], ch[detected], k, delayed=True)

            # dark counts
            if self.dark_p > 0:
                for s, c in enumerate(self.photon_idx):
                    dk = (u[:, 3 + s] < self.dark_p) & (dead_until < k) & ~new_click
                    if dk.any():
                        sel = np.flatnonzero(dk)
                        new_click[sel] = True
                        if events is not None:
                            for i in sel:
                                events[i].append((t, self.labels[c], "dark"))
                        self._schedule(psi, due, due_ch, sel, np.full(sel.size, c), k,
                                       delayed=cfg.delay_dark_counts)

            clicks += new_click
            if self.n_dead > 0:
                dead_until[new_click] = k + self.n_dead

            # parity syndromes
            if self.syn_proj:
                nn = np.sum(np.abs(psi) ** 2, axis=1)
                cum = np.zeros(b)
                slot = u[:, 3 + len(self.photon_idx)]
                done = np.zeros(b, dtype=bool)
                for proj, ch in zip(self.syn_proj, self.syn_corr):
                    v = psi @ proj.T
                    pr = np.sum(np.abs(v) ** 2, axis=1) / nn
                    hit = ~done & (slot >= cum) & (slot < cum + pr) & (pr > 1e-14)
                    cum = cum + pr
                    if hit.any():
                        w = v[hit] / np.linalg.norm(v[hit], axis=1)[:, None]
                        psi[hit] = w @ self.corr[ch].T
                        done |= hit
                        if events is not None:
                            for i in np.flatnonzero(hit):
                                events[i].append((t, self.labels[ch], "syndrome"))

            # Zeno readout
            if self.zeno_every and k % self.zeno_every == 0:
                nn = np.sum(np.abs(psi) ** 2, axis=1)
                vq = psi @ self.zeno_q.T
                pq = np.sum(np.abs(vq) ** 2, axis=1) / nn
                hit = u[:, -1] < pq
                psi = np.where(hit[:, None], vq, psi - vq)
                psi = psi / np.linalg.norm(psi, axis=1)[:, None]

            if jumped.any() or corrected.any():
                psi = psi / np.sqrt(np.sum(np.abs(psi) ** 2, axis=1))[:, None]
            record(k)
        return p_out, c_out, events

    def _schedule(self, psi, due, due_ch, rows, chans, k, delayed):
        if rows.size == 0:
            return
        if not delayed or self.n_delay == 0:
            for c in np.unique(chans):
                sel = rows[chans == c]
                psi[sel] = psi[sel] @ self.corr[c].T
            return
        for i, c in zip(rows, chans):
            free = np.flatnonzero(due[i] < 0)
            if free.size == 0:
                raise TrajectoryError(f"more than {QUEUE} corrections pending at step {k}")
            due[i, free[0]] = k + self.n_delay
            due_ch[i, free[0]] = c


def _collect(cfg: TrajectoryConfig, indices, threads: int = 1):
    eng = _Engine(cfg)
    blocks = [indices[i:i + cfg.batch] for i in range(0, len(indices), cfg.batch)]
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(eng.run, blocks))
    else:
        parts = [eng.run(blk) for blk in blocks]
    p = np.concatenate([x[0] for x in parts], axis=0)
    c = np.concatenate([x[1] for x in parts], axis=0)
    events = []
    if cfg.record_events:
        for x in parts:
            events.extend(x[2])
    return eng, p, c, events


def _summarize(cfg, eng, p, c, events, keep) -> TrajectoryResult:
    n = p.shape[0]
    mean = np.sum(p, axis=0) / n
    se = p.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(p.shape[1])
    return TrajectoryResult(
        times=eng.rec_steps * cfg.dt,
        p_initial=mean,
        stderr=se,
        n_clicks_mean=np.sum(c, axis=0) / n,
        click_events=events,
        per_trajectory=p if keep else None,
    )


def run_trajectory(cfg: TrajectoryConfig, traj_index: int) -> TrajectoryResult:
    """Single trajectory ``traj_index``; ``click_events`` holds its
    (time, label, kind) events with kind in detected/lost/dark/parity/
    syndrome/correction."""
    c = replace(cfg, record_events=True)
    eng, p, cl, events = _collect(c, [traj_index])
    return _summarize(c, eng, p, cl, events[0], keep=True)


def ensemble_probability(cfg: TrajectoryConfig, threads: int = 1,
                         keep_trajectories: bool = False) -> TrajectoryResult:
    """Average over trajectories 0..n_traj-1.  With ``record_events`` the
    events are a list per trajectory."""
    eng, p, cl, events = _collect(cfg, list(range(cfg.n_traj)), threads)
    return _summarize(cfg, eng, p, cl, events, keep_trajectories)


def detected_jump_times(events) -> np.ndarray:
    """Times of detected real jumps in one trajectory's event list."""
    return np.array([t for t, _, kind in events if kind == "detected"])


def waiting_times(events) -> np.ndarray:
    """Intervals between consecutive detected clicks."""
    t = detected_jump_times(events)
    return np.diff(t)
