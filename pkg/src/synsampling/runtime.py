"""Lockstep multi-core emulation of the closed-loop network.

Each emulated core owns a ``CoreImage`` (rows for all 200 inputs and all hidden
neurons), its local neurons and its own KISS stream.  One step runs, per core:

1. decay PSP traces and deliver the spikes emitted in the previous step
   (ascending source key, binary search in the master population table);
2. read the global reward computed by the master core's environment;
3. update local neurons (one uniform each);
4. update every plastic synapse (one uniform each, plus one draw per
   reallocation) and refresh its weight;
5. emit spikes for delivery at the next step.

The environment only depends on spike counts from earlier steps, so it is
evaluated before the per-core work of the same step.  Cores exchange data only
at step boundaries; the ``parallel`` schedule runs the per-core part under
``prange`` and yields the same numbers as ``sequential``.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from numba import njit, prange

from . import costmodel
from .accel import (DEFAULT_SEED, EXP_MEMO, KissState, kiss_next_arr, kiss_state_array,
                    kiss_uniform, kiss_uniform_arr, seed_scramble)
from .memmodel import (DEFAULT_RESERVE, DTCM_BYTES, CoreConnectivity, CoreImage, SynapseRow,
                       UnknownKeyError, build_core_image)
from .neuron import NeuronConfig, neuron_update
from .plasticity import (REALLOC, WALK, PlasticityConfig, draw_slot, noise_from_word, post_factor,
                         prior_update, reward_gain, storage_bits, synapse_update,
                         weight_from_theta)
from .task import (PatternSet, TaskConfig, gaussian_kernel, metrics_filter, normalize_reward,
                   population_rates, reward_value)

SEQUENTIAL, PARALLEL = "sequential", "parallel"
ENV_ENTROPY = 0x454E5631
CHUNK_STEPS = 10_000


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    n_cores: int = 4
    neurons_per_core: int = 5
    n_inputs: int = 200
    synapses_per_pair: int = 3
    dt: float = 1.0                      # ms
    duration: float = 1200.0             # s
    accel: bool = True
    dram: bool = False
    rewiring: str = REALLOC
    seed: int = 0
    schedule: str = SEQUENTIAL
    record_inputs: bool = False
    reserve: int = DEFAULT_RESERVE
    neuron: NeuronConfig = field(default_factory=NeuronConfig)
    plasticity: PlasticityConfig = field(default_factory=PlasticityConfig)
    task: TaskConfig = field(default_factory=TaskConfig)

    def __post_init__(self):
        if self.n_cores < 1 or self.neurons_per_core < 1:
            raise ValueError("need at least one core and one neuron per core")
        if self.neurons_per_core > 256:
            raise ValueError("at most 256 neurons per core")
        if self.n_hidden % 2:
            raise ValueError("hidden neuron count must be even (two populations)")
        if self.duration < 0 or self.dt <= 0:
            raise ValueError("bad duration/dt")
        if self.rewiring not in (WALK, REALLOC):
            raise ValueError(f"rewiring must be {WALK!r} or {REALLOC!r}")
        if self.schedule not in (SEQUENTIAL, PARALLEL):
            raise ValueError(f"schedule must be {SEQUENTIAL!r} or {PARALLEL!r}")
        if self.synapses_per_pair < 1:
            raise ValueError("synapses_per_pair must be >= 1")
        if self.task.n_inputs != self.n_inputs:
            object.__setattr__(self, "task", replace(self.task, n_inputs=self.n_inputs))
        for sub in (self.neuron, self.plasticity):
            if sub.dt != self.dt:
                raise ValueError("module dt must equal the simulation dt")

    @property
    def n_hidden(self) -> int:
        return self.n_cores * self.neurons_per_core

    @property
    def n_steps(self) -> int:
        return int(round(self.duration * 1000.0 / self.dt))

    @property
    def plasticity_cfg(self) -> PlasticityConfig:
        return replace(self.plasticity, mode=self.rewiring)

    @property
    def master_seed(self) -> KissState:
        return seed_scramble(DEFAULT_SEED, self.seed)

    @property
    def core_seeds(self) -> tuple:
        m = self.master_seed
        return tuple(seed_scramble(m, c) for c in range(self.n_cores))

    @property
    def env_seed(self) -> KissState:
        return seed_scramble(self.master_seed, ENV_ENTROPY)

    def core_of(self, h: int) -> int:
        return h % self.n_cores

    def local_of(self, h: int) -> int:
        return h // self.n_cores

    def hidden_key(self, h: int) -> int:
        return self.n_inputs + h

    def population(self, h: int) -> int:
        """0 for population A, 1 for B."""
        return 0 if h < self.n_hidden // 2 else 1

    def cost_mode(self) -> str:
        return costmodel.HW if self.accel else costmodel.SW


# ---------------------------------------------------------------------------
# network construction
# ---------------------------------------------------------------------------

def core_connectivity(cfg: SimConfig, core: int, rng: KissState) -> tuple[CoreConnectivity, KissState]:
    """All-to-all plastic input rows plus fixed lateral inhibition among hidden neurons."""
    local = [h for h in range(cfg.n_hidden) if cfg.core_of(h) == core]
    slots = [j for j in range(len(local)) for _ in range(cfg.synapses_per_pair)]
    conn = CoreConnectivity(n_local=len(local))
    for i in range(cfg.n_inputs):
        conn.plastic[i] = list(slots)
    lo, hi = cfg.task.inhibition_min, cfg.task.inhibition_max
    for src in range(cfg.n_hidden):
        fixed = []
        for j, h in enumerate(local):
            if h == src:
                continue
            u, rng = kiss_uniform(rng)
            fixed.append((j, -(lo + (hi - lo) * u)))
        conn.fixed[cfg.hidden_key(src)] = fixed
    return conn, rng


def build_network(cfg: SimConfig) -> tuple[list[CoreImage], list[KissState], PatternSet]:
    images, streams = [], []
    control = (cfg.neuron.decay_rise, cfg.neuron.decay_fall)
    budget = DTCM_BYTES - cfg.reserve
    for c, seed in enumerate(cfg.core_seeds):
        conn, rng = core_connectivity(cfg, c, seed)
        img, rng = build_core_image(conn, rng, prior_mean=cfg.plasticity.prior_mean,
                                    prior_std=cfg.plasticity.theta_init_std,
                                    theta_max=cfg.plasticity.theta_max, control=control,
                                    budget=budget)
        images.append(img)
        streams.append(rng)
    patterns = PatternSet.generate(cfg.master_seed, cfg.task)
    return images, streams, patterns


# ---------------------------------------------------------------------------
# routing
# ---------------------------------------------------------------------------

def subscriptions(images: list[CoreImage], n_keys: int) -> np.ndarray:
    """Boolean [core, key]: does the core hold a row for the key."""
    sub = np.zeros((len(images), n_keys), dtype=np.bool_)
    for c, img in enumerate(images):
        keys = img.keys.astype(np.int64)
        if keys.size and keys.max() >= n_keys:
            raise SimulationError(f"core {c} holds key {keys.max()} beyond the key space")
        sub[c, keys] = True
    return sub


def route(spikes, subs: np.ndarray) -> list[list[int]]:
    """Per-core delivery lists in ascending source key order."""
    keys = sorted(int(k) for k in spikes)
    out = [[] for _ in range(subs.shape[0])]
    for k in keys:
        if not 0 <= k < subs.shape[1] or not subs[:, k].any():
            raise UnknownKeyError(k)
        for c in range(subs.shape[0]):
            if subs[c, k]:
                out[c].append(k)
    return out


# ---------------------------------------------------------------------------
# compiled step loop
# ---------------------------------------------------------------------------

@njit(cache=True)
def _find(keys, n, key):
    lo, hi = 0, n
    while lo < hi:
        mid = (lo + hi) >> 1
        if keys[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    if lo < n and keys[lo] == key:
        return lo
    return -1


@njit(cache=True)
def _core_step(t, keys, nr, ctrl, tr_fall, tr_rise, y, syn_row, post, theta, e, g, w, ns,
               fix_start, fix_tgt, fix_w, local_global, nl, inp, pf, st, sub, pend, n_pend,
               bias, refr, rate, spiked, ev, n_ev, memo, ip, fp, r, rhat, gain):
    """Phases 1, 3 and 4 for one core; returns (delivered, overflows, error, n_ev, updates)."""
    ref_steps, realloc, accel = ip[0], ip[1], ip[5]
    dt, psp_scale, target_rate, tau_bias = fp[0], fp[1], fp[2], fp[3]
    decay_e, decay_g, beta, mu, inv_var = fp[4], fp[5], fp[7], fp[8], fp[9]
    noise_scale, theta0, theta_re, theta_max = fp[10], fp[11], fp[12], fp[18]
    delivered = 0
    over = 0
    error = 0

    for q in range(nr):
        tr_fall[q] *= ctrl[q, 1]
        tr_rise[q] *= ctrl[q, 0]
    for p in range(n_pend):
        key = pend[p]
        if sub[key]:
            q = _find(keys, nr, key)
            if q < 0:
                error = 1
            else:
                tr_fall[q] += 1.0
                tr_rise[q] += 1.0
                delivered += 1
    for q in range(nr):
        y[q] = psp_scale * (tr_fall[q] - tr_rise[q])
    for j in range(nl):
        inp[j] = 0.0
    for i in range(ns):
        inp[post[i]] += w[i] * y[syn_row[i]]
    for q in range(nr):
        for f in range(fix_start[q], fix_start[q + 1]):
            inp[fix_tgt[f]] += fix_w[f] * y[q]

    for j in range(nl):
        h = local_global[j]
        unif = kiss_uniform_arr(st)
        fr, sp, rs, b = neuron_update(inp[j] + bias[h], refr[h], bias[h], unif, dt,
                                      ref_steps, target_rate, tau_bias, memo, accel)
        rate[h] = fr
        spiked[h] = sp
        refr[h] = rs
        bias[h] = b
        pf[j] = post_factor(sp, fr, dt)

    theta_new = float(np.float32(theta_re))
    for i in range(ns):
        word = kiss_next_arr(st)
        noise = noise_from_word(word, noise_scale)
        th = theta[i]
        if th > 0.0:
            ne, ng, nth, ov = synapse_update(e[i], g[i], th, w[i], y[syn_row[i]], pf[post[i]],
                                             gain, noise, storage_bits(word), dt, decay_e,
                                             decay_g, beta, mu, inv_var, theta_max)
            over += ov
            if nth <= 0.0:
                ne = 0.0
                ng = 0.0
                ev[n_ev, 0] = t
                ev[n_ev, 1] = keys[syn_row[i]]
                ev[n_ev, 2] = local_global[post[i]]
                if realloc:
                    newp = draw_slot(kiss_next_arr(st), nl)
                    ev[n_ev, 3] = local_global[newp]
                    post[i] = newp
                    nth = theta_new
                else:
                    ev[n_ev, 3] = -1
                n_ev += 1
        else:
            ne = 0.0
            ng = 0.0
            nth = prior_update(th, noise, beta, mu, inv_var)
        e[i] = ne
        g[i] = ng
        theta[i] = nth
        w[i] = weight_from_theta(nth, theta0, memo, accel)
    return delivered, over, error, n_ev, ns


def _chunk_py(t0, n_steps, ip, fp, memo,
              keys, n_rows, ctrl, tr_fall, tr_rise, y,
              syn_row, post, theta, e, g, w, n_syn,
              fix_start, fix_tgt, fix_w,
              local_global, n_local, inp, pf, rng, sub,
              bias, refr, rate, spiked, pop_of,
              env_rng, env_state, rate_tab, ker, ring, pend, n_pend,
              out_spk, n_spk, out_rew, out_phase, out_cnt, out_rhat,
              ev, n_ev, ev_cap, upd, deliv, emitted, over, err):
    n_cores = keys.shape[0]
    n_hidden = bias.shape[0]
    n_in = rate_tab.shape[1]
    pres_ms, period_ms, rec_inputs = ip[2], ip[3], ip[4]
    dt, alpha, r_floor, eps = fp[0], fp[6], fp[13], fp[14]
    n_pop_a, n_pop_b, rhat_rate = fp[15], fp[16], fp[17]
    n_ker = ker.shape[0]
    max_syn = 0
    for c in range(n_cores):
        if n_syn[c] > max_syn:
            max_syn = n_syn[c]

    done = 0
    for s in range(n_steps):
        # stop early rather than overflow the rewiring buffers
        full = False
        for c in range(n_cores):
            if n_ev[c] + max_syn > ev_cap:
                full = True
        if full:
            break
        t = t0 + s

        # -- environment (master core): phase, reward, input spikes --------
        pos = (t * 1) % period_ms
        if pos == 0:
            env_state[0] = 1.0 if kiss_uniform_arr(env_rng) < 0.5 else 2.0
        elif pos >= pres_ms:
            env_state[0] = 0.0
        phase = int(env_state[0])
        ra = 0.0
        rb = 0.0
        for k in range(n_ker):
            idx = t - 1 - k
            if idx < 0:
                break
            slot = idx % n_ker
            ra += ker[k] * ring[slot, 0]
            rb += ker[k] * ring[slot, 1]
        ra /= n_pop_a * dt * 1e-3
        rb /= n_pop_b * dt * 1e-3
        r = reward_value(ra, rb, phase, eps)
        rhat = env_state[1] + rhat_rate * (r - env_state[1])
        if rhat < r_floor:
            rhat = r_floor
        env_state[1] = rhat
        out_rew[s] = r
        out_rhat[s] = rhat
        gain = reward_gain(r, rhat, alpha)
        out_phase[s] = phase

        # -- per-core work ----------------------------------------------------
        for c in prange(n_cores):
            res = _core_step(
                t, keys[c], n_rows[c], ctrl[c], tr_fall[c], tr_rise[c], y[c],
                syn_row[c], post[c], theta[c], e[c], g[c], w[c], n_syn[c],
                fix_start[c], fix_tgt[c], fix_w[c], local_global[c], n_local[c],
                inp[c], pf[c], rng[c], sub[c], pend, n_pend[0],
                bias, refr, rate, spiked, ev[c], n_ev[c], memo, ip, fp, r, rhat, gain)
            deliv[c] += res[0]
            over[c] += res[1]
            if res[2]:
                err[c] = 1
            n_ev[c] = res[3]
            upd[s, c] = res[4]

        # -- emit: inputs first, then hidden neurons; keys ascend -------------
        np_ = 0
        for i in range(n_in):
            if kiss_uniform_arr(env_rng) < rate_tab[phase, i] * dt * 1e-3:
                pend[np_] = i
                np_ += 1
                emitted[i] += 1
                if rec_inputs:
                    out_spk[n_spk[0], 0] = t
                    out_spk[n_spk[0], 1] = i
                    n_spk[0] += 1
        ca = 0
        cb = 0
        for h in range(n_hidden):
            if spiked[h]:
                pend[np_] = n_in + h
                np_ += 1
                emitted[n_in + h] += 1
                out_spk[n_spk[0], 0] = t
                out_spk[n_spk[0], 1] = n_in + h
                n_spk[0] += 1
                if pop_of[h] == 0:
                    ca += 1
                else:
                    cb += 1
        n_pend[0] = np_
        ring[t % n_ker, 0] = ca
        ring[t % n_ker, 1] = cb
        out_cnt[s, 0] = ca
        out_cnt[s, 1] = cb
        done += 1
    return done


_chunk_seq = njit(cache=True)(_chunk_py)
_chunk_par = njit(cache=True, parallel=True)(_chunk_py)


# ---------------------------------------------------------------------------
# engine
# ---------------------------------------------------------------------------

class Engine:
    """Holds the flattened per-core state and advances it in compiled chunks."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.images, streams, self.patterns = build_network(cfg)
        self.t = 0
        C, H = cfg.n_cores, cfg.n_hidden
        n_keys = cfg.n_inputs + H
        self.sub = subscriptions(self.images, n_keys)
        rows = [img.keys.size for img in self.images]
        R = max(rows) if rows else 0
        parsed = [[SynapseRow.parse(img.rows, int(a)) for a in img.addresses] for img in self.images]
        S = max(sum(r.n_plastic for r in p) for p in parsed)
        F = max(max(1, sum(len(r.fixed_targets) for r in p)) for p in parsed)
        L = max(img.n_local for img in self.images)

        self.keys = np.zeros((C, R), np.int64)
        self.n_rows = np.array(rows, np.int64)
        self.ctrl = np.zeros((C, R, 2), np.float64)
        self.tr_fall = np.zeros((C, R))
        self.tr_rise = np.zeros((C, R))
        self.y = np.zeros((C, R))
        self.syn_row = np.zeros((C, S), np.int64)
        self.post = np.zeros((C, S), np.int64)
        self.theta = np.zeros((C, S), np.float32)
        self.e = np.zeros((C, S), np.float32)
        self.g = np.zeros((C, S), np.float32)
        self.w = np.zeros((C, S))
        self.n_syn = np.zeros(C, np.int64)
        self.fix_start = np.zeros((C, R + 1), np.int64)
        self.fix_tgt = np.zeros((C, F), np.int64)
        self.fix_w = np.zeros((C, F))
        self.local_global = np.zeros((C, L), np.int64)
        self.n_local = np.zeros(C, np.int64)
        self.slot_of = np.zeros((C, S), np.int64)
        for c, (img, rows_c) in enumerate(zip(self.images, parsed)):
            self.keys[c, :img.keys.size] = img.keys
            local = [h for h in range(H) if cfg.core_of(h) == c]
            self.local_global[c, :len(local)] = local
            self.n_local[c] = img.n_local
            i = f = 0
            col = 0
            for q, row in enumerate(rows_c):
                self.ctrl[c, q] = row.control[:2]
                for sidx in range(row.n_plastic):
                    self.syn_row[c, i] = q
                    self.slot_of[c, i] = sidx
                    self.post[c, i] = img.post_ids[sidx, col]
                    self.theta[c, i] = row.theta[sidx]
                    self.e[c, i] = row.e[sidx]
                    self.g[c, i] = row.g[sidx]
                    i += 1
                if row.n_plastic:
                    col += 1
                self.fix_start[c, q] = f
                nf = len(row.fixed_targets)
                self.fix_tgt[c, f:f + nf] = row.fixed_targets
                self.fix_w[c, f:f + nf] = row.fixed_weights
                f += nf
            self.fix_start[c, len(rows_c):] = f
            self.n_syn[c] = i
        pcfg = cfg.plasticity_cfg
        for c in range(C):
            for i in range(self.n_syn[c]):
                self.w[c, i] = weight_from_theta(float(self.theta[c, i]), pcfg.theta0, EXP_MEMO,
                                                 cfg.accel)

        self.inp = np.zeros((C, L))
        self.pf = np.zeros((C, L))
        self.rng = np.stack([kiss_state_array(s) for s in streams]) if C else np.zeros((0, 4), np.int64)
        self.bias = np.full(H, cfg.neuron.bias_init)
        self.refr = np.zeros(H, np.int64)
        self.rate = np.zeros(H)
        self.spiked = np.zeros(H, np.bool_)
        self.pop_of = np.array([cfg.population(h) for h in range(H)], np.int64)
        self.env_rng = kiss_state_array(cfg.env_seed)
        self.env_state = np.array([0.0, pcfg.reward_hat_init])
        self.rate_tab = self.patterns.rate_table()
        self.ker = gaussian_kernel(cfg.task.rate_sigma_ms / cfg.dt, causal=True)
        self.ring = np.zeros((self.ker.size, 2))
        self.pend = np.zeros(n_keys, np.int64)
        self.n_pend = np.zeros(1, np.int64)
        self.upd_total = np.zeros(C, np.int64)
        self.deliv = np.zeros(C, np.int64)
        self.emitted = np.zeros(n_keys, np.int64)
        self.over = np.zeros(C, np.int64)
        self.err = np.zeros(C, np.int64)

        n = cfg.neuron
        self.ip = np.array([n.ref_steps, pcfg.mode == REALLOC,
                            cfg.task.presentation_ms, cfg.task.presentation_ms + cfg.task.rest_ms,
                            cfg.record_inputs, cfg.accel], np.int64)
        if cfg.dt != 1.0 or cfg.task.presentation_ms % 1 or cfg.task.rest_ms % 1:
            raise ValueError("the compiled loop assumes dt = 1 ms and whole-ms phases")
        self.fp = np.array([
            cfg.dt, n.psp_scale, n.target_rate, n.tau_bias,
            pcfg.decay_e, pcfg.decay_g, pcfg.alpha, pcfg.beta, pcfg.prior_mean,
            1.0 / pcfg.prior_std ** 2, pcfg.noise_scale, pcfg.theta0, pcfg.theta_reconnect,
            pcfg.reward_floor, cfg.task.contrast_eps,
            sum(1 for h in range(H) if cfg.population(h) == 0),
            sum(1 for h in range(H) if cfg.population(h) == 1),
            cfg.dt * 1e-3 / pcfg.tau_g, pcfg.theta_max,
        ])

    @property
    def total_synapses(self) -> int:
        return int(self.n_syn.sum())

    def run_chunk(self, n_steps: int) -> dict:
        """Advance up to ``n_steps``; returns the per-step records for the steps done."""
        cfg = self.cfg
        C = cfg.n_cores
        cap_spk = n_steps * (cfg.n_hidden + (cfg.n_inputs if cfg.record_inputs else 0))
        out_spk = np.zeros((max(cap_spk, 1), 2), np.int64)
        n_spk = np.zeros(1, np.int64)
        out_rew = np.zeros(n_steps)
        out_rhat = np.zeros(n_steps)
        out_phase = np.zeros(n_steps, np.int64)
        out_cnt = np.zeros((n_steps, 2), np.int64)
        max_syn = int(self.n_syn.max()) if C else 0
        ev_cap = max(64 * n_steps, 2 * max_syn + 64)
        ev = np.zeros((C, ev_cap, 4), np.int64)
        n_ev = np.zeros(C, np.int64)
        upd = np.zeros((n_steps, C), np.int64)
        fn = _chunk_par if cfg.schedule == PARALLEL else _chunk_seq
        done = fn(self.t, n_steps, self.ip, self.fp, EXP_MEMO,
                  self.keys, self.n_rows, self.ctrl, self.tr_fall, self.tr_rise, self.y,
                  self.syn_row, self.post, self.theta, self.e, self.g, self.w, self.n_syn,
                  self.fix_start, self.fix_tgt, self.fix_w,
                  self.local_global, self.n_local, self.inp, self.pf, self.rng, self.sub,
                  self.bias, self.refr, self.rate, self.spiked, self.pop_of,
                  self.env_rng, self.env_state, self.rate_tab, self.ker, self.ring,
                  self.pend, self.n_pend,
                  out_spk, n_spk, out_rew, out_phase, out_cnt, out_rhat,
                  ev, n_ev, ev_cap, upd, self.deliv, self.emitted, self.over, self.err)
        if self.err.any():
            raise UnknownKeyError(f"unroutable spike key on cores {np.flatnonzero(self.err).tolist()}")
        t_start = self.t
        self.t += done
        spikes = out_spk[:n_spk[0]]
        # order events by (t, core) so the log is schedule independent
        parts = [np.column_stack([ev[c, :n_ev[c]], np.full(n_ev[c], c)]) for c in range(C)]
        events = np.concatenate(parts) if parts else np.zeros((0, 5), np.int64)
        if events.size:
            events = events[np.lexsort((events[:, 4], events[:, 0]))]
        pend_now = self.pend[:self.n_pend[0]]
        self.upd_total += upd[:done].sum(axis=0)
        return {"t0": t_start, "steps": done, "spikes": spikes, "reward": out_rew[:done],
                "rhat": out_rhat[:done], "phase": out_phase[:done], "counts": out_cnt[:done],
                "events": events, "updates": upd[:done], "pending": pend_now.copy()}

    def expected_deliveries(self) -> np.ndarray:
        """Per-core deliveries implied by emitted spikes (those still in flight excluded)."""
        emitted = self.emitted.copy()
        np.subtract.at(emitted, self.pend[:self.n_pend[0]], 1)
        return self.sub.astype(np.int64) @ emitted

    def snapshot_images(self) -> list[CoreImage]:
        """Core images rebuilt from the live state (binary16 e/g, float32 theta, post IDs)."""
        out = []
        for c, img in enumerate(self.images):
            rows, addr, cols = [], [], []
            off = 0
            for q in range(int(self.n_rows[c])):
                old = SynapseRow.parse(img.rows, int(img.addresses[q]))
                idx = np.flatnonzero(self.syn_row[c, :self.n_syn[c]] == q)
                row = SynapseRow(self.e[c, idx].copy(), self.g[c, idx].copy(),
                                 self.theta[c, idx].copy(), old.control,
                                 old.fixed_targets, old.fixed_weights)
                blob = row.to_bytes()
                addr.append(off)
                off += len(blob)
                rows.append(blob)
                if idx.size:
                    cols.append(self.post[c, idx])
            post_ids = np.array(cols, dtype=np.uint8).T if cols else np.zeros((0, 0), np.uint8)
            out.append(CoreImage(img.keys.copy(), np.array(addr, np.uint32), b"".join(rows),
                                 post_ids, img.n_local, budget=img.budget))
        return out

    def fanout(self) -> np.ndarray:
        """Plastic synapse count per input key, summed over cores."""
        counts = np.zeros(self.cfg.n_inputs, np.int64)
        for c in range(self.cfg.n_cores):
            np.add.at(counts, self.keys[c, self.syn_row[c, :self.n_syn[c]]], 1)
        return counts

    def connectivity_rows(self) -> list[tuple]:
        """(pre, core, slot, post, theta) for every plastic synapse."""
        out = []
        for c in range(self.cfg.n_cores):
            for i in range(int(self.n_syn[c])):
                out.append((int(self.keys[c, self.syn_row[c, i]]), c, int(self.slot_of[c, i]),
                            self.cfg.hidden_key(int(self.local_global[c, self.post[c, i]])),
                            float(self.theta[c, i])))
        return out


# ---------------------------------------------------------------------------
# recording
# ---------------------------------------------------------------------------

@njit(cache=True)
def _format_ints(rows):
    """Render a 2-d int64 array as CSV lines (fast path for large logs)."""
    n, m = rows.shape
    out = np.empty(n * m * 21 + n, dtype=np.uint8)
    pos = 0
    digits = np.empty(20, dtype=np.uint8)
    for i in range(n):
        for j in range(m):
            v = rows[i, j]
            if v < 0:
                out[pos] = 45
                pos += 1
                v = -v
            k = 0
            while True:
                digits[k] = 48 + v % 10
                k += 1
                v //= 10
                if v == 0:
                    break
            for d in range(k - 1, -1, -1):
                out[pos] = digits[d]
                pos += 1
            out[pos] = 44 if j < m - 1 else 10
            pos += 1
    return out[:pos]


def _write_ints(fh, rows: np.ndarray) -> None:
    if rows.size:
        fh.write(_format_ints(np.ascontiguousarray(rows, dtype=np.int64)).tobytes())


def _fmt(x: float) -> str:
    return repr(float(x))


SPIKES, REWARD, RATES, REWIRING, COST = "spikes.csv", "reward.csv", "rates.csv", "rewiring.csv", "cost.csv"
OUTPUTS = (SPIKES, REWARD, RATES, REWIRING, COST)


class Recording:
    """Append-only run record; large logs stream to disk, summaries stay in memory."""

    def __init__(self, cfg: SimConfig, out_dir=None):
        self.cfg = cfg
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.spikes = []
        self.reward = []
        self.rhat = []
        self.phase = []
        self.counts = []
        self.n_events = 0
        self.first_events = []
        self.cycles_total = np.zeros(cfg.n_cores, np.int64)
        self.violations = 0
        self._fh = {}
        if self.out_dir is not None:
            try:
                self.out_dir.mkdir(parents=True, exist_ok=True)
                for name, head in ((SPIKES, "t_ms,neuron_id\n"),
                                   (REWIRING, "t_ms,pre,old_post,new_post\n"),
                                   (COST, "t_ms," + ",".join(f"core{c}" for c in range(cfg.n_cores)) + "\n")):
                    fh = open(self.out_dir / name, "wb")
                    fh.write(head.encode())
                    self._fh[name] = fh
            except OSError as exc:
                self.close()
                raise OSError(f"cannot write outputs in {self.out_dir}: {exc}") from exc

    def append(self, chunk: dict) -> None:
        cfg = self.cfg
        self.spikes.append(chunk["spikes"])
        self.reward.append(chunk["reward"])
        self.rhat.append(chunk["rhat"])
        self.phase.append(chunk["phase"])
        self.counts.append(chunk["counts"])
        ev = chunk["events"]
        self.n_events += len(ev)
        if sum(len(x) for x in self.first_events) < 100_000:
            self.first_events.append(ev)
        mode = cfg.cost_mode()
        cpu = costmodel.cycles_per_update(mode)
        over = np.array([costmodel.DEFAULT.overhead(c) for c in range(cfg.n_cores)], np.int64)
        cycles = over[None, :] + chunk["updates"] * cpu
        self.cycles_total += cycles.sum(axis=0)
        self.violations += int((cycles > costmodel.DEFAULT.budget_cycles).sum())
        if self._fh:
            times = chunk["t0"] + np.arange(chunk["steps"], dtype=np.int64)
            _write_ints(self._fh[SPIKES], chunk["spikes"])
            if cfg.rewiring == REALLOC:
                _write_ints(self._fh[REWIRING], ev[:, :4] + np.array([0, 0, cfg.n_inputs, cfg.n_inputs]))
            _write_ints(self._fh[COST], np.column_stack([times, cycles]))

    def close(self) -> None:
        for fh in self._fh.values():
            fh.close()
        self._fh = {}

    # -- derived series ------------------------------------------------------
    @property
    def reward_trace(self) -> np.ndarray:
        return np.concatenate(self.reward) if self.reward else np.zeros(0)

    @property
    def pop_counts(self) -> np.ndarray:
        return np.concatenate(self.counts) if self.counts else np.zeros((0, 2), np.int64)

    @property
    def spike_raster(self) -> np.ndarray:
        return np.concatenate(self.spikes) if self.spikes else np.zeros((0, 2), np.int64)

    def minute_reward(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-minute normalized mean reward and its Gaussian-smoothed version (sigma 2 min)."""
        r = self.reward_trace
        per_min = int(round(60_000 / self.cfg.dt))
        n_min = -(-r.size // per_min)
        means = np.array([r[m * per_min:(m + 1) * per_min].mean() for m in range(n_min)])
        norm = normalize_reward(means, self.cfg.task)
        return norm, metrics_filter(norm, 2.0)

    def rates(self) -> np.ndarray:
        cnt = self.pop_counts.astype(float)
        half = self.cfg.n_hidden // 2
        a = population_rates(cnt[:, 0], half, self.cfg.task.rate_sigma_ms, self.cfg.dt)
        b = population_rates(cnt[:, 1], self.cfg.n_hidden - half, self.cfg.task.rate_sigma_ms, self.cfg.dt)
        return np.column_stack([a, b])

    def flush_summaries(self) -> None:
        if self.out_dir is None:
            return
        means, smooth = self.minute_reward()
        with open(self.out_dir / REWARD, "w") as fh:
            fh.write("minute,mean_reward,filtered_reward\n")
            for m, (a, b) in enumerate(zip(means, smooth)):
                fh.write(f"{m},{_fmt(a)},{_fmt(b)}\n")
        rates = self.rates()
        t = np.arange(rates.shape[0]) * self.cfg.dt
        with open(self.out_dir / RATES, "w") as fh:
            fh.write("t_ms,popA_hz,popB_hz\n")
            fh.write("".join(f"{int(ti)},{a:.9g},{b:.9g}\n" for ti, (a, b) in zip(t, rates)))


@dataclass
class RunSummary:
    final_reward: float
    turnover: int
    steps: int
    wall_time_s: float
    half_overflows: int
    deliveries_ok: bool
    realtime_violations: int
    energy_uj_per_step: float
    minute_reward: list

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True)


def run_experiment(cfg: SimConfig, out_dir=None, progress=None) -> tuple[RunSummary, Recording, Engine]:
    """Run ``cfg.duration`` seconds; writes the CSV outputs when ``out_dir`` is given."""
    wall = time.perf_counter()
    eng = Engine(cfg)
    rec = Recording(cfg, out_dir)
    try:
        if out_dir is not None:
            write_connectivity(eng, Path(out_dir) / "connectivity_initial.csv")
        remaining = cfg.n_steps
        while remaining > 0:
            chunk = eng.run_chunk(min(CHUNK_STEPS, remaining))
            if chunk["steps"] == 0:
                raise SimulationError("engine made no progress")
            rec.append(chunk)
            remaining -= chunk["steps"]
            if progress is not None:
                progress(eng.t, cfg.n_steps)
        rec.close()
        rec.flush_summaries()
        if out_dir is not None:
            write_connectivity(eng, Path(out_dir) / "connectivity_final.csv")
    finally:
        rec.close()
    means, smooth = rec.minute_reward() if cfg.n_steps else (np.zeros(0), np.zeros(0))
    summary = RunSummary(
        final_reward=float(smooth[-1]) if smooth.size else 0.0,
        turnover=int(rec.n_events),
        steps=int(eng.t),
        wall_time_s=time.perf_counter() - wall,
        half_overflows=int(eng.over.sum()),
        deliveries_ok=bool(np.array_equal(eng.deliv, eng.expected_deliveries())),
        realtime_violations=int(rec.violations),
        energy_uj_per_step=costmodel.energy(cfg.dram, cfg.accel).energy_uj,
        minute_reward=[float(x) for x in smooth],
    )
    if out_dir is not None:
        with open(Path(out_dir) / "summary.json", "w") as fh:
            fh.write(summary.to_json() + "\n")
    return summary, rec, eng


def write_connectivity(eng: Engine, path) -> None:
    with open(path, "w") as fh:
        fh.write("pre,core,slot,post,theta\n")
        fh.write("".join(f"{p},{c},{s},{q},{th!r}\n" for p, c, s, q, th in eng.connectivity_rows()))


def simulate_step(eng: Engine) -> dict:
    """Advance the engine by exactly one step."""
    return eng.run_chunk(1)
