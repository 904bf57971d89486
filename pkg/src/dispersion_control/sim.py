"""Scenario engine for centralized and distributed dispersion control.

The distributed loop couples three dynamics per agent::

    eps_f * eps_s * d p_hat/dt = consensus(p_hat; source p)
    eps_s         * d c_hat/dt = consensus(c_hat; source p_hat p_hat^T)
                    d p/dt     = control law with z = p_hat and the eigenpairs
                                 of p_hat p_hat^T - C_hat

and is integrated with classical fixed-step RK4. Centralized mode integrates
only the positions, using the exact covariance of the live swarm.

Agents keep their original (0-based internally, 1-based in configs and logs)
index for the whole run. Dead agents lose their edges and freeze in place;
non-cooperative agents follow a circular orbit around the origin but still
take part in estimation.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .control import scaling_certificate, velocities_in_basis
from .dispersion import DispersionTarget, EigenBasis2, Sym2, covariance, eig_sym2, eig_sym2_batch
from .estimators import EstimatorState, estimation_errors, outer_source, recovered_covariances
from .graph import Graph, geometric_graph, is_connected, laplacian, remove_vertices, spectral_summary

log = logging.getLogger(__name__)

COOPERATIVE, NON_COOPERATIVE, DEAD = 0, 1, 2
STATUS_NAMES = {COOPERATIVE: "cooperative", NON_COOPERATIVE: "non_cooperative", DEAD: "dead"}

STEP_SAFETY = 0.5

__all__ = [
    "ConfigError",
    "SimulationError",
    "Event",
    "GraphSpec",
    "ScenarioConfig",
    "Scenario",
    "SwarmState",
    "TrajectoryLog",
    "prepare",
    "initial_state",
    "step",
    "run",
    "metrics",
    "fit_decay_rate",
    "step_bound",
    "richardson_ratio",
    "COOPERATIVE",
    "NON_COOPERATIVE",
    "DEAD",
    "STATUS_NAMES",
]


class ConfigError(ValueError):
    """Invalid scenario configuration. ``key`` names the offending field."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class SimulationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class Event:
    """A scheduled change of agent status.

    ``agents`` are 1-based. When empty, ``count`` agents are drawn from the
    seeded RNG at preparation time (kill victims are redrawn until the
    survivors stay connected).
    """

    time: float
    kind: str  # "kill" | "non_cooperative"
    agents: tuple[int, ...] = ()
    count: int = 0
    omega: tuple[float, ...] = ()
    radius: tuple[float, ...] = ()


@dataclass(frozen=True)
class GraphSpec:
    kind: str = "geometric"  # "geometric" | "edges" | "complete"
    radius: float = 1.0
    seed: int | None = None
    edges: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class ScenarioConfig:
    n_agents: int
    target: DispersionTarget
    mode: str = "distributed"
    bounds: tuple[tuple[float, float], tuple[float, float]] = ((-3.0, 3.0), (-1.0, 1.0))
    positions: tuple[tuple[float, float], ...] | None = None
    seed: int = 0
    graph: GraphSpec = field(default_factory=GraphSpec)
    eps_f: float = 0.1
    eps_s: float = 0.25
    step_h: float | None = None
    duration: float = 10.0
    events: tuple[Event, ...] = ()
    log_every: int = 10
    basis: str = "frozen"  # centralized only: "frozen" | "recompute"
    on_death: str = "handoff"  # "handoff" | "keep"
    motion: bool = True  # False holds positions fixed (estimator checks)
    allow_psd_target: bool = False

    def __post_init__(self):
        if self.n_agents < 2:
            raise ConfigError("n_agents", "need at least 2 agents")
        if self.mode not in ("centralized", "distributed"):
            raise ConfigError("mode", f"must be 'centralized' or 'distributed', got {self.mode!r}")
        if not self.eps_f > 0:
            raise ConfigError("eps_f", "eps_f must be positive")
        if not self.eps_s > 0:
            raise ConfigError("eps_s", "eps_s must be positive")
        if self.step_h is not None and not self.step_h > 0:
            raise ConfigError("step_h", "step_h must be positive")
        if not self.duration >= 0:
            raise ConfigError("duration", "duration must be non-negative")
        if self.log_every < 1:
            raise ConfigError("log_every", "log_every must be >= 1")
        if self.on_death not in ("handoff", "keep"):
            raise ConfigError("on_death", f"must be 'handoff' or 'keep', got {self.on_death!r}")
        if self.basis not in ("frozen", "recompute"):
            raise ConfigError("basis", f"must be 'frozen' or 'recompute', got {self.basis!r}")
        if self.positions is not None and len(self.positions) != self.n_agents:
            raise ConfigError("initial.positions", f"expected {self.n_agents} positions, got {len(self.positions)}")
        if (
            self.mode == "distributed"
            and self.target.lambda2_star == 0
            and not self.allow_psd_target
        ):
            raise ConfigError(
                "target",
                "rank-deficient target in distributed mode is experimental; set allow_psd_target = true",
            )
        for k, ev in enumerate(self.events):
            if ev.kind not in ("kill", "non_cooperative"):
                raise ConfigError(f"events[{k}].kind", f"unknown event kind {ev.kind!r}")
            if ev.time < 0 or ev.time > self.duration:
                raise ConfigError(f"events[{k}].time", f"time {ev.time} outside [0, {self.duration}]")
            if not ev.agents and ev.count < 1:
                raise ConfigError(f"events[{k}]", "give either agents or a positive count")
            m = len(ev.agents) or ev.count
            if ev.kind == "non_cooperative" and len(ev.omega) not in (1, m):
                raise ConfigError(f"events[{k}].omega", f"need 1 or {m} angular speeds")
            if ev.radius and len(ev.radius) not in (1, m):
                raise ConfigError(f"events[{k}].radius", f"need 1 or {m} radii")
            for a in ev.agents:
                if not 1 <= a <= self.n_agents:
                    raise ConfigError(f"events[{k}].agents", f"agent {a} outside 1..{self.n_agents}")


def step_bound(L: np.ndarray, eps_f: float, eps_s: float) -> float:
    """Largest admissible RK4 step for the fastest (centroid) consensus mode."""
    lam_max = float(np.linalg.eigvalsh(np.asarray(L, dtype=float))[-1])
    if lam_max <= 0:
        return math.inf
    return STEP_SAFETY * eps_f * eps_s / lam_max


# ---------------------------------------------------------------------------
# resolved scenario and state


@dataclass(frozen=True)
class ResolvedEvent:
    step: int
    time: float
    kind: str
    agents: tuple[int, ...]  # 0-based
    omega: tuple[float, ...] = ()
    radius: tuple[float | None, ...] = ()


@dataclass(frozen=True)
class Scenario:
    cfg: ScenarioConfig
    positions0: np.ndarray
    graph: Graph
    graph_radius: float | None
    h: float
    n_steps: int
    events: tuple[ResolvedEvent, ...]
    algebraic_connectivity: float
    spectral_radius: float


@dataclass
class SwarmState:
    t: float
    k: int
    positions: np.ndarray
    estimator: EstimatorState
    status: np.ndarray
    orbit: np.ndarray  # (n, 4): radius, omega, phase, t0
    basis_v1: np.ndarray  # per-agent continuity memory
    basis_v2: np.ndarray
    laplacian: np.ndarray
    frozen_basis: EigenBasis2 | None = None

    def copy(self) -> "SwarmState":
        return SwarmState(
            self.t,
            self.k,
            self.positions.copy(),
            self.estimator.copy(),
            self.status.copy(),
            self.orbit.copy(),
            self.basis_v1.copy(),
            self.basis_v2.copy(),
            self.laplacian.copy(),
            self.frozen_basis,
        )

    @property
    def alive(self) -> np.ndarray:
        return self.status != DEAD


def _initial_positions(cfg: ScenarioConfig) -> np.ndarray:
    if cfg.positions is not None:
        return np.array(cfg.positions, dtype=float)
    rng = np.random.default_rng(cfg.seed)
    (x0, x1), (y0, y1) = cfg.bounds
    return np.column_stack([rng.uniform(x0, x1, cfg.n_agents), rng.uniform(y0, y1, cfg.n_agents)])


def _build_graph(cfg: ScenarioConfig, P: np.ndarray) -> tuple[Graph, float | None]:
    gspec = cfg.graph
    if gspec.kind == "edges":
        return Graph(cfg.n_agents, gspec.edges), None
    if gspec.kind == "complete":
        n = cfg.n_agents
        return Graph(n, tuple((i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1))), None
    if gspec.kind == "geometric":
        return geometric_graph(P, gspec.radius)
    raise ConfigError("graph.type", f"unknown graph type {gspec.kind!r}")


def prepare(cfg: ScenarioConfig) -> Scenario:
    """Resolve randomness, build the graph, schedule events and check bounds."""
    P0 = _initial_positions(cfg)
    g, r_used = _build_graph(cfg, P0)
    if not is_connected(g):
        raise ConfigError("graph", "interaction graph is not connected")
    spectrum = spectral_summary(g)

    L = laplacian(g).astype(float)
    if cfg.mode == "distributed":
        bound = STEP_SAFETY * cfg.eps_f * cfg.eps_s / spectrum.spectral_radius
        h = bound if cfg.step_h is None else cfg.step_h
        if h > bound * (1 + 1e-12):
            raise ConfigError(
                "step_h",
                f"step {h:g} exceeds stability bound 0.5*eps_f*eps_s/lambda_max(L) = {bound:g}",
            )
    else:
        h = 1e-3 if cfg.step_h is None else cfg.step_h

    n_steps = int(math.ceil(cfg.duration / h - 1e-9)) if cfg.duration > 0 else 0
    h_eff = cfg.duration / n_steps if n_steps else h

    rng = np.random.default_rng([cfg.seed, 7919])
    dead: set[int] = set()
    noncoop: set[int] = set()
    resolved = []
    for k, ev in sorted(enumerate(cfg.events), key=lambda kv: (kv[1].time, kv[0])):
        key = f"events[{k}]"
        if ev.agents:
            agents = tuple(a - 1 for a in ev.agents)
            clash = [a + 1 for a in agents if a in dead]
            if clash:
                raise ConfigError(f"{key}.agents", f"agents {clash} are already dead")
        else:
            pool = [a for a in range(cfg.n_agents) if a not in dead and (ev.kind == "non_cooperative" or a not in noncoop)]
            if ev.kind == "non_cooperative":
                pool = [a for a in pool if a not in noncoop]
            if len(pool) < ev.count:
                raise ConfigError(f"{key}.count", f"only {len(pool)} eligible agents")
            agents = None
            for _ in range(1000):
                pick = tuple(sorted(int(a) for a in rng.choice(pool, size=ev.count, replace=False)))
                if ev.kind != "kill" or is_connected(remove_vertices(g, [a + 1 for a in dead | set(pick)])[0]):
                    agents = pick
                    break
            if agents is None:
                raise ConfigError(key, "could not find victims that keep the graph connected")
        if ev.kind == "kill":
            dead |= set(agents)
            if len(dead) >= cfg.n_agents - 1:
                raise ConfigError(f"{key}.agents", "kill events must leave at least 2 agents")
            sub, _ = remove_vertices(g, [a + 1 for a in dead])
            if not is_connected(sub):
                raise ConfigError(f"{key}.agents", "kill event disconnects the interaction graph")
            resolved.append(ResolvedEvent(_event_step(ev.time, h_eff, n_steps), ev.time, "kill", agents))
        else:
            m = len(agents)
            omega = tuple(ev.omega) if len(ev.omega) == m else tuple(ev.omega) * m
            radius = tuple(ev.radius) if len(ev.radius) == m else (tuple(ev.radius) * m if ev.radius else (None,) * m)
            noncoop |= set(agents)
            resolved.append(
                ResolvedEvent(_event_step(ev.time, h_eff, n_steps), ev.time, "non_cooperative", agents, omega, radius)
            )
    return Scenario(
        cfg=cfg,
        positions0=P0,
        graph=g,
        graph_radius=r_used,
        h=h_eff,
        n_steps=n_steps,
        events=tuple(resolved),
        algebraic_connectivity=spectrum.algebraic_connectivity,
        spectral_radius=spectrum.spectral_radius,
    )


def _event_step(t: float, h: float, n_steps: int) -> int:
    return min(n_steps, int(round(t / h)))


def initial_state(sc: Scenario) -> SwarmState:
    n = sc.cfg.n_agents
    P = sc.positions0.copy()
    frozen = None
    if sc.cfg.mode == "centralized":
        _, C0 = covariance(P)
        frozen = eig_sym2(C0)
    return SwarmState(
        t=0.0,
        k=0,
        positions=P,
        estimator=EstimatorState.zeros(n),
        status=np.full(n, COOPERATIVE, dtype=np.int8),
        orbit=np.zeros((n, 4)),
        basis_v1=np.tile([1.0, 0.0], (n, 1)),
        basis_v2=np.tile([0.0, 1.0], (n, 1)),
        laplacian=laplacian(sc.graph).astype(float),
        frozen_basis=frozen,
    )


def _apply_event(state: SwarmState, ev: ResolvedEvent, sc: Scenario) -> None:
    if ev.kind == "kill":
        idx = list(ev.agents)
        if sc.cfg.on_death == "handoff" and sc.cfg.mode == "distributed":
            _handoff(state, sc.graph, idx)
        state.status[idx] = DEAD
        dead = [i + 1 for i in np.flatnonzero(state.status == DEAD)]
        state.laplacian = laplacian(sc.graph.without_vertex_edges(dead)).astype(float)
        log.info("t=%.4f: killed agents %s", state.t, [a + 1 for a in idx])
        return
    for a, w, r in zip(ev.agents, ev.omega, ev.radius):
        x, y = state.positions[a]
        radius = math.hypot(x, y) if r is None else float(r)
        phase = math.atan2(y, x)
        state.status[a] = NON_COOPERATIVE
        state.orbit[a] = (radius, float(w), phase, state.t)
        state.positions[a] = _orbit_position(state.orbit[a], state.t)
    log.info("t=%.4f: agents %s turned non-cooperative", state.t, [a + 1 for a in ev.agents])


def _handoff(state: SwarmState, g: Graph, victims: list[int]) -> None:
    """Split each victim's last broadcast estimates among its live neighbours.

    Keeps the sums of ``p_hat`` and ``c_hat`` over survivors at their
    pre-failure values (zero), so the estimators stay unbiased. A victim with
    no live neighbour passes its share through adjacent victims.
    """
    dying = set(victims)
    live = {int(a) for a in np.flatnonzero(state.status != DEAD)} - dying
    adj: dict[int, set[int]] = {}
    for i, j in g.edges:
        adj.setdefault(i - 1, set()).add(j - 1)
        adj.setdefault(j - 1, set()).add(i - 1)
    ph, ch = state.estimator.p_hat, state.estimator.c_hat
    for v in victims:
        seen, frontier, recipients = {v}, [v], []
        while frontier and not recipients:
            nxt = []
            for u in frontier:
                for w in sorted(adj.get(u, ())):
                    if w in live:
                        recipients.append(w)
                    elif w in dying and w not in seen:
                        seen.add(w)
                        nxt.append(w)
            frontier = nxt
        recipients = sorted(set(recipients))
        if not recipients:
            raise SimulationError(f"agent {v + 1} has no surviving agent to hand its estimates to")
        ph[recipients] += ph[v] / len(recipients)
        ch[recipients] += ch[v] / len(recipients)


def _orbit_position(orb: np.ndarray, t: float) -> np.ndarray:
    r, w, ph, t0 = orb
    ang = ph + w * (t - t0)
    return np.array([r * math.cos(ang), r * math.sin(ang)])


def _orbit_velocity(orb: np.ndarray, t: np.ndarray) -> np.ndarray:
    r, w, ph, t0 = orb.T
    ang = ph + w * (t - t0)
    return np.column_stack([-r * w * np.sin(ang), r * w * np.cos(ang)])


# ---------------------------------------------------------------------------
# right-hand sides


def _centralized_rhs(state: SwarmState, sc: Scenario, t: float, P: np.ndarray) -> np.ndarray:
    alive = state.alive
    Pa = P[alive]
    Z = Pa - Pa.sum(axis=0) / Pa.shape[0]
    m = Z.shape[0]
    c = np.array([Z[:, 0] @ Z[:, 0], Z[:, 0] @ Z[:, 1], Z[:, 1] @ Z[:, 1]]) / m
    tgt = sc.cfg.target
    if sc.cfg.basis == "frozen":
        v1 = np.asarray(state.frozen_basis.v1)
        v2 = np.asarray(state.frozen_basis.v2)
        C = np.array([[c[0], c[1]], [c[1], c[2]]])
        # eigenvalue attached to each invariant eigen-axis
        l1, l2 = v1 @ C @ v1, v2 @ C @ v2
    else:
        lam, V1, V2 = eig_sym2_batch(c[None, :], state.basis_v1[:1], state.basis_v2[:1])
        l1, l2 = lam[0]
        v1, v2 = V1[0], V2[0]
    U = np.zeros_like(P)
    U[alive] = velocities_in_basis(Z, v1, v2, l1 - tgt.lambda1_star, l2 - tgt.lambda2_star)
    return _finish_velocities(U, state, t, sc.cfg.motion)


def _finish_velocities(U: np.ndarray, state: SwarmState, t: float, motion: bool) -> np.ndarray:
    if not motion:
        U[state.status == COOPERATIVE] = 0.0
    U[state.status == DEAD] = 0.0
    nc = state.status == NON_COOPERATIVE
    if nc.any():
        U[nc] = _orbit_velocity(state.orbit[nc], t)
    return U


def _distributed_rhs(state: SwarmState, sc: Scenario, t: float, P, Ph, Ch):
    cfg = sc.cfg
    L = state.laplacian
    S = outer_source(Ph)
    dPh = -(L @ (Ph - P)) / (cfg.eps_f * cfg.eps_s)
    dCh = -(L @ (Ch - S)) / cfg.eps_s
    # only v v^T enters the control law, so eigenvector signs are irrelevant here
    lam, v1, v2 = eig_sym2_batch(S - Ch, state.basis_v1, state.basis_v2, orient=False)
    tgt = cfg.target
    U = velocities_in_basis(Ph, v1, v2, lam[:, 0] - tgt.lambda1_star, lam[:, 1] - tgt.lambda2_star)
    U = _finish_velocities(U, state, t, cfg.motion)
    return U, dPh, dCh


def step(state: SwarmState, sc: Scenario) -> SwarmState:
    """Advance one RK4 step of size ``sc.h`` (events are handled by :func:`run`)."""
    # divergence is detected and reported by _rk4_step itself
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _rk4_step(state, sc, sc.h)


def _rk4_step(state: SwarmState, sc: Scenario, h: float) -> SwarmState:
    t = state.t
    new = state.copy()
    if sc.cfg.mode == "centralized":
        P = state.positions
        k1 = _centralized_rhs(state, sc, t, P)
        k2 = _centralized_rhs(state, sc, t + h / 2, P + h / 2 * k1)
        k3 = _centralized_rhs(state, sc, t + h / 2, P + h / 2 * k2)
        k4 = _centralized_rhs(state, sc, t + h, P + h * k3)
        new.positions = P + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if sc.cfg.basis == "recompute":
            alive = state.alive
            _, C = covariance(new.positions[alive])
            _, v1, v2 = eig_sym2_batch(C.as_vector()[None, :], state.basis_v1[:1], state.basis_v2[:1])
            new.basis_v1[:] = v1[0]
            new.basis_v2[:] = v2[0]
    else:
        P, Ph, Ch = state.positions, state.estimator.p_hat, state.estimator.c_hat
        a1 = _distributed_rhs(state, sc, t, P, Ph, Ch)
        a2 = _distributed_rhs(state, sc, t + h / 2, *(x + h / 2 * d for x, d in zip((P, Ph, Ch), a1)))
        a3 = _distributed_rhs(state, sc, t + h / 2, *(x + h / 2 * d for x, d in zip((P, Ph, Ch), a2)))
        a4 = _distributed_rhs(state, sc, t + h, *(x + h * d for x, d in zip((P, Ph, Ch), a3)))
        P1, Ph1, Ch1 = (
            x + h / 6 * (d1 + 2 * d2 + 2 * d3 + d4) for x, d1, d2, d3, d4 in zip((P, Ph, Ch), a1, a2, a3, a4)
        )
        new.positions = P1
        new.estimator = EstimatorState(Ph1, Ch1)
        _, v1, v2 = eig_sym2_batch(recovered_covariances(new.estimator), state.basis_v1, state.basis_v2)
        new.basis_v1, new.basis_v2 = v1, v2
    new.t = t + h
    new.k = state.k + 1
    nc = np.flatnonzero(new.status == NON_COOPERATIVE)
    for a in nc:
        new.positions[a] = _orbit_position(new.orbit[a], new.t)
    if not (np.isfinite(new.positions).all() and np.isfinite(new.estimator.p_hat).all() and np.isfinite(new.estimator.c_hat).all()):
        raise SimulationError(
            f"non-finite state at t={new.t:g}; step h={h:g} likely violates the stability bound "
            f"h <= 0.5*eps_f*eps_s/lambda_max(L)"
        )
    return new


# ---------------------------------------------------------------------------
# logging


@dataclass
class TrajectoryLog:
    """Time-indexed record of a run. Array fields are stacked per logged step."""

    mode: str
    target: DispersionTarget
    steps: np.ndarray
    t: np.ndarray
    positions: np.ndarray  # (K, n, 2)
    p_hat: np.ndarray  # (K, n, 2)
    c_hat: np.ndarray  # (K, n, 3)
    lam_agents: np.ndarray  # (K, n, 2)  per-agent eigenvalue estimates
    status: np.ndarray  # (K, n)
    err_y: np.ndarray  # (K, n)
    err_D: np.ndarray  # (K, n)
    e_norm: np.ndarray  # (K,)  spectral error of the live swarm
    e_agent_max: np.ndarray  # (K,) max_i ||e_lambda^i|| over cooperative agents
    min_dist: np.ndarray
    centroid: np.ndarray  # (K, 2)
    true_lam: np.ndarray  # (K, 2)
    true_v1: np.ndarray  # (K, 2)
    est_err_max: np.ndarray
    scenario: Scenario | None = field(default=None, repr=False)
    initial_basis: EigenBasis2 | None = None

    def __len__(self) -> int:
        return len(self.t)


class _Recorder:
    def __init__(self, sc: Scenario):
        self.sc = sc
        self.rows: dict[str, list] = {k: [] for k in _LOG_FIELDS}
        self.prev_basis: EigenBasis2 | None = None
        self.initial_basis: EigenBasis2 | None = None

    def record(self, s: SwarmState) -> None:
        sc = self.sc
        alive = s.alive
        P = s.positions
        pc, C = covariance(P[alive])
        basis = eig_sym2(C, self.prev_basis)
        if self.initial_basis is None:
            self.initial_basis = basis
        self.prev_basis = basis
        tgt = sc.cfg.target
        e_true = np.hypot(basis.lambda1 - tgt.lambda1_star, basis.lambda2 - tgt.lambda2_star)

        n = P.shape[0]
        if sc.cfg.mode == "distributed":
            lam, _, _ = eig_sym2_batch(recovered_covariances(s.estimator), s.basis_v1, s.basis_v2)
            ey, eD = estimation_errors(P, s.estimator, alive)
            coop = s.status == COOPERATIVE
            ea = np.hypot(lam[:, 0] - tgt.lambda1_star, lam[:, 1] - tgt.lambda2_star)
            e_agent = float(ea[coop].max()) if coop.any() else float("nan")
            est_max = float(max(np.nanmax(ey), np.nanmax(eD)))
            ph, ch = s.estimator.p_hat, s.estimator.c_hat
        else:
            lam = np.tile([basis.lambda1, basis.lambda2], (n, 1))
            lam[~alive] = np.nan
            ey = np.full(n, np.nan)
            eD = np.full(n, np.nan)
            e_agent = e_true
            est_max = 0.0
            ph = np.full((n, 2), np.nan)
            ch = np.full((n, 3), np.nan)

        Pa = P[alive]
        d2 = ((Pa[:, None, :] - Pa[None, :, :]) ** 2).sum(-1)
        np.fill_diagonal(d2, np.inf)
        r = self.rows
        r["steps"].append(s.k)
        r["t"].append(s.t)
        r["positions"].append(P.copy())
        r["p_hat"].append(np.array(ph, dtype=float))
        r["c_hat"].append(np.array(ch, dtype=float))
        r["lam_agents"].append(lam)
        r["status"].append(s.status.copy())
        r["err_y"].append(ey)
        r["err_D"].append(eD)
        r["e_norm"].append(float(e_true))
        r["e_agent_max"].append(e_agent)
        r["min_dist"].append(float(np.sqrt(d2.min())) if len(Pa) > 1 else float("nan"))
        r["centroid"].append(pc)
        r["true_lam"].append([basis.lambda1, basis.lambda2])
        r["true_v1"].append(list(basis.v1))
        r["est_err_max"].append(est_max)

    def finish(self) -> TrajectoryLog:
        arrays = {k: np.array(v) for k, v in self.rows.items()}
        return TrajectoryLog(
            mode=self.sc.cfg.mode,
            target=self.sc.cfg.target,
            scenario=self.sc,
            initial_basis=self.initial_basis,
            **arrays,
        )


_LOG_FIELDS = (
    "steps", "t", "positions", "p_hat", "c_hat", "lam_agents", "status", "err_y", "err_D",
    "e_norm", "e_agent_max", "min_dist", "centroid", "true_lam", "true_v1", "est_err_max",
)


def run(cfg: ScenarioConfig | Scenario) -> TrajectoryLog:
    """Integrate a whole scenario; deterministic for a given config."""
    sc = cfg if isinstance(cfg, Scenario) else prepare(cfg)
    state = initial_state(sc)
    rec = _Recorder(sc)
    pending = list(sc.events)

    def fire(k: int):
        while pending and pending[0].step == k:
            _apply_event(state, pending.pop(0), sc)

    fire(0)
    rec.record(state)
    every = sc.cfg.log_every
    for k in range(1, sc.n_steps + 1):
        state = step(state, sc)
        fire(k)
        if k % every == 0 or k == sc.n_steps:
            rec.record(state)
    return rec.finish()


# ---------------------------------------------------------------------------
# analysis


def fit_decay_rate(t, y, window=None) -> float:
    """Least-squares slope of ``log y`` against ``t`` on ``window = (t0, t1)``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is not None:
        t0, t1 = window
        if t0 < t[0] - 1e-12 or t1 > t[-1] + 1e-12 or t1 <= t0:
            raise ValueError(f"window {window} outside run [{t[0]}, {t[-1]}]")
        m = (t >= t0 - 1e-12) & (t <= t1 + 1e-12)
        t, y = t[m], y[m]
    m = y > 0
    if m.sum() < 2:
        raise ValueError("need at least two positive samples to fit a rate")
    slope, _ = np.polyfit(t[m], np.log(y[m]), 1)
    return float(slope)


def _angle(u, v) -> float:
    c = abs(float(np.dot(u, v)))
    return float(math.acos(min(1.0, c)))


def metrics(log_: TrajectoryLog, window=None) -> dict:
    """Summary numbers for a run (see README for the field list)."""
    if len(log_) == 0:
        raise ValueError("empty log")
    t = log_.t
    T = float(t[-1])
    if window is None:
        window = (0.5 * T, T) if T > 0 else None
    out: dict = {"mode": log_.mode, "duration": T, "n_logged": int(len(log_))}
    try:
        out["decay_rate"] = fit_decay_rate(t, log_.e_norm, window) if window is not None else float("nan")
    except ValueError as exc:
        if window is not None and (window[0] < t[0] - 1e-12 or window[1] > t[-1] + 1e-12):
            raise
        log.debug("decay rate unavailable: %s", exc)
        out["decay_rate"] = float("nan")
    out["decay_window"] = list(window) if window is not None else None
    out["min_pairwise_distance"] = float(np.nanmin(log_.min_dist))
    out["max_centroid_drift"] = float(np.max(np.linalg.norm(log_.centroid - log_.centroid[0], axis=1)))
    out["final_true_spectrum"] = [float(x) for x in log_.true_lam[-1]]
    out["final_e_norm"] = float(log_.e_norm[-1])
    out["final_e_agent_max"] = float(log_.e_agent_max[-1])
    q = t >= 0.75 * T
    out["e_norm_final_quarter_mean"] = float(np.mean(log_.e_norm[q]))
    out["e_norm_final_quarter_max"] = float(np.max(log_.e_norm[q]))
    out["e_norm_max"] = float(np.max(log_.e_norm))
    target = log_.target.as_array()
    rel = np.abs(log_.true_lam[-1] - target) / np.where(target > 0, target, 1.0)
    out["final_relative_spectrum_error"] = [float(x) for x in rel]

    if log_.mode == "distributed":
        out["final_err_y"] = [None if np.isnan(x) else float(x) for x in log_.err_y[-1]]
        out["final_err_D"] = [None if np.isnan(x) else float(x) for x in log_.err_D[-1]]
        out["final_est_err_max"] = float(log_.est_err_max[-1])
    else:
        v0 = log_.true_v1[0]
        gap = log_.true_lam[:, 0] - log_.true_lam[:, 1]
        ok = gap > 1e-6 * np.maximum(1.0, log_.true_lam[:, 0])
        out["max_eigvec_angle_drift"] = (
            float(max(_angle(v, v0) for v in log_.true_v1[ok])) if ok.any() else float("nan")
        )
        sc = log_.scenario
        if sc is not None and not sc.events:
            basis0 = eig_sym2(Sym2(*_cov_vec(log_.positions[0])))
            worst = 0.0
            for Pk in log_.positions[1:]:
                cert = scaling_certificate(log_.positions[0], Pk, basis0)
                worst = max(worst, getattr(cert, "residual", getattr(cert, "worst_relative_deviation", 0.0)))
            out["scaling_certificate_residual"] = worst
    sc = log_.scenario
    if sc is not None:
        lam0 = log_.true_lam[0]
        tgt = sc.cfg.target
        tol = 1e-12 * max(1.0, float(lam0[0]))
        out["initial_in_excluded_set"] = bool(
            (tgt.lambda1_star > 0 and lam0[0] <= tol) or (tgt.lambda2_star > 0 and lam0[1] <= tol)
        )
        out["algebraic_connectivity"] = sc.algebraic_connectivity
        out["laplacian_spectral_radius"] = sc.spectral_radius
        out["step_h"] = sc.h
        out["graph_radius"] = sc.graph_radius
        out["n_edges"] = sc.graph.n_edges
        out["events"] = [
            {
                "time": ev.time,
                "kind": ev.kind,
                "agents": [a + 1 for a in ev.agents],
                **({"omega": list(ev.omega)} if ev.kind == "non_cooperative" else {}),
            }
            for ev in sc.events
        ]
    return out


def _cov_vec(P):
    _, C = covariance(P)
    return C.c1, C.c2, C.c3


def richardson_ratio(sc: Scenario, state: SwarmState, h: float) -> float:
    """Ratio of one-step-vs-two-half-steps discrepancies at ``h`` and ``h/2``.

    For a 4th-order method the local discrepancy scales as ``h^5``, so the
    ratio approaches 32.
    """

    def discrepancy(hh: float) -> float:
        one = _rk4_step(state, sc, hh)
        half = _rk4_step(_rk4_step(state, sc, hh / 2), sc, hh / 2)
        a = np.concatenate([one.positions.ravel(), one.estimator.p_hat.ravel(), one.estimator.c_hat.ravel()])
        b = np.concatenate([half.positions.ravel(), half.estimator.p_hat.ravel(), half.estimator.c_hat.ravel()])
        return float(np.linalg.norm(a - b))

    return discrepancy(h) / discrepancy(h / 2)


def with_overrides(cfg: ScenarioConfig, **kw) -> ScenarioConfig:
    kw = {k: v for k, v in kw.items() if v is not None}
    return replace(cfg, **kw)
