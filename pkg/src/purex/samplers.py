"""Sequential samplers: LATS and LAGEX, with comparison baselines.

Every algorithm shares one loop:

1. refresh the pessimistic constraint estimate and its polytope,
2. test the GLR statistic against the threshold (stop and recommend),
3. pick a target allocation (this is where the algorithms differ),
4. C-track the target, sample, update the estimates.

Allocation rules
    lats       Frank-Wolfe allocation over the estimated set with the
               previous multiplier, then a new multiplier from the box.
    lagex      AdaGrad ascent on the simplex against optimistic losses
               built from the confusing instance.
    uniform    1/K everywhere.
    ctns, cge  lats / lagex machinery on the true constraint matrix,
               multiplier forced to 0 (cge projects onto the true set).
    ctns_wlag, cge_wlag
               estimated constraints, multiplier forced to 0, allocation
               restricted to the estimated set.
    ptns       unconstrained best-arm allocation projected onto the
               estimated set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _engine as _e
from . import _kernels as _k
from .core import BanditInstance, sample_step
from .estimation import EstimatorState, pessimistic_matrix, update
from .gamesolver import B_MAX, BoundedMeanBox
from .polytope import (
    FeasiblePolytope,
    InfeasiblePolytope,
    constraint_rows,
    contains,
    counterpart_vertex,
    polytope_from_constraints,
    project_simplex,
    simplex_polytope,
)
from .stopping import StoppingConfig, calT

ALGORITHMS = ("lats", "lagex", "uniform", "ctns", "cge", "ptns", "ctns_wlag", "cge_wlag")
BASELINES = ALGORITHMS[2:]
_TRUE_CONSTRAINTS = {"ctns", "cge"}
_NOISE_CHUNK = 4096
_THR_CODES = {"practical": 0, "theoretical": 1, "none": 2}


class TrackingViolation(AssertionError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Learner-side knobs.

    :param sigma2: reward variance assumed by the learner
    :param horizon: step cap; a run reaching it is censored
    :param threshold: ``practical``, ``theoretical`` or ``none`` (never stop, for
        diagnostic traces run to the horizon)
    :param refresh_every: recompute the estimated geometry and the target every m steps
    :param g_mode: ``log`` for g(t) = ln t, ``analysis`` for 3 ln t + ln ln t
    :param lats_domain: ``estimated`` (allocation over the estimated set) or ``simplex``
    :param forced_exploration: mix ``eps = 1/(2 sqrt(t + K^2))`` of uniform into the tracked target
    :param violation_on: ``target`` (omega_t) or ``empirical`` (N_t / t)
    """

    sigma2: float = 1.0
    horizon: int = 1_000_000
    threshold: str = "practical"
    S0: Optional[int] = None
    v: float = 1.0
    fw_budget: int = 300
    refresh_every: int = 1
    eta: float = 1.0
    adagrad_eps: float = 1e-8
    g_mode: str = "log"
    lats_domain: str = "estimated"
    forced_exploration: bool = True
    b_max: float = B_MAX
    mean_box_margin: float = 1.0
    violation_on: str = "target"
    check_tracking: bool = True
    log_every: int = 0
    trace_stride: int = 0

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError("learner sigma2 must be positive")
        if self.threshold not in _THR_CODES:
            raise ValueError(f"threshold must be one of {tuple(_THR_CODES)}")
        if self.refresh_every < 1:
            raise ValueError("refresh_every must be >= 1")
        if self.g_mode not in ("log", "analysis"):
            raise ValueError("g_mode must be 'log' or 'analysis'")
        if self.lats_domain not in ("estimated", "simplex"):
            raise ValueError("lats_domain must be 'estimated' or 'simplex'")
        if self.violation_on not in ("target", "empirical"):
            raise ValueError("violation_on must be 'target' or 'empirical'")


@dataclass
class RunState:
    """Mutable per-run state; arrays are updated in place by each step."""

    counts: np.ndarray
    reward_sums: np.ndarray
    cost_sums: np.ndarray
    cum_alloc: np.ndarray
    multiplier: np.ndarray
    adagrad_sq: np.ndarray
    omega: np.ndarray
    target: np.ndarray
    scalars: np.ndarray
    v: float = 1.0
    # geometry of the current estimated set (vertices, tight rows, rows, A_tilde)
    vertices: Optional[np.ndarray] = None
    active: Optional[np.ndarray] = None
    rows: Optional[np.ndarray] = None
    A_tilde: Optional[np.ndarray] = None
    log: list = field(default_factory=list)
    trace: list = field(default_factory=list)

    @property
    def t(self) -> int:
        return int(self.scalars[_e.T])

    @property
    def stopped(self) -> bool:
        return bool(self.scalars[_e.STOPPED])

    @property
    def cum_violation(self) -> float:
        return float(self.scalars[_e.CUM_VIOL])

    @property
    def max_tracking_dev(self) -> float:
        return float(self.scalars[_e.MAX_DEV])

    @property
    def recommendation(self) -> Optional[np.ndarray]:
        if not self.stopped:
            return None
        return np.array(self.vertices[int(self.scalars[_e.REC_IDX])])

    @property
    def estimator(self) -> EstimatorState:
        K, d = self.counts.shape[0], self.cost_sums.shape[0]
        return EstimatorState(
            K, d, self.v, self.counts.astype(np.int64), self.reward_sums.copy(), self.cost_sums.copy(), self.t
        )


@dataclass(frozen=True)
class RunRecord:
    """Outcome of one seeded run.

    ``recommendation`` is the vertex of the estimated set returned at the
    stop.  ``identified_policy`` is the same vertex (same tight rows) solved
    with the true constraints; ``correct`` and ``feasible`` are judged on it.
    """

    seed: int
    algorithm: str
    tau: int
    recommendation: tuple
    identified_policy: Optional[tuple]
    correct: bool
    feasible: bool
    cum_violation: float
    censored: bool
    rec_violation: float
    max_tracking_dev: float
    final_stat: float
    final_threshold: float
    log: tuple = ()
    trace: tuple = ()


def ctrack_next(counts, cum_alloc) -> int:
    """Arm minimising ``N_a - sum_s omega_{a,s}``; lowest index on ties."""
    return int(_k.ctrack_argmin(np.asarray(counts, dtype=float), np.asarray(cum_alloc, dtype=float)))


def exploration_g(t: int, mode: str = "log") -> float:
    t = max(t, 3)
    if mode == "log":
        return math.log(t)
    return 3.0 * math.log(t) + math.log(math.log(t))


def half_width(g: float, counts, sigma2: float) -> np.ndarray:
    """Half-width ``sqrt(2 sigma2 g / N_a)`` of the per-arm confidence interval."""
    return np.sqrt(2.0 * sigma2 * g / np.asarray(counts, dtype=float))


def optimistic_losses(mu_hat, lam, counts, g: float, sigma2: float) -> np.ndarray:
    """``U_a = max(g / N_a, d(mu_a - h_a, lam_a), d(mu_a + h_a, lam_a))``."""
    mu_hat = np.asarray(mu_hat, dtype=float)
    counts = np.asarray(counts, dtype=float)
    h = half_width(g, counts, sigma2)
    lo = (mu_hat - h - lam) ** 2 / (2.0 * sigma2)
    hi = (mu_hat + h - lam) ** 2 / (2.0 * sigma2)
    return np.maximum(g / counts, np.maximum(lo, hi))


def adagrad_step(omega, grad, acc, eta: float = 1.0, eps: float = 1e-8, Q: float = np.inf):
    """Clipped AdaGrad ascent step followed by projection onto the simplex.

    :return: ``(new omega, new accumulator)``
    """
    grad = np.clip(np.asarray(grad, dtype=float), -Q, Q)
    acc = np.asarray(acc, dtype=float) + grad**2
    return project_simplex(np.asarray(omega, dtype=float) + eta * grad / np.sqrt(acc + eps)), acc


class RunContext:
    """Immutable inputs of one run plus its private generator and noise buffer."""

    def __init__(self, algorithm: str, instance: BanditInstance, seed: int, config: Optional[RunConfig] = None):
        if algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
        config = RunConfig() if config is None else config
        self.algorithm = algorithm
        self.code = _e.CODES[algorithm]
        self.inst = instance
        self.cfg = config
        self.seed = int(seed)
        self.rng = np.random.default_rng(seed)
        self.K, self.d = instance.K, instance.d
        self.A = np.array(instance.constraints, dtype=float, order="C")
        self.means = np.array(instance.means, dtype=float)
        self.stopping = StoppingConfig(mode=config.threshold, delta=instance.delta, S0=config.S0)
        self.S0 = self.K if config.S0 is None else int(config.S0)
        self.thr_const = 0.0
        if config.threshold == "theoretical":
            self.thr_const = self.S0 * calT((min(self.K, self.d) + math.log(1.0 / instance.delta)) / self.S0)
        self.true_poly = polytope_from_constraints(self.A, with_adjacency=False)
        # writable copies: the compiled loop swaps these in as its geometry
        self._true_geom = (np.array(self.true_poly.vertices), np.array(self.true_poly.active), np.array(self.true_poly.G))
        self.G_true, self.h_true = constraint_rows(self.A)
        self.simplex = simplex_polytope(self.K)
        self.Q = BoundedMeanBox.around(instance.means, config.mean_box_margin).loss_bound(config.sigma2)
        self.log_K_delta = 0.5 * math.log(self.K / instance.delta)
        self.noise = np.zeros((0, 1 + self.d))

    def refill(self, state: RunState) -> None:
        self.noise = self.rng.standard_normal((_NOISE_CHUNK, 1 + self.d))
        state.scalars[_e.NOISE_POS] = 0


def init_state(ctx: RunContext) -> RunState:
    """Pull every arm once (the warm start shared by all algorithms)."""
    K, d = ctx.K, ctx.d
    est = EstimatorState(K, d, v=ctx.cfg.v)
    for a in range(K):
        update(est, sample_step(ctx.inst, a, ctx.rng, t=a))
    scal = np.zeros(_e.N_SCALARS)
    scal[_e.T] = K
    scal[_e.LAST_BETA] = np.inf
    scal[_e.REC_IDX] = -1
    return RunState(
        counts=est.counts.astype(float),
        reward_sums=est.reward_sums.copy(),
        cost_sums=np.ascontiguousarray(est.cost_sums),
        cum_alloc=np.ones(K),
        multiplier=np.zeros(d),
        adagrad_sq=np.zeros(K),
        omega=np.full(K, 1.0 / K),
        target=np.full(K, 1.0 / K),
        scalars=scal,
        v=float(ctx.cfg.v),
        vertices=np.eye(K),
        active=np.zeros((K, K), dtype=bool),
        rows=-np.eye(K),
        A_tilde=np.zeros((d, K)),
    )


def _advance(state: RunState, ctx: RunContext, max_steps: int, pause_every: int = 0) -> None:
    """Run the compiled loop until it stops or pauses; the horizon and ``max_steps`` both cap it."""
    cfg = ctx.cfg
    inst = ctx.inst
    Vt, At, Gt = ctx._true_geom
    done = 0
    while done < max_steps and not state.stopped and state.t < cfg.horizon:
        if state.scalars[_e.NOISE_POS] >= ctx.noise.shape[0]:
            ctx.refill(state)
        t0 = state.t
        V, act, G, A_til = _e.advance(
            ctx.code, ctx.A, ctx.means, math.sqrt(inst.sigma2), inst.cost_noise_sd, inst.r, cfg.sigma2, cfg.v,
            ctx.log_K_delta, _THR_CODES[cfg.threshold], ctx.thr_const, float(ctx.S0), inst.delta,
            cfg.horizon, cfg.refresh_every, cfg.fw_budget, cfg.eta, cfg.adagrad_eps, 0 if cfg.g_mode == "log" else 1,
            cfg.lats_domain == "simplex", cfg.forced_exploration, cfg.b_max, ctx.Q, cfg.violation_on == "target",
            cfg.check_tracking,
            Vt, At, Gt,
            state.counts, state.reward_sums, state.cost_sums, state.cum_alloc, state.multiplier,
            state.adagrad_sq, state.omega, state.target, state.scalars,
            state.vertices, state.active, state.rows, state.A_tilde, ctx.noise, max_steps - done, pause_every,
        )
        state.vertices, state.active, state.rows, state.A_tilde = V, act, G, A_til
        done += state.t - t0
        if state.scalars[_e.TRACK_FAIL]:
            raise TrackingViolation(
                f"tracking deviation {state.max_tracking_dev:.3f} exceeds K(1+sqrt t) at t={state.t}"
            )
        if pause_every and state.t % pause_every == 0 and state.t > t0:
            break


def step(state: RunState, ctx: RunContext) -> RunState:
    """One iteration: refresh, stopping test, target, C-track, sample, update.

    When the stopping rule fires the state is marked stopped and no sample is
    drawn.
    """
    _advance(state, ctx, 1)
    return state


def lats_step(state: RunState, ctx: RunContext) -> RunState:
    if ctx.algorithm != "lats":
        raise ValueError("context was built for a different algorithm")
    return step(state, ctx)


def lagex_step(state: RunState, ctx: RunContext) -> RunState:
    if ctx.algorithm != "lagex":
        raise ValueError("context was built for a different algorithm")
    return step(state, ctx)


def estimated_polytope(state: RunState, ctx: RunContext) -> FeasiblePolytope:
    """Polytope the learner would use at the current step (true set for ctns/cge)."""
    if ctx.algorithm in _TRUE_CONSTRAINTS:
        return ctx.true_poly
    if ctx.d == 0:
        return ctx.simplex
    model = pessimistic_matrix(state.estimator, ctx.inst.delta)
    try:
        return polytope_from_constraints(model.A_tilde, with_adjacency=False)
    except InfeasiblePolytope:
        return ctx.simplex


def _violation(A: np.ndarray, w) -> float:
    if A.shape[0] == 0:
        return 0.0
    return float(max(np.max(A @ np.asarray(w)), 0.0))


def _finalize(state: RunState, ctx: RunContext, censored: bool) -> RunRecord:
    inst = ctx.inst
    if state.stopped:
        idx = int(state.scalars[_e.REC_IDX])
        V, act, G = state.vertices, state.active, state.rows
        fallback = bool(state.scalars[_e.FALLBACK])
    else:
        poly = estimated_polytope(state, ctx)
        mu = state.reward_sums / (state.v + state.counts)
        idx = int(np.argmax(poly.vertices @ mu))
        V, act, G = poly.vertices, poly.active, poly.G
        fallback = poly.n_constraints != ctx.d
    rec = np.array(V[idx])
    ident = None
    if not fallback:
        view = FeasiblePolytope(G=G, h=np.zeros(G.shape[0]), vertices=V, active=act, adjacency=(), n_constraints=ctx.d)
        ident = counterpart_vertex(view, idx, ctx.G_true, ctx.h_true)
    feasible = ident is not None and contains(ctx.true_poly, ident, tol=1e-7)
    correct = False
    if feasible:
        best = float(np.max(ctx.true_poly.vertices @ inst.means))
        correct = float(inst.means @ ident) + inst.r >= best - 1e-9
    return RunRecord(
        seed=ctx.seed,
        algorithm=ctx.algorithm,
        tau=state.t,
        recommendation=tuple(float(x) for x in rec),
        identified_policy=None if ident is None else tuple(float(x) for x in ident),
        correct=bool(correct),
        feasible=bool(feasible),
        cum_violation=state.cum_violation,
        censored=bool(censored),
        rec_violation=_violation(ctx.A, rec),
        max_tracking_dev=state.max_tracking_dev,
        final_stat=float(state.scalars[_e.LAST_STAT]),
        final_threshold=float(state.scalars[_e.LAST_BETA]),
        log=tuple(state.log),
        trace=tuple(state.trace),
    )


def _run_with_hooks(state: RunState, ctx: RunContext) -> None:
    """Loop with pauses for the per-step log and the feasible-set trace."""
    cfg = ctx.cfg
    K = ctx.K
    strides = [s for s in (cfg.log_every, cfg.trace_stride) if s]
    pause = math.gcd(*strides) if len(strides) > 1 else strides[0]
    pending = None
    while not state.stopped and state.t < cfg.horizon:
        t = state.t
        if cfg.trace_stride and (t == K or t % cfg.trace_stride == 0) and (not state.trace or state.trace[-1][0] != t):
            pending = (t, np.array(estimated_polytope(state, ctx).vertices))
        _advance(state, ctx, cfg.horizon, pause_every=pause)
        if pending is not None:
            # snapshots are kept only for steps at which the run continued
            if not (state.stopped and state.t == pending[0]):
                state.trace.append(pending)
            pending = None
        if cfg.log_every and state.t % cfg.log_every == 0 and not (state.stopped and state.t == t):
            state.log.append(
                (state.t, int(state.scalars[_e.LAST_ARM]), float(state.scalars[_e.LAST_STAT]),
                 float(state.scalars[_e.LAST_BETA]), state.cum_violation)
            )


def run(algorithm: str, instance: BanditInstance, seed: int, config: Optional[RunConfig] = None) -> RunRecord:
    """Run one algorithm until the stopping rule fires or the horizon is hit."""
    config = RunConfig() if config is None else config
    if config.horizon < instance.K:
        raise ValueError("horizon must be at least K")
    ctx = RunContext(algorithm, instance, seed, config)
    state = init_state(ctx)
    if config.log_every or config.trace_stride:
        _run_with_hooks(state, ctx)
    else:
        _advance(state, ctx, config.horizon)
    return _finalize(state, ctx, censored=not state.stopped)


def run_baseline(algorithm: str, instance: BanditInstance, seed: int, config: Optional[RunConfig] = None) -> RunRecord:
    if algorithm not in BASELINES:
        raise ValueError(f"unknown baseline {algorithm!r}; expected one of {BASELINES}")
    return run(algorithm, instance, seed, config)
