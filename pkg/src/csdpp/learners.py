"""Streaming multi-label learners.

Seven algorithms behind one factory:

  dpp-pbc / dpp-pbt / dpp-naive
      dimension-reduced learners driven by the capped spectral tracker with
      uniform label scaling 1/sqrt(K); the suffix picks the regression head
      (label-space head composed with the sampled basis, basis-transformed
      code head, or uncorrected code head).
  cs-dpp-pbc / cs-dpp-pbt
      same machinery with per-instance, per-label cost weights extracted from
      the configured cost around the current prediction.
  o-br
      online binary relevance: one ridge (or SGD) head on raw labels.
  o-rand
      fixed seeded Gaussian projection of the label space with a ridge head on
      the projected targets, decoded through the pseudo-inverse.

Every step runs: predict with the current sampled basis, decode, price the
prediction, update the spectral state with the (weighted) label direction,
sample the next basis, update the regression head.  All encoder variants
consume identical randomness (one sampler draw per step plus one at
construction), so seed-matched runs are paired comparisons.

The per-step audit (opt-in) checks the decoding cost bound
cost <= ||code - P C y||^2 + ||(I - P^T P) C y||^2 with C the weight diagonal
actually used, and counts violations beyond tolerance.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import costs as costs_mod
from .linalg import TOL
from .online_pca import CappedMsgState, default_eta_schedule
from .regressor import (
    CodeRidge,
    LabelSpaceRidge,
    SgdHead,
    SgdTransformedHead,
    TransformedCodeRidge,
    suggest_engine,
)
from .stream import (
    PURPOSE_RANDOM_PROJECTION,
    PURPOSE_SAMPLER,
    Instance,
    substream,
)

__all__ = [
    "ALGORITHMS",
    "LearnerConfig",
    "PredictionRecord",
    "decode",
    "make_learner",
    "play",
    "DppLearner",
    "BinaryRelevanceLearner",
    "RandomProjectionLearner",
]

ALGORITHMS = (
    "dpp-pbc",
    "dpp-pbt",
    "dpp-naive",
    "cs-dpp-pbc",
    "cs-dpp-pbt",
    "o-br",
    "o-rand",
)

_VARIANT = {  # algorithm -> (regression head variant, cost-weighted?)
    "dpp-pbc": ("pbc", False),
    "dpp-pbt": ("pbt", False),
    "dpp-naive": ("naive", False),
    "cs-dpp-pbc": ("pbc", True),
    "cs-dpp-pbt": ("pbt", True),
}


def decode(basis: np.ndarray, code: np.ndarray, offset: np.ndarray | None = None) -> np.ndarray:
    """Componentwise sign of basis^T code (+ offset); sign(0) resolves to +1."""
    v = basis.T @ code
    if offset is not None:
        v = v + offset
    return np.where(v >= 0.0, 1, -1).astype(np.int8)


@dataclass(frozen=True)
class LearnerConfig:
    """Construction-time knobs; anything unset falls back to the defaults here."""

    algorithm: str = "cs-dpp-pbc"
    m: int | None = None            # code dimension; wins over m_frac when set
    m_frac: float = 0.25            # fraction of K, rounded; the learner checks the legal range
    cost: str = "hamming"
    seed: int = 0
    lam: float = 1.0
    eta_scale: float = 2.0
    engine: str = "ridge"           # ridge | sgd | auto
    sgd_step_scale: float = 1.0
    label_order: str = "native"     # native | random
    order_seed: int | None = None
    refresh_every: int = 10_000
    trust_cost: bool = False        # skip the decomposition probe for custom costs
    audit: bool = False             # per-step decoding-bound audit

    def resolve_m(self, k: int) -> int:
        if self.m is not None:
            m = int(self.m)
        else:
            m = int(round(self.m_frac * k))
        return m

    def resolve_engine(self, d: int, k: int) -> str:
        if self.engine == "auto":
            return suggest_engine(d, k)
        if self.engine not in ("ridge", "sgd"):
            raise ValueError(f"unknown engine {self.engine!r}")
        return self.engine


@dataclass
class PredictionRecord:
    """One step's outcome: prediction, its price under the configured cost, wall time."""

    t: int
    y_hat: np.ndarray
    incurred_cost: float
    elapsed: float


@dataclass
class AuditTrail:
    checks: int = 0
    violations: int = 0
    max_gap: float = field(default=-np.inf)

    def observe(self, gap: float) -> None:
        self.checks += 1
        self.max_gap = max(self.max_gap, gap)
        if gap > TOL.bound_audit:
            self.violations += 1


def _resolve_order(config: LearnerConfig, k: int) -> np.ndarray:
    if config.label_order == "native":
        return costs_mod.native_order(k)
    if config.label_order == "random":
        seed = config.seed if config.order_seed is None else config.order_seed
        return costs_mod.random_order(k, seed)
    raise ValueError(f"unknown label order {config.label_order!r}")


def _resolve_cost(config: LearnerConfig, k: int) -> costs_mod.CostFunction:
    cost = costs_mod.get_cost(config.cost)
    if not cost.condition_verified and not config.trust_cost:
        probe = costs_mod.check_condition(cost, trials=2000, k_max=max(2, k), seed=config.seed)
        if not probe.passed:
            raise ValueError(
                f"cost {cost.name!r} violates the decomposition condition "
                f"(witness: {probe.violations[0]}); set trust_cost to override"
            )
    return cost


class DppLearner:
    """Dimension-reduced learner over the capped spectral tracker."""

    def __init__(self, config: LearnerConfig, d: int, k: int):
        variant, weighted = _VARIANT[config.algorithm]
        m = config.resolve_m(k)
        if not 1 <= m < k:
            raise ValueError(f"code dimension must satisfy 1 <= M < K, got M={m} K={k}")
        engine = config.resolve_engine(d, k)
        self.config = config
        self.d = d
        self.k = k
        self.m = m
        self.variant = variant
        self.engine = engine
        self.cost = _resolve_cost(config, k)
        self.weighted = weighted
        self.order = _resolve_order(config, k)
        self.msg = CappedMsgState.initialize(
            k, m, config.seed, default_eta_schedule(m, k, config.eta_scale)
        )
        self.rng_sampler = substream(config.seed, PURPOSE_SAMPLER)
        self.basis = self.msg.sample_projection(self.rng_sampler)
        self.t = 0
        self.audit = AuditTrail() if config.audit else None
        self._uniform_sqrt_w = np.sqrt(np.full(k, 1.0 / k))
        if engine == "ridge":
            if variant == "pbc":
                self.head = LabelSpaceRidge(d, k, config.lam, config.refresh_every)
            elif variant == "pbt":
                self.head = TransformedCodeRidge(d, self.basis, config.lam, config.refresh_every)
            else:
                self.head = CodeRidge(d, m, config.lam, config.refresh_every)
        else:
            if variant == "pbt":
                self.head = SgdTransformedHead(d, self.basis)
            else:
                self.head = SgdHead(d, k if variant == "pbc" else m)

    def _sqrt_weights(self, y: np.ndarray, y_hat: np.ndarray) -> np.ndarray:
        if not self.weighted:
            return self._uniform_sqrt_w
        return costs_mod.label_weights(self.cost, y, y_hat, self.order).sqrt_deltas

    def predict_code(self, x: np.ndarray) -> np.ndarray:
        if self.variant == "pbc":
            return self.head.predict_through(x, self.basis)
        return self.head.predict(x)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return decode(self.basis, self.predict_code(x))

    def step(self, x: np.ndarray, y: np.ndarray) -> PredictionRecord:
        start = time.perf_counter()
        self.t += 1
        basis = self.basis
        code = self.predict_code(x)
        y_hat = decode(basis, code)
        incurred = self.cost(y, y_hat)

        sqrt_w = self._sqrt_weights(y, y_hat)
        target = sqrt_w * y
        if self.audit is not None:
            enc = basis @ target
            residual = target - basis.T @ enc
            rhs = float(np.sum((code - enc) ** 2) + np.sum(residual**2))
            lhs = incurred if self.weighted else costs_mod.hamming_loss(y, y_hat)
            self.audit.observe(lhs - rhs)

        direction = target
        norm = float(np.linalg.norm(direction))
        if norm > 1.0 + TOL.unit_norm_slack:  # weight mass can exceed 1 for some costs
            direction = direction / norm
        self.msg.update(direction, self.t)
        new_basis = self.msg.sample_projection(self.rng_sampler)

        if self.engine == "ridge":
            if self.variant == "pbc":
                self.head.update(x, target)
            elif self.variant == "pbt":
                self.head.update(x, target, new_basis)
            else:
                self.head.update(x, basis @ target)
        else:
            step_size = self.config.sgd_step_scale / np.sqrt(self.t)
            if self.variant == "pbt":
                self.head.update_transformed(x, target, new_basis, step_size)
            elif self.variant == "pbc":
                self.head.update(x, target, step_size)
            else:
                self.head.update(x, basis @ target, step_size)
        self.basis = new_basis
        return PredictionRecord(self.t, y_hat, incurred, time.perf_counter() - start)

    def regret_snapshot(self) -> dict:
        """State entering the next step, for expected-regret accounting."""
        if self.variant != "pbc" or self.engine != "ridge":
            raise ValueError("regret accounting needs the ridge label-space head")
        return {
            "q": self.msg.q.copy(),
            "sigma": self.msg.sigma.copy(),
            "h": self.head.h.copy(),
        }

    def to_snapshot(self) -> dict:
        return {
            "kind": "dpp-learner",
            "version": 1,
            "algorithm": self.config.algorithm,
            "t": self.t,
            "msg": self.msg.to_snapshot(),
            "head": self.head.to_snapshot(),
            "basis": self.basis.tolist(),
            "sampler_state": self.rng_sampler.bit_generator.state,
        }

    @classmethod
    def from_snapshot(cls, config: LearnerConfig, d: int, k: int, snap: dict) -> "DppLearner":
        if snap.get("kind") != "dpp-learner":
            raise ValueError("unrecognized snapshot payload")
        learner = cls(config, d, k)
        learner.t = int(snap["t"])
        learner.msg = CappedMsgState.from_snapshot(snap["msg"])
        learner.basis = np.array(snap["basis"], dtype=np.float64)
        learner.rng_sampler.bit_generator.state = snap["sampler_state"]
        learner.head = type(learner.head).from_snapshot(snap["head"])
        return learner


class BinaryRelevanceLearner:
    """One regression head straight on the +-1 labels; no reduction."""

    def __init__(self, config: LearnerConfig, d: int, k: int):
        self.config = config
        self.d = d
        self.k = k
        self.cost = _resolve_cost(config, k)
        self.engine = config.resolve_engine(d, k)
        if self.engine == "ridge":
            self.head = LabelSpaceRidge(d, k, config.lam, config.refresh_every)
        else:
            self.head = SgdHead(d, k)
        self.t = 0

    def predict(self, x: np.ndarray) -> np.ndarray:
        raw = self.head.predict_raw(x)
        return np.where(raw >= 0.0, 1, -1).astype(np.int8)

    def step(self, x: np.ndarray, y: np.ndarray) -> PredictionRecord:
        start = time.perf_counter()
        self.t += 1
        y_hat = self.predict(x)
        incurred = self.cost(y, y_hat)
        target = y.astype(np.float64)
        if self.engine == "ridge":
            self.head.update(x, target)
        else:
            self.head.update(x, target, self.config.sgd_step_scale / np.sqrt(self.t))
        return PredictionRecord(self.t, y_hat, incurred, time.perf_counter() - start)

    def to_snapshot(self) -> dict:
        return {"kind": "obr-learner", "version": 1, "t": self.t, "head": self.head.to_snapshot()}

    @classmethod
    def from_snapshot(cls, config: LearnerConfig, d: int, k: int, snap: dict) -> "BinaryRelevanceLearner":
        learner = cls(config, d, k)
        learner.t = int(snap["t"])
        learner.head = type(learner.head).from_snapshot(snap["head"])
        return learner


class RandomProjectionLearner:
    """Fixed seeded Gaussian label projection with a code-space ridge head."""

    def __init__(self, config: LearnerConfig, d: int, k: int):
        m = config.resolve_m(k)
        if not 1 <= m <= k:
            raise ValueError(f"code dimension must satisfy 1 <= M <= K, got M={m} K={k}")
        self.config = config
        self.d = d
        self.k = k
        self.m = m
        self.cost = _resolve_cost(config, k)
        self.engine = config.resolve_engine(d, k)
        rng = substream(config.seed, PURPOSE_RANDOM_PROJECTION)
        self.projection = rng.standard_normal((m, k))
        self.decoder = np.linalg.pinv(self.projection)  # K x M
        if self.engine == "ridge":
            self.head = CodeRidge(d, m, config.lam, config.refresh_every)
        else:
            self.head = SgdHead(d, m)
        self.t = 0

    def predict(self, x: np.ndarray) -> np.ndarray:
        code = self.head.predict(x)
        return np.where(self.decoder @ code >= 0.0, 1, -1).astype(np.int8)

    def step(self, x: np.ndarray, y: np.ndarray) -> PredictionRecord:
        start = time.perf_counter()
        self.t += 1
        y_hat = self.predict(x)
        incurred = self.cost(y, y_hat)
        target = self.projection @ y.astype(np.float64)
        if self.engine == "ridge":
            self.head.update(x, target)
        else:
            self.head.update(x, target, self.config.sgd_step_scale / np.sqrt(self.t))
        return PredictionRecord(self.t, y_hat, incurred, time.perf_counter() - start)

    def to_snapshot(self) -> dict:
        return {"kind": "orand-learner", "version": 1, "t": self.t, "head": self.head.to_snapshot()}

    @classmethod
    def from_snapshot(cls, config: LearnerConfig, d: int, k: int, snap: dict) -> "RandomProjectionLearner":
        learner = cls(config, d, k)
        learner.t = int(snap["t"])
        learner.head = type(learner.head).from_snapshot(snap["head"])
        return learner


def make_learner(config: LearnerConfig, d: int, k: int):
    if config.algorithm in _VARIANT:
        return DppLearner(config, d, k)
    if config.algorithm == "o-br":
        return BinaryRelevanceLearner(config, d, k)
    if config.algorithm == "o-rand":
        return RandomProjectionLearner(config, d, k)
    raise ValueError(f"unknown algorithm {config.algorithm!r}; available: {ALGORITHMS}")


def play(learner, instances: list[Instance]) -> list[PredictionRecord]:
    """Run the learner over the stream in order; one record per step."""
    return [learner.step(inst.features, inst.labels) for inst in instances]
