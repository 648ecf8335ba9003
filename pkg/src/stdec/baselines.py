"""Reference commit policies sharing the adaptive decoder's loop machinery."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DecoderConfig, DecodeState, StepPrediction
from .decoder import Policy, StdecPolicy, StepOutcome
from .errors import ConfigError, DecodeError


@dataclass(frozen=True)
class BaselineConfig:
    """Knobs for the reference policies.

    ``k``: commits per step for top-k. ``tau``: single fixed threshold.
    ``tau_anchor`` / ``tau_neighbor`` / ``anchor_radius``: dual-threshold
    rule where positions near a high-confidence anchor clear a lower bar;
    equal thresholds degrade to the fixed rule.
    """

    k: int = 1
    tau: float = 0.9
    tau_anchor: float = 0.9
    tau_neighbor: float = 0.7
    anchor_radius: int = 1

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError(f"tau must be in (0, 1], got {self.tau}")
        if not 0.0 < self.tau_neighbor <= self.tau_anchor <= 1.0:
            raise ConfigError(
                f"need 0 < tau_neighbor <= tau_anchor <= 1, got "
                f"tau_neighbor={self.tau_neighbor}, tau_anchor={self.tau_anchor}"
            )
        if self.anchor_radius < 1:
            raise ConfigError(f"anchor_radius must be >= 1, got {self.anchor_radius}")


def _outcome(
    pred: StepPrediction, chosen: np.ndarray, fallback_used: bool
) -> StepOutcome:
    chosen = np.sort(np.asarray(chosen, dtype=np.int64))
    return StepOutcome(
        prediction=pred,
        thresholds=None,
        committed=chosen,
        committed_ids=pred.ids_at(chosen),
        fallback_used=fallback_used,
    )


def _check_eligible(eligible: np.ndarray) -> np.ndarray:
    eligible = np.asarray(eligible, dtype=np.int64)
    if eligible.size == 0:
        raise DecodeError("no eligible positions to select from")
    return eligible


def topk_commit(pred: StepPrediction, eligible: np.ndarray, k: int) -> StepOutcome:
    """Commit the k most confident eligible positions (ties: lowest index)."""
    eligible = _check_eligible(eligible)
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    confs = pred.conf_at(eligible)
    # lexsort's last key dominates; positions ascending break confidence ties.
    order = np.lexsort((eligible, -confs))
    chosen = eligible[order[: min(k, eligible.size)]]
    return _outcome(pred, chosen, fallback_used=False)


def fixed_threshold_commit(
    pred: StepPrediction, eligible: np.ndarray, tau: float
) -> StepOutcome:
    """Commit positions with confidence >= tau; argmax fallback when none."""
    eligible = _check_eligible(eligible)
    if not 0.0 < tau <= 1.0:
        raise ConfigError(f"tau must be in (0, 1], got {tau}")
    confs = pred.conf_at(eligible)
    chosen = eligible[confs >= tau]
    if chosen.size > 0:
        return _outcome(pred, chosen, fallback_used=False)
    best = int(np.argmax(confs))
    return _outcome(pred, eligible[best : best + 1], fallback_used=True)


def anchor_dual_commit(
    pred: StepPrediction, eligible: np.ndarray, bcfg: BaselineConfig
) -> StepOutcome:
    """Dual-threshold rule: anchors clear tau_anchor, their neighbors tau_neighbor.

    A position within ``anchor_radius`` of some anchor commits already at
    the lower neighbor threshold. With tau_neighbor == tau_anchor this is
    exactly the fixed-threshold rule.
    """
    eligible = _check_eligible(eligible)
    confs = pred.conf_at(eligible)
    anchors = eligible[confs >= bcfg.tau_anchor]
    near = np.zeros(eligible.size, dtype=bool)
    if anchors.size > 0:
        dist = np.abs(eligible[:, None] - anchors[None, :]).min(axis=1)
        near = dist <= bcfg.anchor_radius
    chosen = eligible[(confs >= bcfg.tau_anchor) | (near & (confs >= bcfg.tau_neighbor))]
    if chosen.size > 0:
        return _outcome(pred, chosen, fallback_used=False)
    best = int(np.argmax(confs))
    return _outcome(pred, eligible[best : best + 1], fallback_used=True)


def half_step_commit(pred: StepPrediction, eligible: np.ndarray) -> StepOutcome:
    """Commit the most confident half (ceil) of the eligible positions."""
    eligible = _check_eligible(eligible)
    confs = pred.conf_at(eligible)
    n = (eligible.size + 1) // 2
    order = np.lexsort((eligible, -confs))
    return _outcome(pred, eligible[order[:n]], fallback_used=False)


class TopKPolicy:
    name = "top_k"

    def __init__(self, k: int = 1):
        self.k = k

    def params(self) -> dict:
        return {"k": self.k}

    def select(self, state, pred, eligible, cfg, gate_conf) -> StepOutcome:
        return topk_commit(pred, eligible, self.k)


class FixedThresholdPolicy:
    name = "fixed"

    def __init__(self, tau: float = 0.9):
        self.tau = tau

    def params(self) -> dict:
        return {"tau": self.tau}

    def select(self, state, pred, eligible, cfg, gate_conf) -> StepOutcome:
        return fixed_threshold_commit(pred, eligible, self.tau)


class AnchorDualPolicy:
    name = "anchor_dual"

    def __init__(self, tau_anchor: float = 0.9, tau_neighbor: float = 0.7, anchor_radius: int = 1):
        self.bcfg = BaselineConfig(
            tau_anchor=tau_anchor, tau_neighbor=tau_neighbor, anchor_radius=anchor_radius
        )

    def params(self) -> dict:
        return {
            "tau_anchor": self.bcfg.tau_anchor,
            "tau_neighbor": self.bcfg.tau_neighbor,
            "anchor_radius": self.bcfg.anchor_radius,
        }

    def select(self, state, pred, eligible, cfg, gate_conf) -> StepOutcome:
        return anchor_dual_commit(pred, eligible, self.bcfg)


class HalfStepPolicy:
    name = "half_step"

    def params(self) -> dict:
        return {}

    def select(self, state, pred, eligible, cfg, gate_conf) -> StepOutcome:
        return half_step_commit(pred, eligible)


POLICY_NAMES = ("stdec", "top_k", "fixed", "anchor_dual", "half_step")


def build_policy(name: str, params: dict | None = None) -> Policy:
    """Instantiate a policy by registry name with keyword parameters."""
    params = dict(params or {})
    try:
        if name == "stdec":
            return StdecPolicy(**params)
        if name == "top_k":
            return TopKPolicy(**params)
        if name == "fixed":
            return FixedThresholdPolicy(**params)
        if name == "anchor_dual":
            return AnchorDualPolicy(**params)
        if name == "half_step":
            return HalfStepPolicy(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for policy {name!r}: {exc}") from exc
    raise ConfigError(f"unknown policy {name!r} (known: {', '.join(POLICY_NAMES)})")
