"""
===============================================================================
GRADIENT CHECK - CENTRAL FINITE DIFFERENCES VS ANALYTIC BACKWARD
===============================================================================

Purpose:
    Verify analytic gradients of any scalar closure over a ModelParams registry.

Contract for the closure:
    loss_fn(backward: bool) -> float
        - must be deterministic
        - when backward=True it must also ACCUMULATE d(loss)/d(param) into the
          registry's grad buffers (the checker zeroes them first)

Key behaviors:
    - Probes random flat coordinates (seeded), perturbs by +/- step and compares
      (f+ - f-) / 2h against the analytic value.
    - Relative error: |analytic - numeric| / max(1, |numeric|).
    - Probes whose perturbation flips any ReLU on/off pattern (or, with
      kink_margin, moves a ReLU input lying that close to zero) are rejected and
      replaced, so kinks never pollute the report.
    - A closure that returns different values for identical parameters raises
      DeterminismError; accepting fewer probes than requested raises ContractError.

Notes:
    - Run in check precision (float64); at float32 the step of 1e-5 is below
      the noise floor of the forward pass.

===============================================================================
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Tuple

import numpy as np

from numerics.ops_util import track_relu_patterns
from numerics.params_util import ModelParams
from util.errors_util import ConfigError, ContractError, DeterminismError

logger = logging.getLogger("GradientCheck")

FD_STEP = 1e-5


@dataclass
class GradCheckReport:
    max_rel_err: float
    probes: int
    rejected: int
    worst_param: str = ""
    details: List[Tuple[str, int, float, float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "max_rel_err": self.max_rel_err,
            "probes": self.probes,
            "rejected": self.rejected,
            "worst_param": self.worst_param,
        }


def _evaluate(loss_fn: Callable[[bool], float], keep_preactivations: bool = False):
    with track_relu_patterns(keep_preactivations) as patterns:
        value = float(loss_fn(False))
    return value, patterns.digest(), patterns.preactivations


def _near_kink(plus: List[np.ndarray], minus: List[np.ndarray], margin: float) -> bool:
    """True when a ReLU input moved by the perturbation sits within `margin` of zero."""
    for p, m in zip(plus, minus):
        moved = p != m
        if not moved.any():
            continue
        if min(np.abs(p[moved]).min(), np.abs(m[moved]).min()) <= margin:
            return True
    return False


def gradient_check(
    loss_fn: Callable[[bool], float],
    params: ModelParams,
    probe_count: int = 32,
    *,
    seed: int = 0,
    step: float = FD_STEP,
    max_attempts_factor: int = 20,
    kink_margin: float = 0.0,
) -> GradCheckReport:
    """
    Compare analytic and numeric gradients on `probe_count` random coordinates.

    kink_margin > 0 additionally rejects coordinates whose perturbation moves a
    ReLU input lying within kink_margin of zero, even without a pattern flip.

    Returns
    -------
    GradCheckReport
        max_rel_err over accepted probes, number of accepted / rejected probes
        and the parameter path holding the worst probe.

    Raises
    ------
    ContractError
        Fewer than `probe_count` coordinates could be accepted.
    """
    if probe_count < 1:
        raise ConfigError("probe_count must be >= 1")
    if kink_margin < 0:
        raise ConfigError(f"kink_margin must be >= 0, got {kink_margin}")
    if params.dtype != np.float64:
        logger.warning("gradient_check running at %s; check precision expects float64", params.dtype)

    keep = kink_margin > 0
    params.zero_grad()
    base_value = float(loss_fn(True))
    analytic = params.flat_grad().copy()

    repeat_value, base_pattern, _ = _evaluate(loss_fn)
    if repeat_value != base_value:
        raise DeterminismError(
            f"closure is not deterministic: {base_value!r} then {repeat_value!r}"
        )

    rng = np.random.default_rng(seed)
    total = params.total_size
    order = rng.permutation(total)
    max_attempts = min(total, probe_count * max_attempts_factor)

    worst = 0.0
    worst_param = ""
    accepted = 0
    rejected = 0
    details = []

    for flat_index in order[:max_attempts]:
        if accepted >= probe_count:
            break
        block, local = params.locate(int(flat_index))
        flat = block.tensor.reshape(-1)
        original = flat[local]

        flat[local] = original + step
        f_plus, pattern_plus, pre_plus = _evaluate(loss_fn, keep)
        flat[local] = original - step
        f_minus, pattern_minus, pre_minus = _evaluate(loss_fn, keep)
        flat[local] = original

        if pattern_plus != base_pattern or pattern_minus != base_pattern:
            rejected += 1
            continue
        if keep and _near_kink(pre_plus, pre_minus, kink_margin):
            rejected += 1
            continue

        numeric = (f_plus - f_minus) / (2.0 * step)
        a = float(analytic[flat_index])
        rel = abs(a - numeric) / max(1.0, abs(numeric))
        details.append((block.name, int(local), a, numeric, rel))
        accepted += 1
        if rel > worst:
            worst = rel
            worst_param = block.name

    logger.info(
        "gradient check: %d probes accepted, %d rejected at ReLU kinks, max_rel_err=%.3e (%s)",
        accepted, rejected, worst, worst_param or "-",
    )
    if accepted < probe_count:
        raise ContractError(
            f"gradient check accepted {accepted} of {probe_count} coordinates "
            f"({rejected} rejected at ReLU kinks, {min(total, max_attempts)} tried)"
        )
    return GradCheckReport(
        max_rel_err=worst,
        probes=accepted,
        rejected=rejected,
        worst_param=worst_param,
        details=details,
    )
