"""One-at-a-time sensitivity analysis of simulated policy outcomes.

Two modes:

* Linear — scale the baseline outputs by (1 + delta) for the declared-linear
  output (expected profit); profit std dev and the lost-order fraction are
  never scaled (a fraction cannot scale multiplicatively and stay in [0, 1])
  and are copied with a requires-resimulation marker.
* Resimulate — perturb the named policy variable, round to integer units,
  and rerun the replications under the baseline seed (common random
  numbers), so a zero delta reproduces the baseline bit-exactly.

Emitted rows cover every (delta, product) pair in a fixed order: variable,
then delta, then product.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

from .catalog import Catalog, ProductSpec
from .errors import ConfigError
from .simengine import (
    ContinuousReview,
    PeriodicReview,
    PolicyParams,
    ReplicationStats,
    SimConfig,
    replicate,
)
from .stochastic import DemandModel

POLICY_VARIABLES = ("oup", "reorder_point", "order_quantity")
LINEAR_ONLY_VARIABLES = ("expected_profit", "selling_price", "safety_stock")
NONLINEAR_OUTPUTS = ("profit_std", "lost_orders")
KNOWN_VARIABLES = POLICY_VARIABLES + LINEAR_ONLY_VARIABLES + NONLINEAR_OUTPUTS

DEFAULT_DELTAS = (0.10, -0.05)


@dataclass(frozen=True)
class SensitivitySpec:
    variable: str
    deltas: tuple[float, ...] = DEFAULT_DELTAS
    mode: str = "linear"

    def __post_init__(self) -> None:
        if self.variable not in KNOWN_VARIABLES:
            raise ConfigError(
                f"unknown sensitivity variable {self.variable!r}; "
                f"known: {', '.join(KNOWN_VARIABLES)}"
            )
        if not self.deltas:
            raise ConfigError("deltas must not be empty")
        if any(d <= -1.0 for d in self.deltas):
            raise ConfigError("every delta must be > -1")
        if self.mode not in ("linear", "resim"):
            raise ConfigError(f"mode {self.mode!r} not 'linear' or 'resim'")


@dataclass(frozen=True)
class BaselineOutputs:
    profit: float
    profit_std: float
    lost_orders: float
    safety_stock: float

    @classmethod
    def from_stats(cls, stats: ReplicationStats, safety_stock: float) -> "BaselineOutputs":
        return cls(stats.mean_profit, stats.profit_std, stats.lost_order_fraction,
                   safety_stock)


@dataclass(frozen=True)
class SensitivityRow:
    variable: str
    delta: float
    product: str
    profit: float
    profit_std: float
    lost_orders: float
    safety_stock: float
    needs_resim: tuple[str, ...]    # outputs copied unscaled in linear mode


def policy_safety_stock(product: ProductSpec, policy: PolicyParams) -> float:
    """Buffer implied by the policy above expected demand coverage.

    Continuous review: reorder point minus lead-time demand.  Periodic
    review: order-up-to minus expected demand over review period + lead.
    """
    daily_mean = product.order_probability * product.daily_order_size_mean
    if isinstance(policy, ContinuousReview):
        return max(policy.reorder_point - product.lead_time_demand, 0.0)
    coverage = daily_mean * (policy.review_period + product.lead_time)
    return max(policy.order_up_to - coverage, 0.0)


def sensitivity_linear(
    baseline: Mapping[str, BaselineOutputs], spec: SensitivitySpec
) -> list[SensitivityRow]:
    """Scale baseline outputs by (1 + delta) under the linearity assumption."""
    rows = []
    scale_profit = spec.variable not in NONLINEAR_OUTPUTS
    scale_safety = spec.variable == "safety_stock"
    for delta in spec.deltas:
        for name in baseline:
            base = baseline[name]
            marked = list(NONLINEAR_OUTPUTS)
            if not scale_profit:
                marked.append("profit")
            rows.append(SensitivityRow(
                variable=spec.variable,
                delta=delta,
                product=name,
                profit=base.profit * (1.0 + delta) if scale_profit else base.profit,
                profit_std=base.profit_std,
                lost_orders=base.lost_orders,
                safety_stock=base.safety_stock * (1.0 + delta) if scale_safety
                else base.safety_stock,
                needs_resim=tuple(marked),
            ))
    return rows


def _perturb(policy: PolicyParams, variable: str, delta: float, product: str) -> PolicyParams:
    def scaled(value: int) -> int:
        new = int(round(value * (1.0 + delta)))
        if new <= 0:
            raise ConfigError(
                f"product {product!r}: delta {delta:+g} drives {variable} "
                f"from {value} to {new} (must stay positive)"
            )
        return new

    if variable == "oup":
        if not isinstance(policy, PeriodicReview):
            raise ConfigError(f"variable 'oup' requires a periodic-review policy")
        return replace(policy, order_up_to=scaled(policy.order_up_to))
    if variable == "reorder_point":
        if not isinstance(policy, ContinuousReview):
            raise ConfigError("variable 'reorder_point' requires a continuous-review policy")
        return replace(policy, reorder_point=scaled(policy.reorder_point))
    if variable == "order_quantity":
        if not isinstance(policy, ContinuousReview):
            raise ConfigError("variable 'order_quantity' requires a continuous-review policy")
        return replace(policy, order_quantity=scaled(policy.order_quantity))
    raise ConfigError(f"variable {variable!r} cannot be resimulated; use linear mode")


def sensitivity_resim(
    catalog: Catalog,
    params: Mapping[str, PolicyParams],
    cfg: SimConfig,
    spec: SensitivitySpec,
    threads: int = 1,
) -> list[SensitivityRow]:
    """Rerun the replications with the perturbed variable under the
    baseline seed; rows carry the simulated outputs."""
    if spec.variable not in POLICY_VARIABLES:
        raise ConfigError(
            f"variable {spec.variable!r} is not resimulatable; "
            f"choose one of {', '.join(POLICY_VARIABLES)}"
        )
    for product in catalog:
        if product.name not in params:
            raise ConfigError(f"missing policy params for product {product.name!r}")
    rows = []
    for delta in spec.deltas:
        for product in catalog:
            policy = _perturb(params[product.name], spec.variable, delta, product.name)
            demand = DemandModel.from_moments(
                product.order_probability,
                product.daily_order_size_mean,
                product.daily_order_size_std,
            )
            stats = replicate(product, demand, policy, cfg, threads=threads)
            rows.append(SensitivityRow(
                variable=spec.variable,
                delta=delta,
                product=product.name,
                profit=stats.mean_profit,
                profit_std=stats.profit_std,
                lost_orders=stats.lost_order_fraction,
                safety_stock=policy_safety_stock(product, policy),
                needs_resim=(),
            ))
    return rows
