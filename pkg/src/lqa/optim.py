"""Seven optimizers behind one functional contract.

The six baselines (SGD, momentum, Nesterov, AdaGrad, RMSProp, Adam) are the
canonical recurrences with the usual defaults. The seventh picks its learning
rate per batch step: it models the batch loss along the gradient direction as
a quadratic in the step size, estimates the two coefficients from the loss at
params -+ delta0*grad (two extra forward passes, no second derivatives), and
steps with the minimizer a/(2b). Degenerate fits fall back to the previous
rate instead of failing.

Sign convention, fixed once: probe(s) evaluates the loss at params - s*grad,
so the probe at -delta0 is the "uphill" point params + delta0*grad. With that
orientation the linear coefficient is estimated by
[probe(-delta0) - probe(+delta0)] / (2*delta0) and tends to dot(grad, grad)
as delta0 -> 0.
"""

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .tensor import NonFiniteError

__all__ = [
    "Verdict",
    "LqaState",
    "LqaCoefficients",
    "sgd_step",
    "sgdm_step",
    "sgdnag_step",
    "adagrad_step",
    "rmsprop_step",
    "adam_step",
    "MomentumState",
    "AdaGradState",
    "RmsPropState",
    "AdamState",
    "lqa_estimate_coefficients",
    "lqa_solve",
    "lqa_step",
    "make_baseline",
]


def _check_grad(grad):
    if not np.all(np.isfinite(grad)):
        raise NonFiniteError("gradient contains NaN or Inf")


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------


def sgd_step(params, grad, lr):
    """params - lr * grad."""
    if lr < 0.0:
        raise ValueError("lr must be non-negative")
    _check_grad(grad)
    return params - lr * grad


@dataclass
class MomentumState:
    velocity: np.ndarray


def sgdm_step(params, grad, lr, mu, state):
    """Heavy-ball momentum: v <- mu*v + grad, step -lr*v."""
    if not 0.0 <= mu < 1.0:
        raise ValueError("momentum must be in [0, 1)")
    _check_grad(grad)
    v = mu * state.velocity + grad
    return params - lr * v, MomentumState(v)


def sgdnag_step(params, grad, lr, mu, state):
    """Nesterov look-ahead: v <- mu*v + grad, step -lr*(grad + mu*v)."""
    if not 0.0 <= mu < 1.0:
        raise ValueError("momentum must be in [0, 1)")
    _check_grad(grad)
    v = mu * state.velocity + grad
    return params - lr * (grad + mu * v), MomentumState(v)


@dataclass
class AdaGradState:
    accum: np.ndarray


def adagrad_step(params, grad, lr, state, eps=1e-8):
    """G += g^2, step -lr * g / (sqrt(G) + eps)."""
    _check_grad(grad)
    G = state.accum + grad * grad
    return params - lr * grad / (np.sqrt(G) + eps), AdaGradState(G)


@dataclass
class RmsPropState:
    mean_square: np.ndarray


def rmsprop_step(params, grad, lr, state, rho=0.9, eps=1e-8):
    """G <- rho*G + (1-rho)*g^2, step -lr * g / (sqrt(G) + eps)."""
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must be in [0, 1)")
    _check_grad(grad)
    G = rho * state.mean_square + (1.0 - rho) * grad * grad
    return params - lr * grad / (np.sqrt(G) + eps), RmsPropState(G)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0


def adam_step(params, grad, lr, state, beta1=0.9, beta2=0.999, eps=1e-8):
    """Bias-corrected Adam with the standard (0.9, 0.999, 1e-8) defaults."""
    if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
        raise ValueError("betas must be in [0, 1)")
    _check_grad(grad)
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    return params - lr * m_hat / (np.sqrt(v_hat) + eps), AdamState(m, v, t)


class _BaselineRunner:
    """Holds one baseline's hyperparameters and accumulator between steps."""

    def __init__(self, name, lr, dim, mu=0.9, rho=0.9, beta1=0.9, beta2=0.999, eps=1e-8):
        self.name = name
        self.lr = lr
        self.mu = mu
        self.rho = rho
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        z = np.zeros(dim, dtype=np.float64)
        if name in ("sgd-m", "sgd-nag"):
            self.state = MomentumState(z)
        elif name == "adagrad":
            self.state = AdaGradState(z)
        elif name == "rmsprop":
            self.state = RmsPropState(z)
        elif name == "adam":
            self.state = AdamState(z, z.copy())
        elif name == "sgd":
            self.state = None
        else:
            raise ValueError(f"unknown optimizer {name!r}")

    def step(self, params, grad):
        if self.name == "sgd":
            return sgd_step(params, grad, self.lr)
        if self.name == "sgd-m":
            out, self.state = sgdm_step(params, grad, self.lr, self.mu, self.state)
        elif self.name == "sgd-nag":
            out, self.state = sgdnag_step(params, grad, self.lr, self.mu, self.state)
        elif self.name == "adagrad":
            out, self.state = adagrad_step(params, grad, self.lr, self.state, self.eps)
        elif self.name == "rmsprop":
            out, self.state = rmsprop_step(params, grad, self.lr, self.state, self.rho, self.eps)
        else:
            out, self.state = adam_step(
                params, grad, self.lr, self.state, self.beta1, self.beta2, self.eps
            )
        return out


def make_baseline(name, lr, dim, **hyper):
    """A stateful stepper for one of the six baseline optimizers."""
    return _BaselineRunner(name, lr, dim, **hyper)


# ---------------------------------------------------------------------------
# Local quadratic approximation
# ---------------------------------------------------------------------------


class Verdict(enum.Enum):
    """What the rate solver did with one batch step's coefficient estimates."""

    ACCEPTED = "accepted"
    CLAMPED = "clamped"
    FALLBACK_NONPOSITIVE_A = "fallback_nonpositive_a"
    FALLBACK_SMALL_B = "fallback_small_b"
    SKIPPED_ZERO_GRAD = "skipped_zero_grad"


@dataclass
class LqaState:
    """Probe rate and safeguards carried from one batch step to the next.

    delta0 is the probe radius, seeded small and thereafter chained from the
    previous step's solved rate. The clamp box and the curvature floor guard
    the solved rate against degenerate local shapes the quadratic model
    cannot represent.
    """

    delta0: float = 0.01
    delta_min: float = 1e-6
    delta_max: float = 10.0
    b_min: float = 1e-12
    last_verdict: Verdict | None = None

    def __post_init__(self):
        if not (0.0 < self.delta_min <= self.delta0 <= self.delta_max):
            raise ValueError(
                f"need 0 < delta_min <= delta0 <= delta_max, got "
                f"[{self.delta_min}, {self.delta0}, {self.delta_max}]"
            )
        if not self.b_min > 0.0:
            raise ValueError("b_min must be positive")


@dataclass
class LqaCoefficients:
    """Estimated quadratic model -a*s + b*s^2 of the loss change and its minimizer."""

    a_tilde: float
    b_tilde: float
    delta_star: float = math.nan
    predicted_reduction: float = math.nan


def lqa_solve(coeffs, state):
    """Resolve coefficient estimates into a usable rate and a verdict.

    A healthy fit (positive slope, curvature above the floor) yields
    a/(2b) clamped to [delta_min, delta_max]. Anything degenerate keeps the
    previous rate: a flat probe (a == b == 0) means a zero direction, a
    non-positive slope or sub-floor curvature means the local shape has no
    meaningful quadratic minimum.
    """
    a, b = coeffs.a_tilde, coeffs.b_tilde
    if not (math.isfinite(a) and math.isfinite(b)):
        raise NonFiniteError("coefficient estimates are not finite")
    if a == 0.0 and b == 0.0:
        return state.delta0, Verdict.SKIPPED_ZERO_GRAD
    if a <= 0.0:
        return state.delta0, Verdict.FALLBACK_NONPOSITIVE_A
    if b < state.b_min:
        return state.delta0, Verdict.FALLBACK_SMALL_B
    raw = a / (2.0 * b)
    clamped = min(max(raw, state.delta_min), state.delta_max)
    return clamped, Verdict.ACCEPTED if clamped == raw else Verdict.CLAMPED


def lqa_estimate_coefficients(loss0, probe, delta0, state=None):
    """Central-difference estimates of the ray model's two coefficients.

    With probe(s) = loss at params - s*grad:
        a = [probe(-delta0) - probe(+delta0)] / (2*delta0)
        b = [probe(-delta0) + probe(+delta0) - 2*loss0] / (2*delta0^2)
    delta_star and the predicted loss change are filled in via lqa_solve
    (default safeguards if no state is given).
    """
    if not delta0 > 0.0:
        raise ValueError("delta0 must be positive")
    loss_up = probe(-delta0)  # params + delta0*grad
    loss_down = probe(delta0)  # params - delta0*grad
    if not (math.isfinite(loss_up) and math.isfinite(loss_down) and math.isfinite(loss0)):
        raise NonFiniteError("probe returned a non-finite loss")
    a = (loss_up - loss_down) / (2.0 * delta0)
    b = (loss_up + loss_down - 2.0 * loss0) / (2.0 * delta0 * delta0)
    coeffs = LqaCoefficients(a, b)
    st = state
    if st is None:  # default safeguards, widened so any positive delta0 is legal
        st = LqaState(delta0=delta0, delta_min=min(1e-6, delta0), delta_max=max(10.0, delta0))
    delta_star, _ = lqa_solve(coeffs, st)
    coeffs.delta_star = delta_star
    coeffs.predicted_reduction = -a * delta_star + b * delta_star * delta_star
    return coeffs


def lqa_step(params, grad, probe, state):
    """One parameter update with a per-step estimated rate.

    Probes the loss at params -+ delta0*grad, solves for the rate, steps
    params - rate*grad, and chains the solved rate into the next step's probe
    radius. Returns (new_params, new_state); the passed state is not touched.
    """
    _check_grad(grad)
    loss0 = probe(0.0)
    if not math.isfinite(loss0):
        raise NonFiniteError("probe(0) returned a non-finite loss")
    coeffs = lqa_estimate_coefficients(loss0, probe, state.delta0, state)
    delta_star, verdict = lqa_solve(coeffs, state)
    new_params = params - delta_star * grad
    if not np.all(np.isfinite(new_params)):
        raise NonFiniteError("update produced non-finite parameters")
    chained = min(max(delta_star, state.delta_min), state.delta_max)
    return new_params, replace(state, delta0=chained, last_verdict=verdict)
