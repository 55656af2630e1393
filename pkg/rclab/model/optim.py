"""
rclab/model/optim.py

    AdamW with a linear warmup / linear decay learning rate schedule, and global
    gradient-norm clipping
"""


from typing import Tuple, Optional
from dataclasses import dataclass

import numpy as np

from rclab.params import AdamWConfig, ScheduleConfig
from rclab.typing import WeightDict
from rclab.model.tinylm import ModelParams, Gradient


@dataclass
class OptState:
    """ AdamW first/second moments and the number of updates applied so far """
    step: int
    m: WeightDict
    v: WeightDict

    @staticmethod
    def init(params: ModelParams) -> "OptState" :
        return OptState(0,
                        {k: np.zeros_like(w) for k, w in params.weights.items()},
                        {k: np.zeros_like(w) for k, w in params.weights.items()})

    def copy(self) -> "OptState" :
        return OptState(self.step,
                        {k: a.copy() for k, a in self.m.items()},
                        {k: a.copy() for k, a in self.v.items()})


def lr_at(step: int, schedule: ScheduleConfig) -> float :
    """
    learning rate for a (0-based) schedule step

    warmup: ``peak * (step + 1) / W`` for ``step < W``, then linear decay from ``peak`` at
    step ``W`` to ``final_frac * peak`` at ``total_steps`` (held there afterwards). Without
    ``total_steps`` the rate stays at peak after warmup.
    """
    peak = schedule.peak_lr
    W = schedule.warmup_steps
    if W > 0 and step < W:
        return peak * (step + 1) / W
    if schedule.total_steps is None:
        return peak
    span = max(schedule.total_steps - W, 1)
    frac = min(max((step - W) / span, 0.), 1.)
    return peak * (1. - (1. - schedule.final_frac) * frac)


def clip_grad_norm(grad: Gradient, max_norm: Optional[float]) -> Tuple[Gradient, float] :
    """ rescale the gradient so its global L2 norm is at most ``max_norm``, returns (grad, pre-clip norm) """
    norm = grad.norm()
    if max_norm is None or max_norm <= 0 or norm <= max_norm:
        return grad, norm
    return grad.scaled(max_norm / norm), norm


def adam_step(params: ModelParams,
              grad: Gradient,
              opt_state: OptState,
              schedule_step: int,
              adamw: AdamWConfig,
              schedule: ScheduleConfig
              ) -> Tuple[ModelParams, OptState] :
    """
    one AdamW update, pure (inputs are not modified)

    m <- b1 m + (1 - b1) g, v <- b2 v + (1 - b2) g^2, bias corrected by the update count,
    then p <- p (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps)

    Parameters
    ----------
    params : ModelParams
    grad : Gradient
        shape-congruent with params
    opt_state : OptState
    schedule_step : int
        position in the learning rate schedule (0-based)
    adamw : AdamWConfig
    schedule : ScheduleConfig

    Returns
    -------
    params : ModelParams
        updated parameters
    opt_state : OptState
        updated moments and update count
    """
    if params.shapes() != grad.shapes():
        raise ValueError("adam_step: gradient is not shape-congruent with the parameters")
    lr = lr_at(schedule_step, schedule)
    t = opt_state.step + 1
    b1, b2 = adamw.beta1, adamw.beta2
    bc1 = 1. - b1 ** t
    bc2 = 1. - b2 ** t
    new_w, new_m, new_v = {}, {}, {}
    for k, p in params.weights.items():
        g = grad.weights[k]
        m = b1 * opt_state.m[k] + (1. - b1) * g
        v = b2 * opt_state.v[k] + (1. - b2) * g * g
        update = (m / bc1) / (np.sqrt(v / bc2) + adamw.eps)
        new_w[k] = p * (1. - lr * adamw.weight_decay) - lr * update
        new_m[k] = m
        new_v[k] = v
    return ModelParams(params.hyper, new_w), OptState(t, new_m, new_v)
