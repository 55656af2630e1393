"""
rclab/model/__init__.py

    subpackage with the tiny policy model: vocabulary, forward/backward, sampling,
    optimizer and checkpoint container
"""


from rclab.model.vocab import Vocab, UnknownToken, encode, encode_prompt, decode
from rclab.model.tinylm import (
    ModelParams, Gradient, LossBatch, LossSequence, LossInfo, SampledSequence,
    SequenceTooLong, NonFiniteLoss,
    init_params, param_count, param_shapes,
    forward_logits, sequence_logprobs, sample, loss_and_grad,
)
from rclab.model.optim import OptState, adam_step, lr_at, clip_grad_norm
from rclab.model.checkpoint import Checkpoint, save_checkpoint, load_checkpoint
