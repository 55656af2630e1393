"""
rclab/model/tinylm.py

    tiny decoder-only transformer policy written directly in numpy (float64) with an
    exact hand-written backward pass

    Architecture: token + learned positional embeddings, ``n_layers`` pre-norm residual
    blocks (multi-head causal self-attention, tanh-GELU feed-forward), final layer norm and
    an output projection onto the vocabulary.
"""


from typing import Dict, List, Optional, Tuple, Any, Sequence, Iterator
from dataclasses import dataclass, field
from itertools import repeat
import multiprocessing
import math

import numpy as np
import numpy.typing as npt
from scipy.special import log_softmax, softmax

from rclab.params import ModelHyper
from rclab.typing import TokenIds, WeightDict
from rclab.util import apply_args_and_kwargs, sha256_bytes


_GELU_C = math.sqrt(2. / math.pi)


class SequenceTooLong(ValueError):
    """ raised when a sequence would not fit the model's context window """


class NonFiniteLoss(FloatingPointError):
    """ raised when the loss or any gradient entry is NaN or infinite """


#------------------------------------------------------------------------------
# parameter containers


def param_shapes(hyper: ModelHyper, vocab_size: int) -> Dict[str, Tuple[int, ...]] :
    """ ordered mapping of parameter name to shape, the order is the canonical flat order """
    d, f = hyper.d_model, hyper.d_ff
    shapes = {
        "tok_emb": (vocab_size, d),
        "pos_emb": (hyper.max_len, d),
    }
    for l in range(hyper.n_layers):
        shapes |= {
            f"l{l}.ln1.g": (d,), f"l{l}.ln1.b": (d,),
            f"l{l}.attn.wq": (d, d), f"l{l}.attn.bq": (d,),
            f"l{l}.attn.wk": (d, d), f"l{l}.attn.bk": (d,),
            f"l{l}.attn.wv": (d, d), f"l{l}.attn.bv": (d,),
            f"l{l}.attn.wo": (d, d), f"l{l}.attn.bo": (d,),
            f"l{l}.ln2.g": (d,), f"l{l}.ln2.b": (d,),
            f"l{l}.ffn.w1": (d, f), f"l{l}.ffn.b1": (f,),
            f"l{l}.ffn.w2": (f, d), f"l{l}.ffn.b2": (d,),
        }
    shapes |= {
        "ln_f.g": (d,), "ln_f.b": (d,),
        "out.w": (d, vocab_size), "out.b": (vocab_size,),
    }
    return shapes


def param_count(hyper: ModelHyper, vocab_size: int) -> int :
    """ total number of scalar parameters """
    return sum(int(np.prod(s)) for s in param_shapes(hyper, vocab_size).values())


class _WeightTree:
    """ ordered name -> float64 array mapping shared by ModelParams and Gradient """

    def __init__(self, weights: WeightDict):
        self.weights: WeightDict = weights

    def __getitem__(self, name: str) -> npt.NDArray[np.float64] :
        return self.weights[name]

    def __iter__(self) -> Iterator[str] :
        return iter(self.weights)

    def names(self) -> List[str] :
        return list(self.weights)

    def shapes(self) -> Dict[str, Tuple[int, ...]] :
        return {k: tuple(v.shape) for k, v in self.weights.items()}

    def flat(self) -> npt.NDArray[np.float64] :
        """ all values concatenated in canonical order """
        if not self.weights:
            return np.zeros(0)
        return np.concatenate([np.ravel(v) for v in self.weights.values()])

    def all_finite(self) -> bool :
        return all(np.all(np.isfinite(v)) for v in self.weights.values())


class ModelParams(_WeightTree):
    """ all weights of the policy model plus the hyperparameters that shaped them """

    def __init__(self, hyper: ModelHyper, weights: WeightDict):
        super().__init__(weights)
        self.hyper = hyper

    @property
    def vocab_size(self) -> int :
        return self.weights["tok_emb"].shape[0]

    def copy(self) -> "ModelParams" :
        return ModelParams(self.hyper, {k: v.copy() for k, v in self.weights.items()})

    def checksum(self) -> str :
        """ sha256 of the little-endian float64 bytes in canonical order """
        return sha256_bytes(self.flat().astype("<f8").tobytes())

    @staticmethod
    def zeros(hyper: ModelHyper, vocab_size: int) -> "ModelParams" :
        return ModelParams(hyper, {k: np.zeros(s) for k, s in param_shapes(hyper, vocab_size).items()})


class Gradient(_WeightTree):
    """ shape-congruent mirror of ModelParams holding d(loss)/d(param) """

    @staticmethod
    def zeros_like(params: _WeightTree) -> "Gradient" :
        return Gradient({k: np.zeros_like(v) for k, v in params.weights.items()})

    def norm(self) -> float :
        return float(np.sqrt(sum(float(np.sum(v * v)) for v in self.weights.values())))

    def scaled(self, c: float) -> "Gradient" :
        return Gradient({k: v * c for k, v in self.weights.items()})


def init_params(hyper: ModelHyper, vocab_size: int, seed: int,
                out_std: float = 0.
                ) -> ModelParams :
    """
    initialize parameters: zero-mean gaussian weights (std ``hyper.init_std``), layer norm
    gains 1 and offsets 0, biases 0, and a zero output projection unless ``out_std`` > 0
    """
    rng = np.random.default_rng(seed)
    weights = {}
    for name, shape in param_shapes(hyper, vocab_size).items():
        leaf = name.rsplit(".", 1)[-1]
        if name == "out.w":
            weights[name] = rng.normal(0., out_std, size=shape) if out_std > 0 else np.zeros(shape)
        elif leaf == "g":
            weights[name] = np.ones(shape)
        elif len(shape) == 1:
            weights[name] = np.zeros(shape)
        else:
            weights[name] = rng.normal(0., hyper.init_std, size=shape)
    return ModelParams(hyper, weights)


#------------------------------------------------------------------------------
# forward pass


def _layer_norm(x, g, b, eps):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    rstd = 1. / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * rstd
    return xhat * g + b, (xhat, rstd)


def _layer_norm_back(dy, g, cache):
    xhat, rstd = cache
    dg = (dy * xhat).sum(axis=0)
    db = dy.sum(axis=0)
    dxhat = dy * g
    dx = rstd * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                 - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
    return dx, dg, db


def _gelu(u):
    t = np.tanh(_GELU_C * (u + 0.044715 * u ** 3))
    return 0.5 * u * (1. + t), t


def _gelu_back(dy, u, t):
    du = 0.5 * (1. + t) + 0.5 * u * (1. - t * t) * _GELU_C * (1. + 3. * 0.044715 * u * u)
    return dy * du


def _split_heads(x, n_heads):
    T, d = x.shape
    return x.reshape(T, n_heads, d // n_heads).transpose(1, 0, 2)


def _merge_heads(x):
    H, T, dh = x.shape
    return x.transpose(1, 0, 2).reshape(T, H * dh)


def _check_length(T: int, hyper: ModelHyper, fn: str) -> None :
    if T > hyper.max_len:
        raise SequenceTooLong(f"{fn}: sequence length {T} exceeds max_len {hyper.max_len}")


def _forward(params: ModelParams, tokens: Sequence[int]):
    """ forward pass returning logits (T x |V|) and the activations needed for backward """
    hyper = params.hyper
    w = params.weights
    T = len(tokens)
    if T == 0:
        raise ValueError("forward_logits: empty token sequence")
    _check_length(T, hyper, "forward_logits")
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.min() < 0 or tokens.max() >= params.vocab_size:
        raise ValueError("forward_logits: token id out of range")
    scale = 1. / math.sqrt(hyper.d_head)
    causal = np.tril(np.ones((T, T), dtype=bool))
    x = w["tok_emb"][tokens] + w["pos_emb"][:T]
    layers = []
    for l in range(hyper.n_layers):
        p = f"l{l}."
        # attention sub-block
        xn1, ln1 = _layer_norm(x, w[p + "ln1.g"], w[p + "ln1.b"], hyper.ln_eps)
        q = _split_heads(xn1 @ w[p + "attn.wq"] + w[p + "attn.bq"], hyper.n_heads)
        k = _split_heads(xn1 @ w[p + "attn.wk"] + w[p + "attn.bk"], hyper.n_heads)
        v = _split_heads(xn1 @ w[p + "attn.wv"] + w[p + "attn.bv"], hyper.n_heads)
        s = np.where(causal, (q @ k.transpose(0, 2, 1)) * scale, -np.inf)
        att = softmax(s, axis=-1)
        ctx = _merge_heads(att @ v)
        x_mid = x + ctx @ w[p + "attn.wo"] + w[p + "attn.bo"]
        # feed-forward sub-block
        xn2, ln2 = _layer_norm(x_mid, w[p + "ln2.g"], w[p + "ln2.b"], hyper.ln_eps)
        a1 = xn2 @ w[p + "ffn.w1"] + w[p + "ffn.b1"]
        h1, t1 = _gelu(a1)
        x_out = x_mid + h1 @ w[p + "ffn.w2"] + w[p + "ffn.b2"]
        layers.append((xn1, ln1, q, k, v, att, ctx, xn2, ln2, a1, h1, t1))
        x = x_out
    hf, lnf = _layer_norm(x, w["ln_f.g"], w["ln_f.b"], hyper.ln_eps)
    logits = hf @ w["out.w"] + w["out.b"]
    return logits, (tokens, layers, hf, lnf)


def _backward(params: ModelParams, cache, dlogits) -> WeightDict :
    """ exact reverse-mode gradient of sum(dlogits * logits) w.r.t. every parameter """
    hyper = params.hyper
    w = params.weights
    tokens, layers, hf, lnf = cache
    T = len(tokens)
    scale = 1. / math.sqrt(hyper.d_head)
    g = {}
    g["out.w"] = hf.T @ dlogits
    g["out.b"] = dlogits.sum(axis=0)
    dx, g["ln_f.g"], g["ln_f.b"] = _layer_norm_back(dlogits @ w["out.w"].T, w["ln_f.g"], lnf)
    for l in reversed(range(hyper.n_layers)):
        p = f"l{l}."
        xn1, ln1, q, k, v, att, ctx, xn2, ln2, a1, h1, t1 = layers[l]
        # feed-forward sub-block, residual passes dx through unchanged
        g[p + "ffn.w2"] = h1.T @ dx
        g[p + "ffn.b2"] = dx.sum(axis=0)
        da1 = _gelu_back(dx @ w[p + "ffn.w2"].T, a1, t1)
        g[p + "ffn.w1"] = xn2.T @ da1
        g[p + "ffn.b1"] = da1.sum(axis=0)
        dxn2 = da1 @ w[p + "ffn.w1"].T
        dx_ln2, g[p + "ln2.g"], g[p + "ln2.b"] = _layer_norm_back(dxn2, w[p + "ln2.g"], ln2)
        dx = dx + dx_ln2
        # attention sub-block
        g[p + "attn.wo"] = ctx.T @ dx
        g[p + "attn.bo"] = dx.sum(axis=0)
        dctx = _split_heads(dx @ w[p + "attn.wo"].T, hyper.n_heads)
        datt = dctx @ v.transpose(0, 2, 1)
        dv = att.transpose(0, 2, 1) @ dctx
        # softmax backward, masked entries have att == 0 so they receive no gradient
        ds = att * (datt - (att * datt).sum(axis=-1, keepdims=True)) * scale
        dq = ds @ k
        dk = ds.transpose(0, 2, 1) @ q
        dq, dk, dv = _merge_heads(dq), _merge_heads(dk), _merge_heads(dv)
        g[p + "attn.wq"] = xn1.T @ dq
        g[p + "attn.bq"] = dq.sum(axis=0)
        g[p + "attn.wk"] = xn1.T @ dk
        g[p + "attn.bk"] = dk.sum(axis=0)
        g[p + "attn.wv"] = xn1.T @ dv
        g[p + "attn.bv"] = dv.sum(axis=0)
        dxn1 = dq @ w[p + "attn.wq"].T + dk @ w[p + "attn.wk"].T + dv @ w[p + "attn.wv"].T
        dx_ln1, g[p + "ln1.g"], g[p + "ln1.b"] = _layer_norm_back(dxn1, w[p + "ln1.g"], ln1)
        dx = dx + dx_ln1
    g["tok_emb"] = np.zeros_like(w["tok_emb"])
    np.add.at(g["tok_emb"], tokens, dx)
    g["pos_emb"] = np.zeros_like(w["pos_emb"])
    g["pos_emb"][:T] = dx
    # canonical order
    return {name: g[name] for name in w}


def forward_logits(params: ModelParams, tokens: Sequence[int]) -> npt.NDArray[np.float64] :
    """
    pre-softmax scores for every position

    Parameters
    ----------
    params : ModelParams
        model parameters
    tokens : sequence of int
        token ids, 0 < len(tokens) <= max_len

    Returns
    -------
    logits : numpy.ndarray
        shape (len(tokens), vocab_size), row t only depends on tokens[:t + 1]

    Raises
    ------
    SequenceTooLong
    """
    logits, _ = _forward(params, tokens)
    return logits


def log_softmax_rows(logits: npt.NDArray[np.float64]) -> npt.NDArray[np.float64] :
    """ row-wise log-softmax """
    return log_softmax(logits, axis=-1)


def softmax_rows(logits: npt.NDArray[np.float64]) -> npt.NDArray[np.float64] :
    """ row-wise softmax """
    return softmax(logits, axis=-1)


def sequence_logprobs(params: ModelParams, prompt_ids: TokenIds, response_ids: TokenIds
                      ) -> npt.NDArray[np.float64] :
    """
    log pi(y_t | x, y_<t) for each response token, response token j is scored by the
    logits at position len(prompt) + j - 1
    """
    if len(response_ids) == 0:
        return np.zeros(0)
    if len(prompt_ids) == 0:
        raise ValueError("sequence_logprobs: prompt must contain at least one token")
    seq = list(prompt_ids) + list(response_ids)
    _check_length(len(seq), params.hyper, "sequence_logprobs")
    logits = forward_logits(params, seq[:-1])
    lp = log_softmax_rows(logits[len(prompt_ids) - 1:])
    return lp[np.arange(len(response_ids)), np.asarray(response_ids)]


#------------------------------------------------------------------------------
# sampling


@dataclass
class SampledSequence:
    """ raw output of ``sample``: response ids, their log-probabilities and the EOS flag """
    response_ids: TokenIds
    old_logprobs: List[float]
    finished: bool


def sample(params: ModelParams,
           prompt_ids: TokenIds,
           temperature: float,
           max_new: int,
           rng: np.random.Generator,
           eos_id: int,
           greedy: bool = False
           ) -> SampledSequence :
    """
    autoregressively sample up to ``max_new`` tokens after the prompt

    Tokens are drawn by inverse-CDF from softmax(logits / temperature) with one
    ``rng.random()`` draw per token (argmax when ``greedy``). The stored log-probabilities
    are those of the sampling policy at temperature 1, so they are exactly what
    ``sequence_logprobs`` returns for the same parameters. Generation stops after EOS
    (which is kept as the last response token) or after ``max_new`` tokens.

    Raises
    ------
    SequenceTooLong
        if len(prompt_ids) + max_new exceeds the context window
    """
    if temperature <= 0 and not greedy:
        raise ValueError("sample: temperature must be positive (use greedy=True for argmax decoding)")
    if len(prompt_ids) == 0:
        raise ValueError("sample: prompt must contain at least one token")
    if len(prompt_ids) + max_new > params.hyper.max_len:
        raise SequenceTooLong(f"sample: prompt length {len(prompt_ids)} + max_new {max_new} "
                              f"exceeds max_len {params.hyper.max_len}")
    seq = list(prompt_ids)
    response, logprobs = [], []
    finished = False
    for _ in range(max_new):
        logits = forward_logits(params, seq)[-1]
        lp = log_softmax(logits)
        if greedy:
            tok = int(np.argmax(logits))
        else:
            cdf = np.cumsum(softmax(logits / temperature))
            tok = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), len(cdf) - 1)
        seq.append(tok)
        response.append(tok)
        logprobs.append(float(lp[tok]))
        if tok == eos_id:
            finished = True
            break
    return SampledSequence(response, logprobs, finished)


#------------------------------------------------------------------------------
# loss and gradient


@dataclass
class LossSequence:
    """ one training sequence, advantage and old log-probabilities are only used by DAPO """
    prompt_ids: TokenIds
    response_ids: TokenIds
    old_logprobs: Optional[List[float]] = None
    advantage: float = 0.


@dataclass
class LossBatch:
    """
    a batch of sequences for ``loss_and_grad``

    mode ``"sft"``: mean negative log-likelihood over all response tokens
    mode ``"dapo"``: negative clipped surrogate with token-level normalization over the batch
    """
    mode: str
    sequences: List[LossSequence]
    eps_low: float = 0.2
    eps_high: float = 0.28

    def __post_init__(self):
        if self.mode not in ("sft", "dapo"):
            raise ValueError(f"LossBatch: mode must be 'sft' or 'dapo', got {self.mode!r}")
        if self.mode == "dapo":
            for i, s in enumerate(self.sequences):
                if s.old_logprobs is None or len(s.old_logprobs) != len(s.response_ids):
                    raise ValueError(f"LossBatch: sequence {i} needs one old logprob per response token")

    @property
    def n_tokens(self) -> int :
        return sum(len(s.response_ids) for s in self.sequences)


@dataclass
class LossInfo:
    """ diagnostics collected alongside the loss """
    n_tokens: int = 0
    n_clipped: int = 0
    per_sequence: List[float] = field(default_factory=list)

    @property
    def clip_frac(self) -> float :
        return self.n_clipped / self.n_tokens if self.n_tokens else 0.


def _sequence_loss_and_grad(params: ModelParams,
                            seq: LossSequence,
                            mode: str,
                            n_total: int,
                            eps_low: float,
                            eps_high: float
                            ) -> Tuple[float, WeightDict, int] :
    """ loss contribution (already divided by the batch token count) of a single sequence """
    n = len(seq.response_ids)
    P = len(seq.prompt_ids)
    full = list(seq.prompt_ids) + list(seq.response_ids)
    _check_length(len(full), params.hyper, "loss_and_grad")
    logits, cache = _forward(params, full[:-1])
    rows = logits[P - 1:]
    lp_all = log_softmax(rows, axis=-1)
    targets = np.asarray(seq.response_ids)
    idx = np.arange(n)
    lp = lp_all[idx, targets]
    probs = np.exp(lp_all)
    n_clipped = 0
    if mode == "sft":
        loss = -float(lp.sum()) / n_total
        # d(loss)/d(lp_t) = -1 / N
        dlp = np.full(n, -1. / n_total)
    else:
        adv = float(seq.advantage)
        ratio = np.exp(lp - np.asarray(seq.old_logprobs, dtype=np.float64))
        unclipped = ratio * adv
        clipped = np.clip(ratio, 1. - eps_low, 1. + eps_high) * adv
        on_unclipped = unclipped <= clipped
        n_clipped = int(n - on_unclipped.sum())
        loss = -float(np.minimum(unclipped, clipped).sum()) / n_total
        # the clipped branch is constant in theta
        dlp = np.where(on_unclipped, -unclipped / n_total, 0.)
    # d(lp_t)/d(logits_t) = onehot(y_t) - softmax(logits_t)
    drows = -dlp[:, None] * probs
    drows[idx, targets] += dlp
    dlogits = np.zeros_like(logits)
    dlogits[P - 1:] = drows
    return loss, _backward(params, cache, dlogits), n_clipped


def loss_and_grad(params: ModelParams,
                  batch: LossBatch,
                  n_proc: int = 1
                  ) -> Tuple[float, Gradient, LossInfo] :
    """
    compute the batch loss and its exact gradient

    Per-sequence results are reduced in batch index order, so the result does not depend
    on ``n_proc``.

    Parameters
    ----------
    params : ModelParams
        current policy parameters
    batch : LossBatch
        sequences plus the loss mode
    n_proc : int, default=1
        number of worker processes used for the per-sequence forward/backward passes

    Returns
    -------
    loss : float
    grad : Gradient
    info : LossInfo

    Raises
    ------
    NonFiniteLoss
        if the loss or any gradient entry is not finite
    """
    n_total = batch.n_tokens
    if n_total == 0:
        raise ValueError("loss_and_grad: batch contains no response tokens")
    kwargs = {"mode": batch.mode, "n_total": n_total, "eps_low": batch.eps_low, "eps_high": batch.eps_high}
    args = [(params, seq) for seq in batch.sequences if len(seq.response_ids) > 0]
    if n_proc > 1:
        with multiprocessing.Pool(processes=n_proc) as p:
            results = p.starmap(apply_args_and_kwargs,
                                zip(repeat(_sequence_loss_and_grad), args, repeat(kwargs)))
    else:
        results = [_sequence_loss_and_grad(*a, **kwargs) for a in args]
    loss = 0.
    grad = Gradient.zeros_like(params)
    info = LossInfo(n_tokens=n_total)
    for seq_loss, seq_grad, n_clipped in results:
        loss += seq_loss
        for k, v in seq_grad.items():
            grad.weights[k] += v
        info.n_clipped += n_clipped
        info.per_sequence.append(seq_loss)
    if not math.isfinite(loss) or not grad.all_finite():
        raise NonFiniteLoss(f"loss_and_grad: non-finite loss or gradient (loss={loss})")
    return loss, grad, info
