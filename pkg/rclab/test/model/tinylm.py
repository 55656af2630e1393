"""
rclab/test/model/tinylm.py

    tests for the rclab/model/tinylm.py module, including finite difference checks of
    the hand-written backward pass
"""


import unittest
import math

import numpy as np

from rclab.test.__include import micro_hyper
from rclab.model.vocab import Vocab
from rclab.model.tinylm import (
    init_params, param_count, param_shapes, forward_logits, softmax_rows, sequence_logprobs, sample,
    loss_and_grad, LossBatch, LossSequence, SequenceTooLong
)


_VOCAB = Vocab.from_chars("abcd")
_FD_STEP = 1e-4
_FD_TOL = 1e-3


def _micro_params(seed=0, **hyper):
    return init_params(micro_hyper(**hyper), len(_VOCAB), seed, out_std=0.3)


def _random_ids(rng, n):
    return [int(t) for t in rng.integers(0, len(_VOCAB), size=n)]


def _fd_relative_errors(params, batch, n_entries=50, seed=0):
    """ relative error between analytic and central-difference gradients on random entries """
    _, grad, _ = loss_and_grad(params, batch)
    rng = np.random.default_rng(seed)
    names = params.names()
    errors = []
    for _ in range(n_entries):
        name = names[int(rng.integers(len(names)))]
        idx = tuple(int(rng.integers(s)) for s in params[name].shape)
        plus, minus = params.copy(), params.copy()
        plus.weights[name][idx] += _FD_STEP
        minus.weights[name][idx] -= _FD_STEP
        numeric = (loss_and_grad(plus, batch)[0] - loss_and_grad(minus, batch)[0]) / (2 * _FD_STEP)
        analytic = grad[name][idx]
        errors.append((name, idx, abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-4)))
    return errors


class TestParams(unittest.TestCase):
    """ tests for parameter shapes and initialization """

    def test_shapes_and_count(self):
        """ one block of parameters per layer plus embeddings, final norm and output """
        hyper = micro_hyper(n_layers=2)
        shapes = param_shapes(hyper, 7)
        self.assertEqual(list(shapes)[:2], ["tok_emb", "pos_emb"])
        self.assertEqual(list(shapes)[-2:], ["out.w", "out.b"])
        self.assertEqual(sum(1 for k in shapes if k.startswith("l1.")), 16)
        self.assertEqual(param_count(hyper, 7), sum(int(np.prod(s)) for s in shapes.values()))

    def test_init(self):
        """ same seed gives the same weights, zero output projection gives uniform predictions """
        hyper = micro_hyper()
        a = init_params(hyper, len(_VOCAB), 3)
        self.assertEqual(a.checksum(), init_params(hyper, len(_VOCAB), 3).checksum())
        self.assertNotEqual(a.checksum(), init_params(hyper, len(_VOCAB), 4).checksum())
        self.assertTrue(np.all(a["l0.ln1.g"] == 1.))
        self.assertTrue(np.all(a["out.w"] == 0.))
        lp = sequence_logprobs(a, [0, 1], [2, 3])
        np.testing.assert_allclose(lp, -math.log(len(_VOCAB)))

    def test_copy_is_independent(self):
        """ copies do not share buffers """
        a = _micro_params()
        b = a.copy()
        b.weights["out.b"][0] += 1.
        self.assertNotEqual(a.checksum(), b.checksum())


class TestForward(unittest.TestCase):
    """ tests for forward_logits and sequence_logprobs """

    def test_causal(self):
        """ logits at position t do not depend on later tokens """
        params = _micro_params()
        a = forward_logits(params, [0, 1, 2, 3, 0])
        b = forward_logits(params, [0, 1, 2, 1, 1])
        self.assertEqual(a.shape, (5, len(_VOCAB)))
        np.testing.assert_allclose(a[:3], b[:3], rtol=0, atol=1e-12)
        self.assertFalse(np.allclose(a[3:], b[3:]))

    def test_too_long(self):
        """ sequences longer than the context window are rejected """
        params = _micro_params(max_len=8)
        with self.assertRaises(SequenceTooLong):
            _ = forward_logits(params, [0] * 9)
        with self.assertRaises(SequenceTooLong):
            _ = sequence_logprobs(params, [0] * 5, [1] * 5)

    def test_logprobs_are_normalized(self):
        """ summing exp(logprob) over every possible next token gives one """
        params = _micro_params()
        total = sum(math.exp(sequence_logprobs(params, [0, 2], [t])[0]) for t in range(len(_VOCAB)))
        self.assertAlmostEqual(total, 1., places=12)


class TestSample(unittest.TestCase):
    """ tests for sample """

    def test_deterministic(self):
        """ the same generator seed gives the same response """
        params = _micro_params()
        a = sample(params, [_VOCAB.bos], 1.0, 12, np.random.default_rng(5), _VOCAB.eos)
        b = sample(params, [_VOCAB.bos], 1.0, 12, np.random.default_rng(5), _VOCAB.eos)
        self.assertEqual(a, b)
        self.assertLessEqual(len(a.response_ids), 12)

    def test_old_logprobs_match_scoring(self):
        """ stored log-probabilities equal sequence_logprobs for the same parameters """
        params = _micro_params(seed=1)
        s = sample(params, [_VOCAB.bos, 0], 1.0, 10, np.random.default_rng(0), _VOCAB.eos)
        np.testing.assert_allclose(s.old_logprobs, sequence_logprobs(params, [_VOCAB.bos, 0], s.response_ids),
                                   rtol=0, atol=1e-12)

    def test_eos_and_greedy(self):
        """ generation stops after EOS and greedy decoding ignores the generator """
        params = _micro_params()
        # make EOS overwhelmingly likely
        params.weights["out.b"][_VOCAB.eos] = 50.
        s = sample(params, [_VOCAB.bos], 1.0, 10, np.random.default_rng(0), _VOCAB.eos)
        self.assertEqual(s.response_ids, [_VOCAB.eos])
        self.assertTrue(s.finished)
        params.weights["out.b"][_VOCAB.eos] = 0.
        g1 = sample(params, [_VOCAB.bos], 1.0, 6, np.random.default_rng(0), _VOCAB.eos, greedy=True)
        g2 = sample(params, [_VOCAB.bos], 1.0, 6, np.random.default_rng(99), _VOCAB.eos, greedy=True)
        self.assertEqual(g1.response_ids, g2.response_ids)

    def test_frequencies_match_softmax(self):
        """ 10,000 single-token draws match softmax(logits / T) within 3 sigma per token """
        params = _micro_params(seed=2)
        prompt, temperature, n = [_VOCAB.bos, 0], 0.7, 10000
        p = softmax_rows(forward_logits(params, prompt)[-1] / temperature)
        rng = np.random.default_rng(0)
        counts = np.zeros(len(_VOCAB))
        for _ in range(n):
            s = sample(params, prompt, temperature, 1, rng, _VOCAB.eos)
            self.assertEqual(len(s.response_ids), 1)
            counts[s.response_ids[0]] += 1
        sigma = np.sqrt(n * p * (1. - p))
        for tok in range(len(_VOCAB)):
            self.assertLessEqual(abs(counts[tok] - n * p[tok]), 3. * sigma[tok],
                                 msg=f"token {tok}: {counts[tok]} draws, expected {n * p[tok]:.1f}")

    def test_bad_arguments(self):
        """ empty prompts, non-positive temperature and overlong generations are errors """
        params = _micro_params(max_len=8)
        rng = np.random.default_rng(0)
        with self.assertRaises(ValueError):
            _ = sample(params, [], 1.0, 4, rng, _VOCAB.eos)
        with self.assertRaises(ValueError):
            _ = sample(params, [0], 0., 4, rng, _VOCAB.eos)
        with self.assertRaises(SequenceTooLong):
            _ = sample(params, [0, 1], 1.0, 7, rng, _VOCAB.eos)


class TestLossAndGrad(unittest.TestCase):
    """ tests for the SFT and DAPO losses and their gradients """

    def setUp(self):
        self.params = _micro_params(seed=2)
        rng = np.random.default_rng(7)
        self.pairs = [(_random_ids(rng, n_p), _random_ids(rng, n_r)) for n_p, n_r in [(3, 4), (2, 6), (5, 1)]]

    def _dapo_batch(self, advantages, ratios=None):
        seqs = []
        for i, ((p, r), adv) in enumerate(zip(self.pairs, advantages)):
            lp = sequence_logprobs(self.params, p, r)
            shift = 0. if ratios is None else math.log(ratios[i])
            seqs.append(LossSequence(p, r, list(lp - shift), adv))
        return LossBatch("dapo", seqs, 0.2, 0.28)

    def test_sft_is_token_mean_nll(self):
        """ the SFT loss only scores response tokens, averaged over all of them """
        batch = LossBatch("sft", [LossSequence(p, r) for p, r in self.pairs])
        loss, _, info = loss_and_grad(self.params, batch)
        lps = np.concatenate([sequence_logprobs(self.params, p, r) for p, r in self.pairs])
        self.assertAlmostEqual(loss, -lps.mean(), places=12)
        self.assertEqual(info.n_tokens, 11)

    def test_dapo_on_policy_value(self):
        """ with ratio 1 the loss is -sum(len_i * A_i) / sum(len_i) and nothing is clipped """
        adv = [1.0, -0.5, 2.0]
        loss, _, info = loss_and_grad(self.params, self._dapo_batch(adv))
        lens = [len(r) for _, r in self.pairs]
        self.assertAlmostEqual(loss, -sum(n * a for n, a in zip(lens, adv)) / sum(lens), places=10)
        self.assertEqual(info.n_clipped, 0)

    def test_dapo_clipping(self):
        """ tokens beyond the clip radius on the advantage side are counted and carry no gradient """
        # ratio 1.6 with A > 0 and ratio 0.5 with A < 0 are clipped, ratio 0.5 with A > 0 is not
        batch = self._dapo_batch([1.0, -1.0, 1.0], ratios=[1.6, 0.5, 0.5])
        loss, grad, info = loss_and_grad(self.params, batch)
        self.assertEqual(info.n_clipped, 10)
        self.assertAlmostEqual(info.clip_frac, 10 / 11)
        lens = [4, 6, 1]
        expected = -(lens[0] * 1.28 - lens[1] * 0.8 + lens[2] * 0.5) / sum(lens)
        self.assertAlmostEqual(loss, expected, places=10)
        # only the last (unclipped) sequence contributes a gradient
        only_last = LossBatch("dapo", batch.sequences[2:], 0.2, 0.28)
        _, grad_last, _ = loss_and_grad(self.params, only_last)
        np.testing.assert_allclose(grad.flat(), grad_last.flat() / 11, rtol=1e-9, atol=1e-15)

    def test_fd_gradient_sft(self):
        """ analytic SFT gradient matches central differences """
        batch = LossBatch("sft", [LossSequence(p, r) for p, r in self.pairs])
        for name, idx, err in _fd_relative_errors(self.params, batch):
            self.assertLessEqual(err, _FD_TOL, msg=f"gradient of {name}{list(idx)}")

    def test_fd_gradient_dapo(self):
        """ analytic DAPO gradient matches central differences, on and off policy """
        for ratios in (None, [1.6, 0.5, 0.5]):
            batch = self._dapo_batch([1.0, -1.0, 0.5], ratios=ratios)
            for name, idx, err in _fd_relative_errors(self.params, batch, seed=1):
                self.assertLessEqual(err, _FD_TOL, msg=f"gradient of {name}{list(idx)} (ratios={ratios})")

    def test_parallel_matches_serial(self):
        """ the reduction does not depend on the number of worker processes """
        batch = self._dapo_batch([1.0, -1.0, 0.5])
        loss1, grad1, _ = loss_and_grad(self.params, batch)
        loss2, grad2, _ = loss_and_grad(self.params, batch, n_proc=2)
        self.assertEqual(loss1, loss2)
        np.testing.assert_array_equal(grad1.flat(), grad2.flat())

    def test_bad_batches(self):
        """ missing old logprobs, unknown modes and empty batches are rejected """
        with self.assertRaises(ValueError):
            _ = LossBatch("dapo", [LossSequence([0], [1, 2], [0.])])
        with self.assertRaises(ValueError):
            _ = LossBatch("ppo", [])
        with self.assertRaises(ValueError):
            _ = loss_and_grad(self.params, LossBatch("sft", [LossSequence([0], [])]))


# collect all of the TestCases from this module
_loader = unittest.TestLoader()
AllTestsTinylm = unittest.TestSuite()
AllTestsTinylm.addTests([
    _loader.loadTestsFromTestCase(TestParams),
    _loader.loadTestsFromTestCase(TestForward),
    _loader.loadTestsFromTestCase(TestSample),
    _loader.loadTestsFromTestCase(TestLossAndGrad),
])


if __name__ == "__main__":
    # run the tests for this module if invoked directly
    unittest.TextTestRunner(verbosity=2).run(AllTestsTinylm)
