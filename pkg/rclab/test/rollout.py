"""
rclab/test/rollout.py

    tests for the rclab/rollout.py module
"""


import unittest
from unittest import mock

import numpy as np

from rclab.test.__include import micro_hyper
from rclab.model.vocab import Vocab, encode, decode
from rclab.model.tinylm import init_params, sequence_logprobs, SampledSequence
from rclab.reward import AnswerSpec, reward
from rclab.tasks import Task
from rclab.rollout import (
    Rollout, roll_group, roll_groups, decode_tasks, table_from_rollouts, evaluate_pass1,
    EvalTable, rollout_seed
)


_VOCAB = Vocab.default()


def _task(i=0, domain="math", prompt="Compute 1+1.", answer="2"):
    return Task(f"t-{i}", domain, "easy", "eval", prompt, AnswerSpec("numeric", answer, domain), 1, {})


def _params(seed=0):
    return init_params(micro_hyper(), len(_VOCAB), seed, out_std=0.3)


def _rollout(task_id, reward, n_tokens=3):
    return Rollout(task_id, [0], [1] * n_tokens, [0.] * n_tokens, True, reward=reward)


def _by_response(r):
    return r.response_ids, r.old_logprobs


class TestRollGroup(unittest.TestCase):
    """ tests for roll_group and roll_groups """

    def test_per_rollout_streams(self):
        """ each rollout only depends on its own seed """
        params, task = _params(), _task()
        a = roll_group(params, task, 2, 1.0, 6, 0, _VOCAB, seeds=[11, 12])
        b = roll_group(params, task, 2, 1.0, 6, 0, _VOCAB, seeds=[13, 12])
        self.assertEqual(a.rollouts[1], b.rollouts[1])
        c = roll_group(params, task, 3, 1.0, 6, 5, _VOCAB)
        d = roll_group(params, task, 3, 1.0, 6, 5, _VOCAB, seeds=[rollout_seed(5, task.id, i) for i in range(3)])
        self.assertEqual(c.rollouts, d.rollouts)

    def test_permuted_seeds(self):
        """ permuting which rollout index gets which derived seed gives the same multiset of rollouts """
        params, task = _params(2), _task()
        base = roll_group(params, task, 4, 1.0, 8, 7, _VOCAB)
        seeds = [rollout_seed(7, task.id, i) for i in range(4)]
        for perm in ([3, 2, 1, 0], [1, 3, 0, 2], [2, 0, 3, 1]):
            permuted = roll_group(params, task, 4, 1.0, 8, 7, _VOCAB, seeds=[seeds[i] for i in perm])
            self.assertEqual([permuted.rollouts[j] for j in range(4)], [base.rollouts[i] for i in perm])
            self.assertEqual(sorted(permuted.rollouts, key=_by_response), sorted(base.rollouts, key=_by_response))

    def test_logprobs_and_scores(self):
        """ stored log-probabilities match rescoring, score=True fills rewards and text """
        params, task = _params(1), _task()
        group = roll_group(params, task, 2, 1.0, 5, 0, _VOCAB, score=True)
        self.assertIsNone(group.advantages)
        for r in group.rollouts:
            np.testing.assert_allclose(r.old_logprobs, sequence_logprobs(params, r.prompt_ids, r.response_ids),
                                       rtol=0, atol=1e-12)
            self.assertIn(r.reward, (0., 1.))
            self.assertEqual(r.record.raw_reward, r.reward)
            self.assertEqual(len(r.text), len([t for t in r.response_ids if not _VOCAB.is_special(t)]))
        self.assertEqual(len(group.rewards), 2)

    def test_context_clamp(self):
        """ max_new is clamped to the room left after the prompt """
        task = _task(prompt="x" * 60)
        group = roll_group(_params(), task, 2, 1.0, 50, 0, _VOCAB)
        self.assertTrue(all(len(r.response_ids) <= 3 for r in group.rollouts))

    def test_bad_arguments(self):
        """ G < 2 and a wrong number of seeds are rejected """
        with self.assertRaises(ValueError):
            _ = roll_group(_params(), _task(), 1, 1.0, 4, 0, _VOCAB)
        with self.assertRaises(ValueError):
            _ = roll_group(_params(), _task(), 2, 1.0, 4, 0, _VOCAB, seeds=[1])

    def test_roll_groups(self):
        """ groups in task order, repeated tasks get independent rollouts, n_proc does not matter """
        params, task = _params(), _task()
        groups = roll_groups(params, [task, task], 2, 1.0, 8, 3, _VOCAB)
        self.assertEqual(len(groups), 2)
        self.assertNotEqual([r.response_ids for r in groups[0].rollouts],
                            [r.response_ids for r in groups[1].rollouts])
        self.assertTrue(all(r.reward is not None for g in groups for r in g.rollouts))
        parallel = roll_groups(params, [task, task], 2, 1.0, 8, 3, _VOCAB, n_proc=2)
        self.assertEqual([g.rollouts for g in parallel], [g.rollouts for g in groups])


class TestEvaluation(unittest.TestCase):
    """ tests for decode_tasks, table_from_rollouts and evaluate_pass1 """

    def test_greedy_ignores_seed(self):
        """ greedy decoding does not depend on the seed """
        params, tasks = _params(), [_task(0), _task(1, prompt="Compute 2*3.", answer="6")]
        a = decode_tasks(params, tasks, _VOCAB, max_new=6, seed=0)
        b = decode_tasks(params, tasks, _VOCAB, max_new=6, seed=9)
        self.assertEqual([r.response_ids for r in a], [r.response_ids for r in b])

    def test_table(self):
        """ partial credit counts as a miss, macro accuracy averages the domains """
        tasks = [_task(0), _task(1), _task(2, domain="logic")]
        rollouts = [_rollout("t-0", 1.), _rollout("t-1", 0., 5), _rollout("t-2", 0.5)]
        table = table_from_rollouts(tasks, rollouts)
        self.assertEqual(list(table.domains), ["math", "logic"])
        self.assertEqual(table.domains["math"].accuracy, 0.5)
        self.assertEqual(table.domains["math"].mean_len, 4.)
        self.assertEqual(table.domains["logic"].accuracy, 0.)
        self.assertEqual(table.domains["logic"].mean_reward, 0.5)
        self.assertAlmostEqual(table.overall.accuracy, 1 / 3)
        self.assertAlmostEqual(table.macro_accuracy, 0.25)
        self.assertEqual(table.missing_domains, ["stem", "code", "simulation", "tabular"])
        self.assertEqual(EvalTable.from_json(table.to_json()), table)
        frame = table.to_frame()
        self.assertEqual(frame["domain"].to_list(), ["math", "logic", "overall"])
        self.assertEqual(frame.columns, ["domain", "n", "accuracy", "mean_reward", "mean_len"])

    def test_evaluate_pass1(self):
        """ one response per task, accuracies are fractions """
        tasks = [_task(i) for i in range(3)]
        table = evaluate_pass1(_params(), tasks, _VOCAB, max_new=4)
        self.assertEqual(table.overall.n, 3)
        self.assertTrue(0. <= table.overall.accuracy <= 1.)
        with self.assertRaises(ValueError):
            _ = evaluate_pass1(_params(), [], _VOCAB)

    def test_recount(self):
        """ per-domain accuracy equals an independent recount of full rewards over 50 canned responses """
        rng = np.random.default_rng(0)
        tasks, responses = [], {}
        for i in range(50):
            match i % 3:
                case 0:
                    a = int(rng.integers(1, 50))
                    task = _task(i, prompt=f"Compute {a}+{i}.", answer=str(a + i))
                    options = [f"so \\boxed{{{a + i}}}", f"\\boxed{{{a + i + 1}}}", f"it is {a + i}"]
                case 1:
                    task = Task(f"t-{i}", "stem", "easy", "eval", f"Is {i} even?",
                                AnswerSpec("exact_string", "yes" if i % 2 == 0 else "no", "stem"), 1, {})
                    options = ["\\boxed{Yes}", "\\boxed{No}", "\\boxed{maybe}"]
                case _:
                    task = Task(f"t-{i}", "logic", "easy", "eval", f"Puzzle {i}: who is a knight?",
                                AnswerSpec("assignment_set", {"A": "K", "B": "N"}, "logic"), 1, {})
                    options = ["\\boxed{A=K, B=N}", "\\boxed{A=K, B=K}", "\\boxed{A=N, B=K}"]
            tasks.append(task)
            responses[task.prompt] = options[int(rng.integers(len(options)))]

        def canned(params, prompt_ids, temperature, max_new, stream, eos_id, greedy=False):
            ids = encode(responses[decode(prompt_ids, _VOCAB)], _VOCAB) + [eos_id]
            return SampledSequence(ids, [0.] * len(ids), True)

        with mock.patch("rclab.rollout.sample", side_effect=canned):
            table = evaluate_pass1(_params(), tasks, _VOCAB)
        full = {d: [reward(responses[t.prompt], t.spec).raw_reward == 1. for t in tasks if t.domain == d]
                for d in ("math", "stem", "logic")}
        self.assertEqual(list(table.domains), ["math", "stem", "logic"])
        for d, hits in full.items():
            self.assertEqual(table.domains[d].n, len(hits))
            self.assertAlmostEqual(table.domains[d].accuracy, sum(hits) / len(hits), msg=d)
        self.assertEqual(table.overall.n, 50)
        self.assertAlmostEqual(table.overall.accuracy, sum(sum(h) for h in full.values()) / 50)
        # the fixture mixes hits, misses and partial credit
        self.assertTrue(0 < sum(sum(h) for h in full.values()) < 50)
        self.assertLess(table.domains["logic"].accuracy, table.domains["logic"].mean_reward)


# collect all of the TestCases from this module
_loader = unittest.TestLoader()
AllTestsRollout = unittest.TestSuite()
AllTestsRollout.addTests([
    _loader.loadTestsFromTestCase(TestRollGroup),
    _loader.loadTestsFromTestCase(TestEvaluation),
])


if __name__ == "__main__":
    # run the tests for this module if invoked directly
    unittest.TextTestRunner(verbosity=2).run(AllTestsRollout)
