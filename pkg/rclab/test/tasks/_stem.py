"""
rclab/test/tasks/_stem.py

    tests for the rclab/tasks/_stem.py module
"""


import unittest

import numpy as np

from rclab.tasks import _stem


class TestTemplates(unittest.TestCase):
    """ tests for the stem word-problem templates """

    def test_known_values(self):
        """ rendered answer, step texts and check line """
        prompt, answer, kind, steps, check = _stem._speed(60, 3)
        self.assertIn("60 km/h for 3 h", prompt)
        self.assertEqual((answer, kind), ("180", "numeric"))
        self.assertEqual(steps[-1], "60*3=180")
        self.assertEqual(check, "180/3=60")
        _, answer, kind, _, _ = _stem._bag(12, 20)
        self.assertEqual((answer, kind), ("no", "exact_string"))
        _, answer, _, steps, _ = _stem._eggs(2, 3, 4, 5)
        self.assertEqual(answer, "19")
        self.assertEqual(len(steps), 3)

    def test_make(self):
        """ step count follows the tier and the trace ends on the answer """
        rng = np.random.default_rng(3)
        for difficulty, k in [("easy", 1), ("medium", 2), ("hard", 3)]:
            for _ in range(10):
                g = _stem.make(difficulty, rng)
                self.assertEqual(g.complexity, k)
                self.assertIn(g.kind, ("numeric", "exact_string"))
                if g.kind == "exact_string":
                    self.assertIn(g.payload, ("yes", "no"))
                parts = _stem.trace_parts(g.meta)
                self.assertEqual(parts.answer, g.payload)
                self.assertTrue(parts.lines[-1][1].endswith(g.payload))


# collect all of the TestCases from this module
_loader = unittest.TestLoader()
AllTestsStem = unittest.TestSuite()
AllTestsStem.addTests([
    _loader.loadTestsFromTestCase(TestTemplates),
])


if __name__ == "__main__":
    # run the tests for this module if invoked directly
    unittest.TextTestRunner(verbosity=2).run(AllTestsStem)
