"""
rclab/test/tasks/_common.py

    tests for the rclab/tasks/_common.py module
"""


import unittest
from fractions import Fraction

from rclab.tasks._common import (
    TraceParts, assemble, backtrack_candidates, perturb, fits, fmt_num, operand
)


_PARTS = TraceParts(
    [("step", "2*3=6"), ("case", "x=1 fails"), ("case", "x=2 works"), ("step", "6+1=7"), ("step", "done")],
    "7-1=6",
    "7"
)


class TestNumbers(unittest.TestCase):
    """ tests for fmt_num and operand """

    def test_fmt(self):
        """ whole numbers print as integers, others as a/b """
        self.assertEqual(fmt_num(Fraction(6, 3)), "2")
        self.assertEqual(fmt_num(Fraction(-3, 4)), "-3/4")
        self.assertEqual(operand(Fraction(-3)), "(-3)")
        self.assertEqual(operand(Fraction(1, 2)), "(1/2)")
        self.assertEqual(operand(5), "5")


class TestAssemble(unittest.TestCase):
    """ tests for assemble and the backtrack helpers """

    def test_plain(self):
        """ steps and cases are numbered separately, check and boxed answer come last """
        lines = assemble(_PARTS).split("\n")
        self.assertEqual(lines, [
            "Step 1: 2*3=6",
            "Case 1: x=1 fails",
            "Case 2: x=2 works",
            "Step 2: 6+1=7",
            "Step 3: done",
            "Check: 7-1=6",
            "\\boxed{7}",
        ])

    def test_backtrack(self):
        """ the chosen step is first written wrong, revised, then written correctly """
        lines = assemble(_PARTS, backtrack_step=2).split("\n")
        self.assertEqual(lines[3:6], [
            "Step 2: 6+1=8",
            "Wait, that is wrong; revisiting step 2",
            "Step 2: 6+1=7",
        ])
        # a step without digits cannot be corrupted
        self.assertEqual(assemble(_PARTS, backtrack_step=3), assemble(_PARTS))
        self.assertEqual(backtrack_candidates(_PARTS), [1, 2])

    def test_perturb_and_fits(self):
        """ perturb bumps the last integer, fits counts BOS and EOS """
        self.assertEqual(perturb("12+30=42"), "12+30=43")
        self.assertIsNone(perturb("no digits"))
        self.assertTrue(fits("a" * 100, "b" * 154, 256))
        self.assertFalse(fits("a" * 100, "b" * 155, 256))


# collect all of the TestCases from this module
_loader = unittest.TestLoader()
AllTestsCommon = unittest.TestSuite()
AllTestsCommon.addTests([
    _loader.loadTestsFromTestCase(TestNumbers),
    _loader.loadTestsFromTestCase(TestAssemble),
])


if __name__ == "__main__":
    # run the tests for this module if invoked directly
    unittest.TextTestRunner(verbosity=2).run(AllTestsCommon)
