"""
rclab/test/minilang.py

    tests for the rclab/minilang.py module
"""


import unittest
import os

import numpy as np

from rclab.test.__include import TEST_INCLUDE_DIR
from rclab import minilang
from rclab.minilang import parse, render, run, run_tests, ParseError, HaltReason, Instr
from rclab.util import read_ndjson


_GOLDEN = os.path.join(TEST_INCLUDE_DIR, "minilang_golden.ndjson")


class TestParse(unittest.TestCase):
    """ tests for parse and render """

    def test_separators_and_case(self):
        """ whitespace, semicolons and lower case opcodes are all accepted """
        a = parse("PUSH 2; PUSH 3; ADD; OUT")
        b = parse("push 2\npush 3 add ;; out")
        self.assertEqual(a, b)
        self.assertEqual(len(a), 4)
        self.assertEqual(a.instrs[0], Instr("PUSH", 2))

    def test_render_is_canonical(self):
        """ rendering gives upper case and "; " separators, and parses back """
        prog = parse("read dup jz 2 out jmp -4")
        self.assertEqual(render(prog), "READ; DUP; JZ 2; OUT; JMP -4")
        self.assertEqual(parse(render(prog)), prog)

    def test_random_round_trip(self):
        """ parse(render(p)) == p for 200 random valid programs, with lower case text too """
        rng = np.random.default_rng(0)
        plain = sorted(minilang._PLAIN_OPS)
        for _ in range(200):
            n = int(rng.integers(1, minilang.MAX_PROGRAM_LEN + 1))
            instrs = []
            for pc in range(n):
                match int(rng.integers(4)):
                    case 0:
                        instrs.append(Instr("PUSH", int(rng.integers(-minilang.MAX_LITERAL, minilang.MAX_LITERAL + 1))))
                    case 1:
                        instrs.append(Instr(str(rng.choice(["JZ", "JMP"])), int(rng.integers(n)) - pc))
                    case _:
                        instrs.append(Instr(str(rng.choice(plain))))
            prog = minilang.Program(tuple(instrs))
            text = render(prog)
            self.assertEqual(parse(text), prog, msg=text)
            self.assertEqual(parse(text.lower().replace("; ", "\n")), prog, msg=text)

    def test_parse_errors(self):
        """ malformed programs raise ParseError with the offending position """
        cases = [
            ("PUSH 1; FOO", 8),
            ("PUSH", 0),
            ("PUSH x", 0),
            ("PUSH 1000", 5),
            ("JMP 5; OUT", 0),
            ("PUSH 1; JZ -2", 8),
        ]
        for source, position in cases:
            with self.assertRaises(ParseError, msg=f"{source!r} should not parse") as ctx:
                _ = parse(source)
            self.assertEqual(ctx.exception.position, position, msg=f"position for {source!r}")

    def test_too_long(self):
        """ at most MAX_PROGRAM_LEN instructions """
        _ = parse("; ".join(["PUSH 1"] * minilang.MAX_PROGRAM_LEN))
        with self.assertRaises(ParseError):
            _ = parse("; ".join(["PUSH 1"] * (minilang.MAX_PROGRAM_LEN + 1)))

    def test_empty_program(self):
        """ the empty program parses and ends immediately """
        res = run(parse(""), [])
        self.assertEqual((res.outputs, res.halt, res.steps), ([], HaltReason.END, 0))


class TestRun(unittest.TestCase):
    """ tests for the interpreter """

    def test_golden_corpus(self):
        """ every program in the golden corpus gives the recorded outputs, halt and steps """
        records = read_ndjson(_GOLDEN)
        self.assertGreaterEqual(len(records), 50)
        for rec in records:
            res = run(parse(rec["source"]), rec["inputs"], fuel=rec["fuel"])
            self.assertEqual(res.outputs, rec["outputs"], msg=f"outputs of {rec['source']!r}")
            self.assertEqual(res.halt.value, rec["halt"], msg=f"halt of {rec['source']!r}")
            self.assertEqual(res.steps, rec["steps"], msg=f"steps of {rec['source']!r}")

    def test_outputs_kept_on_error(self):
        """ emissions made before an abnormal halt are returned """
        res = run(parse("PUSH 4; OUT; ADD"), [])
        self.assertEqual(res.outputs, [4])
        self.assertIs(res.halt, HaltReason.STACK_UNDERFLOW)

    def test_fuel(self):
        """ an infinite loop stops exactly at the fuel limit """
        prog = parse("JMP 0")
        for fuel in (0, 1, 17, minilang.MAX_FUEL):
            res = run(prog, [], fuel=fuel)
            self.assertIs(res.halt, HaltReason.FUEL_EXHAUSTED)
            self.assertEqual(res.steps, fuel)
        with self.assertRaises(ValueError):
            _ = run(prog, [], fuel=minilang.MAX_FUEL + 1)

    def test_overflow(self):
        """ values beyond 10**9 in magnitude halt with overflow """
        res = run(parse("PUSH 999; DUP; MUL; DUP; MUL; OUT"), [])
        self.assertIs(res.halt, HaltReason.OVERFLOW)
        self.assertEqual(res.outputs, [])

    def test_record(self):
        """ the recorded trace has one entry per executed instruction """
        res = run(parse("READ; PUSH 1; ADD; OUT"), [41], record=True)
        self.assertEqual(res.outputs, [42])
        self.assertEqual(len(res.trace), res.steps)
        self.assertEqual(res.trace[2], (2, Instr("ADD"), (42,)))
        self.assertEqual(run(parse("READ; OUT"), [1]).trace, [])


class TestRunTests(unittest.TestCase):
    """ tests for run_tests """

    def test_partial_pass(self):
        """ a doubling program passes the doubling cases only """
        prog = parse("READ; DUP; ADD; OUT")
        tests = [minilang.TestCase((1,), (2,)), minilang.TestCase((5,), (10,)),
                 minilang.TestCase((3,), (7,)), minilang.TestCase((), (0,))]
        self.assertEqual(run_tests(prog, tests), (2, 4))

    def test_json(self):
        """ test cases serialize to {"inputs", "outputs"} """
        tc = minilang.TestCase((1, 2), (3,))
        self.assertEqual(tc.to_json(), {"inputs": [1, 2], "outputs": [3]})
        self.assertEqual(minilang.TestCase.from_json(tc.to_json()), tc)

    def test_bad_suites(self):
        """ empty suites and too many inputs are rejected """
        with self.assertRaises(ValueError):
            _ = run_tests(parse("OUT"), [])
        with self.assertRaises(ValueError):
            _ = minilang.TestCase(tuple(range(minilang.MAX_INPUTS + 1)), ())


# collect all of the TestCases from this module
_loader = unittest.TestLoader()
AllTestsMinilang = unittest.TestSuite()
AllTestsMinilang.addTests([
    _loader.loadTestsFromTestCase(TestParse),
    _loader.loadTestsFromTestCase(TestRun),
    _loader.loadTestsFromTestCase(TestRunTests),
])


if __name__ == "__main__":
    # run the tests for this module if invoked directly
    unittest.TextTestRunner(verbosity=2).run(AllTestsMinilang)
