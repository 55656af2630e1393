"""
rclab/test/util.py

    tests for the rclab/util.py module
"""


import unittest
import os
import tempfile

from rclab.util import (
    debug_handler, apply_args_and_kwargs, derive_seed, sha256_bytes, sha256_file,
    dumps_canonical, write_ndjson, append_ndjson, iter_ndjson, read_ndjson
)


class TestDebugHandler(unittest.TestCase):
    """ tests for the debug_handler function """

    def test_no_flag_does_nothing(self):
        """ debug_flag None should not call the callback """
        msgs = []
        debug_handler(None, msgs.append, "hello")
        self.assertEqual(msgs, [])

    def test_textcb(self):
        """ textcb modes pass the formatted message to the callback """
        msgs = []
        debug_handler("textcb", msgs.append, "step done", loss=0.5, step=3)
        self.assertEqual(msgs, ["DEBUG: step done | loss=0.5 step=3"])
        debug_handler("textcb_pid", msgs.append, "x", pid=12)
        self.assertEqual(msgs[-1], "<pid: 12> DEBUG: x")

    def test_textcb_pid_defaults_to_current_process(self):
        """ the _pid modes fill in the calling process id """
        msgs = []
        debug_handler("textcb_pid", msgs.append, "x")
        self.assertEqual(msgs, [f"<pid: {os.getpid()}> DEBUG: x"])

    def test_bad_flags(self):
        """ unknown flag or missing callback are errors """
        with self.assertRaises(ValueError):
            debug_handler("verbose", None, "x")
        with self.assertRaises(ValueError):
            debug_handler("textcb", None, "x")


class TestSeedsAndHashing(unittest.TestCase):
    """ tests for derive_seed and the sha256 helpers """

    def test_derive_seed(self):
        """ derived seeds are deterministic, distinct per input and fit in 63 bits """
        self.assertEqual(derive_seed("rollout", 1, "t", 0), derive_seed("rollout", 1, "t", 0))
        self.assertNotEqual(derive_seed("rollout", 1, "t", 0), derive_seed("rollout", 1, "t", 1))
        self.assertNotEqual(derive_seed("a", 1), derive_seed("a", "1"))
        for parts in [(), (0,), ("step", 7, 2, 9)]:
            s = derive_seed(*parts)
            self.assertGreaterEqual(s, 0)
            self.assertLess(s, 2**63)

    def test_sha256(self):
        """ file digest matches bytes digest, missing file raises """
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "blob.bin")
            with open(path, "wb") as f:
                f.write(b"abc")
            self.assertEqual(sha256_file(path), sha256_bytes(b"abc"))
            self.assertEqual(sha256_bytes(b"abc"),
                             "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad")
            with self.assertRaises(FileNotFoundError):
                _ = sha256_file(os.path.join(tmp, "missing.bin"))


class TestNdjson(unittest.TestCase):
    """ tests for the NDJSON helpers """

    def test_canonical(self):
        """ keys sorted, no whitespace, NaN rejected """
        self.assertEqual(dumps_canonical({"b": 1, "a": [1, 2]}), '{"a":[1,2],"b":1}')
        with self.assertRaises(ValueError):
            _ = dumps_canonical({"x": float("nan")})

    def test_write_append_read(self):
        """ records written then appended come back in order """
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "records.ndjson")
            self.assertEqual(write_ndjson(path, [{"i": 0}, {"i": 1}]), 2)
            append_ndjson(path, {"i": 2})
            self.assertEqual(read_ndjson(path), [{"i": 0}, {"i": 1}, {"i": 2}])
            self.assertEqual(next(iter_ndjson(path)), {"i": 0})

    def test_bad_line(self):
        """ a line that is not JSON is reported with its line number """
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "records.ndjson")
            with open(path, "w") as f:
                f.write('{"i": 0}\n\nnot json\n')
            with self.assertRaisesRegex(ValueError, "line 3"):
                _ = read_ndjson(path)
            with self.assertRaises(FileNotFoundError):
                _ = read_ndjson(os.path.join(tmp, "missing.ndjson"))


class TestApplyArgsAndKwargs(unittest.TestCase):
    """ tests for apply_args_and_kwargs """

    def test_apply(self):
        """ positional and keyword arguments are forwarded """
        self.assertEqual(apply_args_and_kwargs(divmod, [7, 2], {}), (3, 1))
        self.assertEqual(apply_args_and_kwargs(int, ["ff"], {"base": 16}), 255)


# collect all of the TestCases from this module
_loader = unittest.TestLoader()
AllTestsUtil = unittest.TestSuite()
AllTestsUtil.addTests([
    _loader.loadTestsFromTestCase(TestDebugHandler),
    _loader.loadTestsFromTestCase(TestSeedsAndHashing),
    _loader.loadTestsFromTestCase(TestNdjson),
    _loader.loadTestsFromTestCase(TestApplyArgsAndKwargs),
])


if __name__ == "__main__":
    # run the tests for this module if invoked directly
    unittest.TextTestRunner(verbosity=2).run(AllTestsUtil)
