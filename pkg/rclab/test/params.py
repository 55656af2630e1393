"""
rclab/test/params.py

    tests for the rclab/params.py module
"""


import unittest
import os
import tempfile

from rclab.test.__include import TEST_INCLUDE_DIR
from rclab.params import (
    _DEFAULT_CONFIG,
    LabParams,
    ModelHyper,
    DapoConfig,
    ScheduleConfig,
    DOMAINS
)


# define paths to test config files
_GOOD_CONFIG = os.path.join(TEST_INCLUDE_DIR, "good_config.yaml")
_GOOD_CONFIG_EMPTY = os.path.join(TEST_INCLUDE_DIR, "good_config_empty.yaml")
_GOOD_CONFIG_JSON = os.path.join(TEST_INCLUDE_DIR, "good_config.json")
_BAD_CONFIGS = [os.path.join(TEST_INCLUDE_DIR, f"bad_config_{i}.yaml") for i in range(1, 5)]


class TestLabParams(unittest.TestCase):
    """ tests for the LabParams class """

    def test_default_config_findable(self):
        """ ensure the built in default config file can be found """
        self.assertTrue(os.path.isfile(_DEFAULT_CONFIG),
                        f"could not find default config: {_DEFAULT_CONFIG}")

    def test_load_default_params(self):
        """ test that loading the default parameters works and gives the documented defaults """
        params = LabParams.load_default()
        self.assertEqual(params.dapo.eps_low, 0.2)
        self.assertEqual(params.dapo.eps_high, 0.28)
        self.assertEqual(params.dapo.max_resample_rounds, 3)
        self.assertEqual(params.dapo.success_threshold, 1.0)
        self.assertEqual(params.curriculum.variant, "RC")
        self.assertTrue(params.curriculum.difficulty_subcurriculum)
        self.assertEqual(set(params.curriculum.mixture), set(DOMAINS))
        self.assertIsNone(params.dapo.schedule.total_steps,
                          msg="total_steps should default to null (set per stage)")

    def test_load_bad_configs(self):
        """ test loading bad parameter config files """
        for i, config_file in enumerate(_BAD_CONFIGS, start=1):
            self.assertTrue(os.path.isfile(config_file),
                            f"could not find test config file: {config_file}")
            with self.assertRaises(ValueError,
                                   msg=f"bad config ({i}) should have caused a ValueError"):
                _ = LabParams.from_config(config_file)

    def test_unknown_parameter_is_named(self):
        """ the error for an unknown key should name the full dotted parameter path """
        with self.assertRaisesRegex(ValueError, r"dapo\.clip_ratio"):
            _ = LabParams.from_config(_BAD_CONFIGS[0])

    def test_missing_config(self):
        """ a config path that does not exist is a FileNotFoundError """
        with self.assertRaises(FileNotFoundError):
            _ = LabParams.from_config(os.path.join(TEST_INCLUDE_DIR, "not_a_config.yaml"))

    def test_load_good_configs(self):
        """ test loading good parameter config files """
        for config_file in [_GOOD_CONFIG, _GOOD_CONFIG_EMPTY, _GOOD_CONFIG_JSON]:
            self.assertTrue(os.path.isfile(config_file),
                            f"could not find test config file: {config_file}")
        default = LabParams.load_default()
        # --- Good config file
        params = LabParams.from_config(_GOOD_CONFIG)
        self.assertEqual(params.model.d_model, 32)
        self.assertEqual(params.model.n_heads, 2)
        self.assertEqual(params.dapo.group_size, 4)
        self.assertEqual(params.dapo.schedule.peak_lr, 1e-4)
        self.assertEqual(params.curriculum.budgets.joint, 120)
        # nested sections that were only partially given keep their other defaults
        self.assertEqual(params.dapo.schedule.warmup_steps, default.dapo.schedule.warmup_steps,
                         "dapo.schedule.warmup_steps should keep its default")
        self.assertEqual(params.curriculum.budgets.sft, default.curriculum.budgets.sft,
                         "curriculum.budgets.sft should keep its default")
        self.assertEqual(params.model.d_ff, default.model.d_ff)
        # --- JSON config file (YAML superset)
        params = LabParams.from_config(_GOOD_CONFIG_JSON)
        self.assertEqual(params.dapo.eps_high, 0.3)
        self.assertEqual(params.curriculum.mixture["math"], 2.0)
        self.assertEqual(params.curriculum.mixture["code"], 1.0,
                         "mixture weights not in the config should keep their defaults")
        # --- Empty config file should be same as defaults
        self.assertEqual(LabParams.from_config(_GOOD_CONFIG_EMPTY), default,
                         "parameters from empty config should match defaults")

    def test_from_dict(self):
        """ overrides from a dict follow the same rules as a config file """
        params = LabParams.from_dict({"model": {"n_layers": 1}})
        self.assertEqual(params.model.n_layers, 1)
        self.assertEqual(params.model.d_model, LabParams.load_default().model.d_model)
        with self.assertRaises(ValueError):
            _ = LabParams.from_dict({"model": {"width": 3}})
        with self.assertRaises(ValueError):
            _ = LabParams.from_dict({"dapo": {"group_size": 1}})

    def test_write_config_roundtrip(self):
        """ write a config (full and changed-only) then read it back """
        params = LabParams.from_config(_GOOD_CONFIG)
        with tempfile.TemporaryDirectory() as tmp:
            for include_unchanged in (True, False):
                path = os.path.join(tmp, f"config_{include_unchanged}.yaml")
                params.write_config(path, include_unchanged=include_unchanged)
                self.assertEqual(LabParams.from_config(path), params,
                                 f"round trip failed (include_unchanged={include_unchanged})")

    def test_write_default_changed_only_is_empty(self):
        """ the changed-only config of the defaults has no entries and loads as defaults """
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "config.yaml")
            LabParams.load_default().write_config(path)
            self.assertEqual(LabParams.from_config(path), LabParams.load_default())


class TestComponentValidation(unittest.TestCase):
    """ tests for the validation in the nested parameter dataclasses """

    def test_model_hyper(self):
        """ heads must divide the model width and sizes must be positive """
        self.assertEqual(ModelHyper(d_model=8, n_heads=2).d_head, 4)
        with self.assertRaises(ValueError):
            _ = ModelHyper(d_model=30, n_heads=4)
        with self.assertRaises(ValueError):
            _ = ModelHyper(n_layers=0)

    def test_dapo_clip_radii(self):
        """ 0 < eps_low <= eps_high < 1 """
        sched = ScheduleConfig(peak_lr=1e-3, warmup_steps=0)
        # symmetric clipping is allowed
        _ = DapoConfig(eps_low=0.2, eps_high=0.2, group_size=2, prompt_batch=1,
                       max_resample_rounds=0, schedule=sched)
        for lo, hi in [(0.3, 0.2), (0., 0.2), (0.2, 1.0)]:
            with self.assertRaises(ValueError, msg=f"eps_low={lo} eps_high={hi} should be rejected"):
                _ = DapoConfig(eps_low=lo, eps_high=hi, group_size=2, prompt_batch=1,
                               max_resample_rounds=0, schedule=sched)

    def test_schedule(self):
        """ final_frac must be a fraction and warmup non-negative """
        with self.assertRaises(ValueError):
            _ = ScheduleConfig(peak_lr=1e-3, warmup_steps=-1)
        with self.assertRaises(ValueError):
            _ = ScheduleConfig(peak_lr=1e-3, warmup_steps=0, final_frac=1.5)


# collect all of the TestCases from this module
_loader = unittest.TestLoader()
AllTestsParams = unittest.TestSuite()
AllTestsParams.addTests([
    _loader.loadTestsFromTestCase(TestLabParams),
    _loader.loadTestsFromTestCase(TestComponentValidation),
])


if __name__ == "__main__":
    # run the tests for this module if invoked directly
    unittest.TextTestRunner(verbosity=2).run(AllTestsParams)
