"""
rclab/test/tasks/__all_tests.py

    special module for grouping all TestSuites from submodules/subpackages below
"""


import unittest

from rclab.test.tasks._common import AllTestsCommon
from rclab.test.tasks._math import AllTestsMath
from rclab.test.tasks._code import AllTestsCode
from rclab.test.tasks._stem import AllTestsStem
from rclab.test.tasks._simulation import AllTestsSimulation
from rclab.test.tasks._logic import AllTestsLogic
from rclab.test.tasks._tabular import AllTestsTabular
from rclab.test.tasks.gen import AllTestsGen

# collect tests
AllTests = unittest.TestSuite()
AllTests.addTests([
    AllTestsCommon,
    AllTestsMath,
    AllTestsCode,
    AllTestsStem,
    AllTestsSimulation,
    AllTestsLogic,
    AllTestsTabular,
    AllTestsGen
])
