"""
rclab/typing.py

    type annotations for use across this package
"""


from typing import Dict, List

import numpy as np
import numpy.typing as npt


type TokenIds = List[int]

# named weight arrays of the policy model, in canonical order
type WeightDict = Dict[str, npt.NDArray[np.float64]]

type YamlFilePath = str
type NdjsonFilePath = str
