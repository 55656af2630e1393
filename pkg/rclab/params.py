"""
rclab/params.py

    module for organizing/handling parameters
"""


from typing import Dict, Any, Optional
from dataclasses import dataclass, asdict, field
import os
import errno
import copy

import yaml

from rclab.util import INCLUDE_DIR
from rclab.typing import YamlFilePath


# define path to default config file
_DEFAULT_CONFIG = os.path.join(INCLUDE_DIR, "default_params.yaml")


DOMAINS = ("math", "stem", "code", "simulation", "logic", "tabular")
DIFFICULTIES = ("easy", "medium", "hard")


# -----------------------------------------------------------------------------
# Component dataclasses that are nested under LabParams


@dataclass
class ModelHyper:
    """ hyperparameters of the tiny decoder-only policy """
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    d_ff: int = 128
    max_len: int = 256
    ln_eps: float = 1e-5
    init_std: float = 0.02

    def __post_init__(self):
        self.ln_eps = float(self.ln_eps)
        self.init_std = float(self.init_std)
        for name in ("d_model", "n_layers", "n_heads", "d_ff", "max_len"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"ModelHyper: {name} must be positive")
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"ModelHyper: n_heads ({self.n_heads}) must divide d_model ({self.d_model})")

    @property
    def d_head(self) -> int :
        return self.d_model // self.n_heads


@dataclass
class AdamWConfig:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    max_grad_norm: Optional[float] = 1.0

    def __post_init__(self):
        self.eps = float(self.eps)
        self.weight_decay = float(self.weight_decay)
        if not (0. <= self.beta1 < 1. and 0. <= self.beta2 < 1.):
            raise ValueError("AdamWConfig: betas must be in [0, 1)")


@dataclass
class ScheduleConfig:
    """
    learning rate schedule: linear warmup for ``warmup_steps`` steps then linear decay
    to ``final_frac * peak_lr`` at ``total_steps``
    """
    peak_lr: float
    warmup_steps: int
    final_frac: float = 0.
    total_steps: Optional[int] = None

    def __post_init__(self):
        self.peak_lr = float(self.peak_lr)
        self.final_frac = float(self.final_frac)
        if self.warmup_steps < 0:
            raise ValueError("ScheduleConfig: warmup_steps must be >= 0")
        if not 0. <= self.final_frac <= 1.:
            raise ValueError("ScheduleConfig: final_frac must be in [0, 1]")


@dataclass
class SftConfig:
    batch_size: int
    schedule: ScheduleConfig

    def __post_init__(self):
        if type(self.schedule) is dict:
            self.schedule = ScheduleConfig(**self.schedule)
        if self.batch_size < 1:
            raise ValueError("SftConfig: batch_size must be >= 1")


@dataclass
class DapoConfig:
    """ clip radii, group sampling and dynamic sampling settings for DAPO """
    eps_low: float
    eps_high: float
    group_size: int
    prompt_batch: int
    max_resample_rounds: int
    schedule: ScheduleConfig
    temperature: float = 1.0
    max_new: int = 192
    success_threshold: float = 1.0

    def __post_init__(self):
        if type(self.schedule) is dict:
            self.schedule = ScheduleConfig(**self.schedule)
        self.eps_low = float(self.eps_low)
        self.eps_high = float(self.eps_high)
        self.temperature = float(self.temperature)
        if not 0. < self.eps_low <= self.eps_high < 1.:
            raise ValueError(f"DapoConfig: need 0 < eps_low <= eps_high < 1, "
                             f"got eps_low={self.eps_low} eps_high={self.eps_high}")
        if self.group_size < 2:
            raise ValueError(f"DapoConfig: group_size must be >= 2, got {self.group_size}")
        if self.prompt_batch < 1:
            raise ValueError("DapoConfig: prompt_batch must be >= 1")
        if self.max_resample_rounds < 0:
            raise ValueError("DapoConfig: max_resample_rounds must be >= 0")
        if self.temperature <= 0.:
            raise ValueError("DapoConfig: temperature must be positive")


@dataclass
class _Budgets:
    sft: int
    math_medium: int
    math_hard: int
    joint: int

    def __post_init__(self):
        for k, v in asdict(self).items():
            if int(v) < 1:
                raise ValueError(f"curriculum.budgets.{k} must be positive, got {v}")


@dataclass
class CurriculumParams:
    variant: str
    difficulty_subcurriculum: bool
    match_budget: bool
    budgets: _Budgets
    mixture: Dict[str, float]
    advance_on_reward: Optional[float] = None
    reward_window: int = 10
    eval_every: int = 0
    checkpoint_every: int = 50

    def __post_init__(self):
        if type(self.budgets) is dict:
            self.budgets = _Budgets(**self.budgets)
        if set(self.mixture) - set(DOMAINS):
            raise ValueError(f"curriculum.mixture has unknown domains: {sorted(set(self.mixture) - set(DOMAINS))}")
        if any(w < 0 for w in self.mixture.values()) or sum(self.mixture.values()) <= 0:
            raise ValueError("curriculum.mixture weights must be >= 0 with a positive sum")


@dataclass
class DataParams:
    train_per_cell: int
    eval_per_difficulty: int
    cold_start: int
    backtrack_fraction: float

    def __post_init__(self):
        self.backtrack_fraction = float(self.backtrack_fraction)
        if not 0. <= self.backtrack_fraction <= 1.:
            raise ValueError("data.backtrack_fraction must be in [0, 1]")


@dataclass
class EvalParams:
    greedy: bool = True
    max_new: int = 192
    limit_per_domain: Optional[int] = None


# -----------------------------------------------------------------------------
# Helper functions for loading/writing configs


def _load_yaml(config: YamlFilePath
               ) -> Dict[str, Any] :
    """ Helper function that loads a config as a nested dict """
    with open(config, "r") as yf:
        try:
            cfg = yaml.safe_load(yf)
        except yaml.YAMLError as e:
            raise ValueError(f"_load_yaml: could not parse {config}: {e}") from e
    return cfg


def _load_default() -> Dict[str, Any] :
    """ Load the default parameters from the built-in configuration file as nested dict """
    return _load_yaml(_DEFAULT_CONFIG)


def _overwrite_defaults(params: Dict[str, Any],
                        config_params: Dict[str, Any],
                        config: str
                        ) -> Dict[str, Any] :
    """
    overwrite default values (in place) with the ones from a user config, a key that is
    not present in the defaults raises a ValueError naming the full (dotted) parameter path
    """
    # keep track of the current parameter that is being updated (track nested params)
    _current_param = []
    def overwrite(default, updated):
        for k, v in updated.items():
            _current_param.append(k)
            if type(v) is not dict or type(default.get(k)) is not dict:
                # forces a KeyError when the key from updated is not present in default
                _ = default[k]
                default[k] = v
            else:
                overwrite(default[k], v)
            _ = _current_param.pop()
    try:
        overwrite(params, config_params)
    except (KeyError, AttributeError) as e:
        raise ValueError(
            f"Supplied configuration file ({config}) contains an unrecognized parameter or section: "
            + ".".join(map(str, _current_param))
        ) from e
    return params


def _find_changes(default: Dict[str, Any], updated: Dict[str, Any]) -> Dict[str, Any] :
    """ recursively find entries that differ from the defaults """
    changes = {}
    for k, v in updated.items():
        if type(v) is not dict:
            if k not in default or v != default[k]:
                changes[k] = v
        else:
            if (changes_below := _find_changes(default.get(k, {}), v)) != {}:
                changes[k] = changes_below
    return changes


# -----------------------------------------------------------------------------
# Main parameter dataclass


@dataclass
class LabParams:
    """ class for organizing all rclab parameters """
    model: ModelHyper
    optimizer: AdamWConfig
    sft: SftConfig
    dapo: DapoConfig
    curriculum: CurriculumParams
    data: DataParams
    eval: EvalParams = field(default_factory=EvalParams)

    def __post_init__(self):
        if type(self.model) is dict:
            self.model = ModelHyper(**self.model)
        if type(self.optimizer) is dict:
            self.optimizer = AdamWConfig(**self.optimizer)
        if type(self.sft) is dict:
            self.sft = SftConfig(**self.sft)
        if type(self.dapo) is dict:
            self.dapo = DapoConfig(**self.dapo)
        if type(self.curriculum) is dict:
            self.curriculum = CurriculumParams(**self.curriculum)
        if type(self.data) is dict:
            self.data = DataParams(**self.data)
        if type(self.eval) is dict:
            self.eval = EvalParams(**self.eval)

    # --- static methods ---

    @staticmethod
    def load_default() -> "LabParams" : return LabParams(**_load_default())

    @staticmethod
    def from_config(config: YamlFilePath) -> "LabParams" :
        """
        Read parameters from a configuration file (YAML, or JSON since YAML is a superset)

        Any parameters not explicitly specified in the config are taken from the defaults.
        """
        params = _load_default()
        if not os.path.isfile(config):
            raise FileNotFoundError(errno.ENOENT, os.strerror(errno.ENOENT), config)
        config_params = _load_yaml(config)
        if config_params is not None:
            if type(config_params) is not dict:
                raise ValueError(f"Supplied configuration file ({config}) is not a mapping")
            _overwrite_defaults(params, config_params, config)
        try:
            return LabParams(**params)
        except TypeError as e:
            # a section was replaced by a scalar or similar structural problem
            raise ValueError(f"Supplied configuration file ({config}) is invalid: {e}") from e

    @staticmethod
    def from_dict(overrides: Dict[str, Any]) -> "LabParams" :
        """ defaults overwritten with a (nested) dict of overrides, same rules as from_config """
        params = _load_default()
        _overwrite_defaults(params, copy.deepcopy(overrides), "<dict>")
        return LabParams(**params)

    # --- normal methods ---

    def to_dict(self) -> Dict[str, Any] :
        return asdict(self)

    def write_config(self,
                     config: YamlFilePath,
                     include_unchanged: bool = False
                     ) -> None :
        """ Write current parameters to a configuration file """
        current = asdict(self)
        if include_unchanged:
            to_write = current
        else:
            to_write = _find_changes(_load_default(), current)
        with open(config, "w") as yf:
            yaml.safe_dump(to_write, yf, default_flow_style=False, sort_keys=False)
