"""
GeoPAS 的配置管理。
从 YAML 文件加载设置，合并到内置默认值之上，并构造不可变的 RunConfig。
不读取任何环境变量。
"""

import copy
import hashlib
import json
import threading
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple

import yaml

from .logger import LEVELS, get_logger
from ..domain.evaluation.protocol import SelectionConfig
from ..domain.evaluation.splits import STRATEGIES
from ..domain.model.training import TrainConfig
from ..domain.selection.selector import SELECTION_MODES
from ..utils.exceptions import ConfigurationError

logger = get_logger(__name__)

SCHEMA_VERSION = 1
DEFAULT_CONFIG_FILE = 'configs/config.yaml'
LABEL_SOURCES = ('runs', 'ert', 'synthetic')


def _default_config() -> Dict[str, Any]:
    """获取默认配置值。"""
    return {
        'schema_version': SCHEMA_VERSION,
        'logging': {
            'level': 'INFO',
            'file': None
        },
        'suite': {
            'functions': [1, 2, 3, 15],
            'dimensions': [2],
            'instances': [1, 2, 3],
            'repetitions': 2,
            'bound': 5.0
        },
        'probing': {
            'k': 32,
            'r': 8,
            'scale_min': 0.02,
            'scale_max': 0.7,
            'scale_distribution': 'log_uniform',
            'seed': 2024,
            'workers': 1
        },
        'model': {
            'epochs': 30,
            'batch_size': 64,
            'learning_rate': 1e-3,
            'lambda_cls': 10.0,
            'seed': 0,
            'dropout': True,
            'dropout_rate': 0.2,
            'disable_side': False,
            'disable_dimension': False,
            'disable_catastrophe': False,
            'regression_target': 'log'
        },
        'selection': {
            'mode': 'full',
            'lambda_cap': 3.0,
            'lambda_q90': 3.0,
            'sbs_criterion': 'mean'
        },
        'labels': {
            'source': 'synthetic',
            'path': None,
            'synthetic': {
                'family_a': [1, 2, 10, 14],
                'family_b': [3, 15, 16, 23],
                'base_ert': 1000.0,
                'slowdown': 20.0,
                'noise': 0.1,
                'cap_rate': 0.0,
                'cap_solvers': ['solver1', 'solver2'],
                'seed': 7
            }
        },
        'evaluation': {
            'protocol': 'LIO',
            'folds': 5,
            'seed': 0,
            'sweep': {
                'k': [8, 16, 32],
                'r': [4, 8, 16]
            },
            'cost': {
                'resolutions': [8, 16, 32, 64],
                'dimensions': [2, 5, 10, 20],
                'slices': 128,
                'repeats': 3
            }
        },
        'output': {
            'directory': 'runs/default',
            'force': False
        }
    }


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


class Config:
    """GeoPAS 的配置管理器。"""

    def __init__(self, config_file: Optional[str] = None):
        self._config: Dict[str, Any] = {}
        self._config_file = config_file or DEFAULT_CONFIG_FILE
        self._lock = threading.RLock()
        self.load()

    @property
    def path(self) -> str:
        return self._config_file

    def load(self):
        """从文件加载配置并合并默认值。"""
        config_path = Path(self._config_file)
        logger.info(f"Loading configuration from: {config_path}")
        if not config_path.exists():
            raise ConfigurationError(f"configuration file not found: {config_path}")
        try:
            with open(config_path, 'r', encoding='utf-8') as f:
                loaded = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigurationError(f"invalid YAML in {config_path}: {e}")
        if not isinstance(loaded, dict):
            raise ConfigurationError(f"top level of {config_path} must be a mapping")
        version = loaded.get('schema_version')
        if version != SCHEMA_VERSION:
            raise ConfigurationError(
                f"unsupported schema_version {version!r} in {config_path}, expected {SCHEMA_VERSION}")
        self._config = _deep_merge(_default_config(), loaded)
        logger.debug(f"Configuration loaded with {len(self._config)} top-level keys")

    def get(self, key: str, default=None):
        """通过键获取配置值（支持点号表示法）。"""
        with self._lock:
            value = self._config
            for k in key.split('.'):
                if isinstance(value, dict) and k in value:
                    value = value[k]
                else:
                    return default
            return value

    def set(self, key: str, value: Any):
        """通过键设置配置值（支持点号表示法）。"""
        with self._lock:
            keys = key.split('.')
            config = self._config
            for k in keys[:-1]:
                if k not in config or not isinstance(config[k], dict):
                    config[k] = {}
                config = config[k]
            config[keys[-1]] = value

    def apply_overrides(self, overrides: Iterable[str]):
        """应用 key.path=value 形式的覆盖；value 按 YAML 标量解析。"""
        for item in overrides:
            if '=' not in item:
                raise ConfigurationError(f"override must look like key.path=value, got '{item}'")
            key, raw = item.split('=', 1)
            key = key.strip()
            if not key:
                raise ConfigurationError(f"override has an empty key: '{item}'")
            try:
                value = yaml.safe_load(raw)
            except yaml.YAMLError as e:
                raise ConfigurationError(f"cannot parse override value '{raw}': {e}")
            logger.debug(f"Override {key} = {value!r}")
            self.set(key, value)

    def save(self, path: Optional[str] = None):
        """将当前配置保存到文件。"""
        with self._lock:
            config_path = Path(path or self._config_file)
            config_path.parent.mkdir(parents=True, exist_ok=True)
            with open(config_path, 'w', encoding='utf-8') as f:
                yaml.safe_dump(self._config, f, default_flow_style=False, allow_unicode=True, sort_keys=False)

    def reload(self):
        """从文件重新加载配置。"""
        self.load()

    def get_all(self) -> Dict[str, Any]:
        """获取所有配置值。"""
        return copy.deepcopy(self._config)


# ---------------------------------------------------------------------------
# RunConfig
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SuiteSpec:
    functions: Tuple[int, ...]
    dimensions: Tuple[int, ...]
    instances: Tuple[int, ...]
    repetitions: int
    bound: float = 5.0

    def datapoints(self) -> List[Tuple[int, int, int, int]]:
        return [(f, d, i, rep) for f in self.functions for d in self.dimensions
                for i in self.instances for rep in range(self.repetitions)]


@dataclass(frozen=True)
class ProbingSpec:
    k: int
    r: int
    scale_min: float
    scale_max: float
    scale_distribution: str
    seed: int
    workers: int = 1


@dataclass(frozen=True)
class SyntheticSpec:
    family_a: Tuple[int, ...]
    family_b: Tuple[int, ...]
    base_ert: float
    slowdown: float
    noise: float
    cap_rate: float
    seed: int
    cap_solvers: Tuple[str, ...] = ('solver1', 'solver2')


@dataclass(frozen=True)
class LabelsSpec:
    source: str
    path: Optional[str]
    synthetic: SyntheticSpec


@dataclass(frozen=True)
class EvaluationSpec:
    protocol: str
    folds: int
    seed: int
    sweep_k: Tuple[int, ...]
    sweep_r: Tuple[int, ...]
    cost_resolutions: Tuple[int, ...]
    cost_dimensions: Tuple[int, ...]
    cost_slices: int
    cost_repeats: int


@dataclass(frozen=True)
class RunConfig:
    """一次运行的完整、不可变配置。"""
    suite: SuiteSpec
    probing: ProbingSpec
    model: TrainConfig
    selection: SelectionConfig
    labels: LabelsSpec
    evaluation: EvaluationSpec
    output_directory: str
    force: bool = False
    log_level: str = 'INFO'
    log_file: Optional[str] = None

    @classmethod
    def from_config(cls, config: Config) -> "RunConfig":
        data = config.get_all()
        try:
            return cls._build(data)
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigurationError(f"invalid configuration value: {e}")

    @classmethod
    def _build(cls, data: Dict[str, Any]) -> "RunConfig":
        s, p, m, sel, lab, ev = (data['suite'], data['probing'], data['model'], data['selection'],
                                 data['labels'], data['evaluation'])
        suite = SuiteSpec(functions=_ints(s['functions']), dimensions=_ints(s['dimensions']),
                          instances=_ints(s['instances']), repetitions=int(s['repetitions']),
                          bound=float(s['bound']))
        probing = ProbingSpec(k=int(p['k']), r=int(p['r']), scale_min=float(p['scale_min']),
                              scale_max=float(p['scale_max']),
                              scale_distribution=str(p['scale_distribution']),
                              seed=int(p['seed']), workers=int(p['workers']))
        model = TrainConfig(epochs=int(m['epochs']), batch_size=int(m['batch_size']),
                            learning_rate=float(m['learning_rate']), lambda_cls=float(m['lambda_cls']),
                            seed=int(m['seed']), dropout=bool(m['dropout']),
                            dropout_rate=float(m['dropout_rate']), disable_side=bool(m['disable_side']),
                            disable_dimension=bool(m['disable_dimension']),
                            disable_catastrophe=bool(m['disable_catastrophe']),
                            regression_target=str(m['regression_target']))
        selection = SelectionConfig(mode=str(sel['mode']), sbs_criterion=str(sel['sbs_criterion']),
                                    lambda_cap=float(sel['lambda_cap']), lambda_q90=float(sel['lambda_q90']))
        syn = lab['synthetic']
        labels = LabelsSpec(source=str(lab['source']), path=lab.get('path'),
                            synthetic=SyntheticSpec(family_a=_ints(syn['family_a']),
                                                    family_b=_ints(syn['family_b']),
                                                    base_ert=float(syn['base_ert']),
                                                    slowdown=float(syn['slowdown']),
                                                    noise=float(syn['noise']),
                                                    cap_rate=float(syn['cap_rate']),
                                                    seed=int(syn['seed']),
                                                    cap_solvers=tuple(str(n) for n in syn['cap_solvers'])))
        evaluation = EvaluationSpec(protocol=str(ev['protocol']), folds=int(ev['folds']), seed=int(ev['seed']),
                                    sweep_k=_ints(ev['sweep']['k']), sweep_r=_ints(ev['sweep']['r']),
                                    cost_resolutions=_ints(ev['cost']['resolutions']),
                                    cost_dimensions=_ints(ev['cost']['dimensions']),
                                    cost_slices=int(ev['cost']['slices']),
                                    cost_repeats=int(ev['cost']['repeats']))
        run = cls(suite=suite, probing=probing, model=model, selection=selection, labels=labels,
                  evaluation=evaluation, output_directory=str(data['output']['directory']),
                  force=bool(data['output']['force']),
                  log_level=str(data['logging']['level']).upper(),
                  log_file=data['logging'].get('file'))
        run.validate()
        return run

    def validate(self):
        """检查取值范围；失败时抛出 ConfigurationError。"""
        problems = []
        if not self.suite.functions or any(not 1 <= f <= 24 for f in self.suite.functions):
            problems.append("suite.functions must be a non-empty subset of 1..24")
        if not self.suite.dimensions or any(d < 2 for d in self.suite.dimensions):
            problems.append("suite.dimensions must be >= 2")
        if not self.suite.instances or any(i < 1 for i in self.suite.instances):
            problems.append("suite.instances must be >= 1")
        if self.suite.repetitions < 1:
            problems.append("suite.repetitions must be >= 1")
        if self.probing.k < 1:
            problems.append("probing.k must be >= 1")
        if self.probing.r < 4 or self.probing.r % 4:
            problems.append("probing.r must be a positive multiple of 4")
        if not 0 < self.probing.scale_min <= self.probing.scale_max:
            problems.append("probing.scale_min must be positive and <= scale_max")
        if self.probing.scale_distribution not in ('log_uniform', 'uniform'):
            problems.append("probing.scale_distribution must be log_uniform or uniform")
        if self.probing.seed < 0 or self.model.seed < 0 or self.evaluation.seed < 0:
            problems.append("seeds must be non-negative")
        if self.probing.workers < 1:
            problems.append("probing.workers must be >= 1")
        if self.selection.mode not in SELECTION_MODES:
            problems.append(f"selection.mode must be one of {SELECTION_MODES}")
        if self.selection.sbs_criterion not in ('mean', 'median'):
            problems.append("selection.sbs_criterion must be mean or median")
        if self.labels.source not in LABEL_SOURCES:
            problems.append(f"labels.source must be one of {LABEL_SOURCES}")
        if self.labels.source != 'synthetic' and not self.labels.path:
            problems.append("labels.path is required for runs/ert label sources")
        if not 0.0 <= self.labels.synthetic.cap_rate <= 1.0:
            problems.append("labels.synthetic.cap_rate must be in [0, 1]")
        if not set(self.labels.synthetic.cap_solvers) <= {'solver1', 'solver2'}:
            problems.append("labels.synthetic.cap_solvers may only name solver1 and solver2")
        if self.evaluation.protocol not in STRATEGIES:
            problems.append(f"evaluation.protocol must be one of {sorted(STRATEGIES)}")
        if self.evaluation.folds < 2:
            problems.append("evaluation.folds must be >= 2")
        if self.log_level not in LEVELS:
            problems.append(f"logging.level must be one of {LEVELS}")
        if any(r < 4 or r % 4 for r in self.evaluation.sweep_r):
            problems.append("evaluation.sweep.r values must be positive multiples of 4")
        if problems:
            raise ConfigurationError("; ".join(problems))

    def dataset_section(self) -> Dict[str, Any]:
        """决定探测数据集内容的配置段。"""
        return {'schema_version': SCHEMA_VERSION, 'suite': asdict(self.suite),
                'probing': {k: v for k, v in asdict(self.probing).items() if k != 'workers'}}

    def content_hash(self) -> str:
        """数据相关配置段的 SHA-256（规范化 JSON）。"""
        return canonical_hash(self.dataset_section())


def canonical_hash(data: Any) -> str:
    blob = json.dumps(data, sort_keys=True, separators=(',', ':'), default=list)
    return hashlib.sha256(blob.encode('utf-8')).hexdigest()


def _ints(values) -> Tuple[int, ...]:
    if isinstance(values, int):
        return (values,)
    return tuple(int(v) for v in values)


def load_run_config(path: Optional[str] = None, overrides: Iterable[str] = ()) -> Tuple[Config, RunConfig]:
    """读取配置文件、应用覆盖并构造 RunConfig。"""
    config = Config(path)
    config.apply_overrides(overrides)
    return config, RunConfig.from_config(config)
