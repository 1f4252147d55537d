"""
Unit tests for configuration loading, overrides and RunConfig.
"""

from dataclasses import FrozenInstanceError
from pathlib import Path

import pytest
import yaml

from src.infrastructure.config import (SCHEMA_VERSION, Config, RunConfig, SuiteSpec, canonical_hash,
                                       load_run_config)
from src.utils.exceptions import ConfigurationError


def write_config(path, **sections):
    data = {'schema_version': SCHEMA_VERSION, 'logging': {'level': 'INFO', 'file': None}}
    data.update(sections)
    path.write_text(yaml.safe_dump(data), encoding='utf-8')
    return str(path)


class TestConfig:
    def test_defaults_merged(self, tmp_path):
        """测试文件中未出现的键取默认值，出现的键覆盖默认值。"""
        path = write_config(tmp_path / 'c.yaml', probing={'k': 8})
        config = Config(path)
        assert config.get('probing.k') == 8
        assert config.get('probing.r') == 8
        assert config.get('model.lambda_cls') == 10.0
        assert config.get('missing.key', 'fallback') == 'fallback'

    def test_missing_file(self, tmp_path):
        """测试配置文件不存在。"""
        with pytest.raises(ConfigurationError, match='not found'):
            Config(str(tmp_path / 'nope.yaml'))

    def test_invalid_yaml(self, tmp_path):
        """测试 YAML 语法错误。"""
        path = tmp_path / 'bad.yaml'
        path.write_text('suite: [1, 2\n', encoding='utf-8')
        with pytest.raises(ConfigurationError):
            Config(str(path))

    @pytest.mark.parametrize('content', ['schema_version: 2\n', 'suite: {}\n', '- 1\n- 2\n'])
    def test_schema_version_required(self, tmp_path, content):
        """测试 schema_version 缺失、不匹配或顶层不是映射。"""
        path = tmp_path / 'c.yaml'
        path.write_text(content, encoding='utf-8')
        with pytest.raises(ConfigurationError):
            Config(str(path))

    def test_set_and_get_dot_notation(self, tmp_path):
        """测试点号表示法读写，中间层不存在时自动创建。"""
        config = Config(write_config(tmp_path / 'c.yaml'))
        config.set('evaluation.sweep.k', [4])
        config.set('extra.nested.value', 3)
        assert config.get('evaluation.sweep.k') == [4]
        assert config.get('extra.nested.value') == 3

    def test_apply_overrides_parses_yaml_scalars(self, tmp_path):
        """测试覆盖值按 YAML 标量解析。"""
        config = Config(write_config(tmp_path / 'c.yaml'))
        config.apply_overrides(['probing.k=16', 'model.dropout=false', 'suite.functions=[1, 5]',
                                'evaluation.protocol=LPO'])
        assert config.get('probing.k') == 16
        assert config.get('model.dropout') is False
        assert config.get('suite.functions') == [1, 5]
        assert config.get('evaluation.protocol') == 'LPO'

    @pytest.mark.parametrize('override', ['probing.k', '=3'])
    def test_bad_override(self, tmp_path, override):
        """测试格式错误的覆盖。"""
        config = Config(write_config(tmp_path / 'c.yaml'))
        with pytest.raises(ConfigurationError):
            config.apply_overrides([override])

    def test_save_and_reload(self, tmp_path):
        """测试保存后重新加载得到相同内容。"""
        config = Config(write_config(tmp_path / 'c.yaml'))
        config.set('probing.k', 4)
        target = tmp_path / 'out' / 'saved.yaml'
        config.save(str(target))
        assert Config(str(target)).get_all() == config.get_all()


class TestRunConfig:
    def test_from_config(self, tmp_path):
        """测试由配置构造不可变的 RunConfig。"""
        path = write_config(tmp_path / 'c.yaml', suite={'functions': [1, 21], 'dimensions': 3},
                            model={'epochs': 2}, output={'directory': str(tmp_path / 'run')})
        run = RunConfig.from_config(Config(path))
        assert run.suite.functions == (1, 21)
        assert run.suite.dimensions == (3,)
        assert run.model.epochs == 2
        assert run.model.lambda_cls == 10.0
        assert run.selection.lambda_cap == 3.0 and run.selection.lambda_q90 == 3.0
        assert run.output_directory == str(tmp_path / 'run')
        with pytest.raises(FrozenInstanceError):
            run.force = True

    @pytest.mark.parametrize('override', [
        'suite.functions=[0, 3]',
        'suite.dimensions=[1]',
        'suite.repetitions=0',
        'probing.r=6',
        'probing.scale_min=0.9',
        'probing.scale_distribution=normal',
        'selection.mode=greedy',
        'selection.sbs_criterion=max',
        'labels.source=runs',
        'labels.synthetic.cap_solvers=[solver3]',
        'evaluation.protocol=kfold',
        'evaluation.folds=1',
        'logging.level=LOUD',
        'evaluation.sweep.r=[4, 5]',
        'probing.k=abc',
    ])
    def test_validation_errors(self, tmp_path, override):
        """测试越界或非法取值导致 ConfigurationError。"""
        with pytest.raises(ConfigurationError):
            load_run_config(write_config(tmp_path / 'c.yaml'), [override])

    def test_content_hash_tracks_dataset_settings(self, tmp_path):
        """测试哈希只随影响数据集的配置段变化。"""
        path = write_config(tmp_path / 'c.yaml')
        _, base = load_run_config(path)
        _, same = load_run_config(path, ['model.epochs=3', 'probing.workers=4', 'evaluation.protocol=LPO'])
        _, changed = load_run_config(path, ['probing.k=4'])
        assert base.content_hash() == same.content_hash()
        assert base.content_hash() != changed.content_hash()
        assert len(base.content_hash()) == 64

    def test_canonical_hash_ignores_key_order(self):
        """测试规范化哈希与键顺序无关。"""
        assert canonical_hash({'a': 1, 'b': [1, 2]}) == canonical_hash({'b': [1, 2], 'a': 1})

    def test_shipped_configs_are_valid(self):
        """测试仓库自带的配置文件都能通过校验。"""
        root = Path(__file__).resolve().parent.parent
        for name in ('config.yaml', 'full.yaml', 'synthetic.yaml'):
            _, run = load_run_config(str(root / 'configs' / name))
            run.validate()


class TestSuiteSpec:
    def test_datapoints_order(self):
        """测试数据点按 (f, d, i, rep) 字典序列出。"""
        suite = SuiteSpec(functions=(1, 3), dimensions=(2,), instances=(1, 2), repetitions=2)
        points = suite.datapoints()
        assert len(points) == 8
        assert points[:3] == [(1, 2, 1, 0), (1, 2, 1, 1), (1, 2, 2, 0)]
        assert points[-1] == (3, 2, 2, 1)
