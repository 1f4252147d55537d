"""
GeoPAS 应用程序初始化器。
负责读取配置、设置日志并把共享服务注册到容器。
"""

from pathlib import Path
from typing import Optional, Sequence

from src.infrastructure.config import Config, RunConfig
from src.infrastructure.container import Container
from src.infrastructure.logger import get_logger, setup_logging


class ApplicationInitializer:
    """应用程序初始化器，负责设置和注册所有组件。"""

    def __init__(self, container: Container):
        self.container = container
        self._initialized = False

    def initialize(self, config_file: Optional[str] = None, overrides: Sequence[str] = (),
                   log_level: Optional[str] = None):
        """初始化整个应用程序。重复调用无效。"""
        if self._initialized:
            return

        config = Config(config_file)
        config.apply_overrides(overrides)
        if log_level:
            config.set('logging.level', log_level.upper())
        self.container.register('config', config)
        self.container.register_factory('run_config', lambda: RunConfig.from_config(config))

        run = self.container.get('run_config')
        self._setup_logging(run)
        self.container.register('output_directory', Path(run.output_directory))

        self._initialized = True
        get_logger(__name__).debug(f"Application initialized from {config.path} "
                                   f"(config hash {run.content_hash()[:12]})")

    def _setup_logging(self, run: RunConfig):
        """按配置的 logging 段重新设置日志系统。"""
        setup_logging(log_file=run.log_file, level=run.log_level, force=True)
