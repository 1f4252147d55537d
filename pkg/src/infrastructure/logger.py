"""
GeoPAS 的日志系统。提供集中式日志配置和实用工具。

作为库导入时只挂控制台处理器；命令行入口根据配置的 logging 段
再追加按天轮转的文件处理器。
"""

import logging
import logging.config
import os
import threading
from datetime import datetime
from typing import Any, Dict, Optional

ROOT_LOGGER = 'geopas'
LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')


class Logger:
    """集中式日志配置和工具。"""

    _configured = False
    _lock = threading.RLock()

    @classmethod
    def setup(cls, config: Optional[Dict[str, Any]] = None, log_file: Optional[str] = None,
              level: str = 'INFO', force: bool = False):
        """设置日志配置。

        log_file 可以包含 strftime 占位符（如 logs/%Y-%m-%d.log）；为 None 时不写文件。
        force=True 时允许在已配置后重新配置（CLI 读取配置文件后使用）。
        """
        with cls._lock:
            if cls._configured and not force:
                return

            if config is None:
                level = level.upper()
                if level not in LEVELS:
                    raise ValueError(f"invalid log level: {level}")
                resolved = None
                if log_file:
                    resolved = datetime.now().strftime(log_file)
                    directory = os.path.dirname(resolved)
                    if directory:
                        os.makedirs(directory, exist_ok=True)
                config = cls._get_default_config(resolved, level)

            if not cls._validate_config(config):
                raise ValueError("invalid logging configuration")

            logging.config.dictConfig(config)
            cls._configured = True

    @classmethod
    def _validate_config(cls, config: Dict[str, Any]) -> bool:
        """验证日志配置。"""
        if not isinstance(config, dict):
            return False
        if 'version' not in config:
            return False
        if 'handlers' in config and not isinstance(config['handlers'], dict):
            return False
        if 'loggers' in config and not isinstance(config['loggers'], dict):
            return False
        return True

    @classmethod
    def _get_default_config(cls, log_file: Optional[str] = None, level: str = 'INFO') -> Dict[str, Any]:
        """获取默认日志配置。"""
        handlers: Dict[str, Any] = {
            'console': {
                'class': 'logging.StreamHandler',
                'level': level,
                'formatter': 'simple',
                'stream': 'ext://sys.stderr'
            }
        }
        if log_file:
            handlers['file'] = {
                'class': 'logging.handlers.TimedRotatingFileHandler',
                'level': level,
                'formatter': 'standard',
                'filename': log_file,
                'when': 'midnight',
                'interval': 1,
                'backupCount': 30,
                'encoding': 'utf-8'
            }
        return {
            'version': 1,
            'disable_existing_loggers': False,
            'formatters': {
                'standard': {
                    'format': '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
                },
                'simple': {
                    'format': '%(levelname)s - %(message)s'
                }
            },
            'handlers': handlers,
            'loggers': {
                ROOT_LOGGER: {
                    'level': level,
                    'handlers': list(handlers),
                    'propagate': True
                }
            }
        }

    @classmethod
    def get_logger(cls, name: str = ROOT_LOGGER) -> logging.Logger:
        """获取一个日志记录器实例。模块名统一挂在 geopas 命名空间下。"""
        if not cls._configured:
            cls.setup()
        if name != ROOT_LOGGER and not name.startswith(ROOT_LOGGER + '.'):
            name = f"{ROOT_LOGGER}.{name}"
        return logging.getLogger(name)


# 便捷函数
def get_logger(name: str = ROOT_LOGGER) -> logging.Logger:
    """获取一个日志记录器实例。"""
    return Logger.get_logger(name)


def setup_logging(config: Optional[Dict[str, Any]] = None, log_file: Optional[str] = None,
                  level: str = 'INFO', force: bool = False):
    """设置日志配置。"""
    Logger.setup(config, log_file, level, force)
