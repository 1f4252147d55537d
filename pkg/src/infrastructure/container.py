"""
GeoPAS 命令层使用的服务容器。
保存一次 CLI 调用共享的配置、RunConfig 与输出目录等单例服务。
"""

from typing import Any, Callable, Dict

from .logger import get_logger
from ..utils.exceptions import ConfigurationError

logger = get_logger(__name__)


class Container:
    """按名称注册单例或惰性工厂。"""

    def __init__(self):
        self._services: Dict[str, Any] = {}
        self._factories: Dict[str, Callable[[], Any]] = {}

    def register(self, service_name: str, service: Any):
        """注册一个单例服务实例。"""
        self._services[service_name] = service

    def register_factory(self, service_name: str, factory: Callable[[], Any]):
        """注册一个工厂函数；首次 get 时创建并缓存。"""
        self._factories[service_name] = factory

    def get(self, service_name: str) -> Any:
        if service_name in self._services:
            return self._services[service_name]
        if service_name in self._factories:
            logger.debug(f"Creating service {service_name} from factory")
            service = self._factories.pop(service_name)()
            self._services[service_name] = service
            return service
        raise ConfigurationError(f"service '{service_name}' not registered")

    def has(self, service_name: str) -> bool:
        return service_name in self._services or service_name in self._factories

    def clear(self):
        """清除所有已注册的服务（对测试有用）。"""
        self._services.clear()
        self._factories.clear()
