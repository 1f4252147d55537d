"""
GeoPAS 的自定义异常。
"""

from typing import Optional


class GeoPASError(Exception):
    """GeoPAS 相关错误的基础异常。"""
    pass


class ConfigurationError(GeoPASError):
    """因配置相关错误而引发的异常。"""
    pass


class InputError(GeoPASError):
    """因输入参数不合法（长度、维度不匹配或为空）而引发的异常。"""
    pass


class ShapeError(InputError):
    """因张量形状不匹配而引发的异常。"""
    pass


class DataError(GeoPASError):
    """因标签数据或数据集内容错误而引发的异常。"""
    pass


class IngestionError(DataError):
    """因 CSV 导入时某一行不符合格式而引发的异常。"""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class SerializationError(DataError):
    """因序列化容器损坏或版本不匹配而引发的异常。"""
    pass
