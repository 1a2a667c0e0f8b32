"""异常体系。每个异常类带 exit_code，由命令行层映射为进程退出码。"""


class LseError(Exception):
    """所有模型错误的基类。"""
    exit_code = 3


class UsageError(LseError):
    """命令行参数错误。"""
    exit_code = 1


# ── 输入类错误（退出码 2） ──

class InvalidInput(LseError, ValueError):
    exit_code = 2


class OutOfRange(InvalidInput):
    """字段超出允许范围。field 为点号路径，如 "dos.variance_sigma2"。"""

    def __init__(self, field, message=""):
        self.field = field
        super().__init__(f"{field}: {message}" if message else field)


class PreconditionViolation(InvalidInput):
    pass


class ConfigError(InvalidInput):
    pass


class MissingKey(ConfigError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"缺少配置项: {name}")


class UnknownKey(ConfigError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"未知配置项: {name}")


class UnitMismatch(ConfigError):
    def __init__(self, field, found=""):
        self.field = field
        super().__init__(f"单位不匹配: {field} ({found})" if found else f"单位不匹配: {field}")


class DataError(InvalidInput):
    pass


class ParseError(DataError):
    def __init__(self, line, message=""):
        self.line = line
        super().__init__(f"第 {line} 行解析失败: {message}")


class DuplicateAbscissa(DataError):
    def __init__(self, value):
        self.value = value
        super().__init__(f"横坐标重复: {value!r}")


class EmptyFile(DataError):
    pass


# ── 数值类错误（退出码 3） ──

class DegenerateSystem(LseError):
    pass


class DegeneratePath(LseError):
    pass


class StepTooLarge(LseError):
    pass


class SingleLevelMode(LseError):
    """方差为 0 时不存在高斯态密度，调用方应走单能级路径。"""


class EnergyFoldError(LseError):
    pass


class NoPeak(LseError):
    pass


class TruncatedLine(LseError):
    pass


class InvalidStart(LseError):
    pass


class Diverged(LseError):
    pass


class CheckFailed(LseError):
    """limits / selftest 中有检查未通过。"""
    exit_code = 4
