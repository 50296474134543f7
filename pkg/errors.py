"""
修復工具的例外階層
所有模組拋出的錯誤都繼承 RepairToolError，方便 CLI 與 API 統一處理
"""

from typing import Optional


class RepairToolError(Exception):
    """修復工具基礎例外"""


class ConfigError(RepairToolError):
    """設定值不合法"""


class MappingError(RepairToolError):
    """規則對照表格式錯誤"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"第 {line} 行: {message}"
        super().__init__(message)


class IngestError(RepairToolError):
    """靜態分析輸出無法解析"""

    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)


class ScanError(RepairToolError):
    """C 原始碼掃描失敗（未結束的註解或字串）"""

    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"{message} (opened at line {line})")


class DirectiveError(RepairToolError):
    """條件式前置處理指令不成對"""

    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"{message} (line {line})")


class SiteError(RepairToolError):
    """無法定位修復位置；reason 會成為 SkippedUnsupported 的原因"""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


class EditConflictError(RepairToolError):
    """編輯範圍重疊（引擎內部錯誤防護）"""
