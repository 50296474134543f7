import os
from typing import Any, Dict, Optional

from dotenv import dotenv_values, load_dotenv

from errors import ConfigError

# 載入環境變數
load_dotenv()

# 視為「關閉」的字串值（REPAIR_MSC12=0 之類）
_FALSE_VALUES = {'', '0', 'false', 'no', 'off'}

OUTPUT_MODES = ('patch', 'in-place')


def env_flag(value: Optional[str]) -> bool:
    """判斷環境變數或設定檔字串是否代表開啟"""
    if value is None:
        return False
    return value.strip().lower() not in _FALSE_VALUES


class Config:
    """配置類別管理修復工具設定"""

    # 日誌等級（CLI 與 API 共用）
    LOG_LEVEL = os.getenv('ACR_LOG_LEVEL', 'INFO').upper()

    # 修復標頭檔名稱
    HEADER_NAME = os.getenv('ACR_HEADER_NAME', 'acr.h')

    # API 服務設定
    API_HOST = os.getenv('ACR_API_HOST', '0.0.0.0')
    API_PORT = int(os.getenv('ACR_API_PORT', '8000'))

    def __init__(self, **overrides: Any):
        # 預設值來自環境變數（可透過 .env 覆寫）
        self.source_root: str = os.getenv('ACR_SOURCE_ROOT', '.')
        self.alert_inputs: list = []  # [(format, path), ...]
        self.mapping_path: str = os.getenv('ACR_MAPPING', 'builtin')
        self.error_handler: Optional[str] = os.getenv('ACR_ERROR_HANDLER') or None
        # MSC12-C 修復預設關閉，只有使用者明確要求才開啟
        self.msc12_enabled: bool = env_flag(os.getenv('REPAIR_MSC12'))
        self.output_mode: str = os.getenv('ACR_OUTPUT_MODE', 'patch')
        self.backup: bool = env_flag(os.getenv('ACR_BACKUP', '1'))
        self.workers: int = int(os.getenv('ACR_WORKERS', '1'))
        # 警告行號以插入 #include "acr.h" 之前的檔案為準（同一批警告重跑）
        self.shift_after_include: bool = env_flag(os.getenv('ACR_SHIFT_AFTER_INCLUDE', '1'))
        self.check_only: bool = False
        self.default_format: str = 'generic'

        for key, value in overrides.items():
            if not hasattr(self, key):
                raise ConfigError(f"未知的設定項目: {key}")
            setattr(self, key, value)

    @classmethod
    def from_file(cls, path: str) -> Dict[str, Any]:
        """讀取 key = value 設定檔，回傳已轉型的覆寫值"""
        if not os.path.exists(path):
            raise ConfigError(f"設定檔不存在: {path}")

        raw = dotenv_values(path)
        values: Dict[str, Any] = {}
        for key, value in raw.items():
            name = key.strip().lower().replace('_', '-')
            if value is None:
                continue
            if name == 'root':
                values['source_root'] = value
            elif name == 'mapping':
                values['mapping_path'] = value
            elif name == 'error-handler':
                values['error_handler'] = value or None
            elif name == 'msc12':
                values['msc12_enabled'] = env_flag(value)
            elif name == 'in-place':
                values['output_mode'] = 'in-place' if env_flag(value) else 'patch'
            elif name == 'backup':
                values['backup'] = env_flag(value)
            elif name == 'no-backup':
                values['backup'] = not env_flag(value)
            elif name == 'shift-after-include':
                values['shift_after_include'] = env_flag(value)
            elif name == 'workers':
                try:
                    values['workers'] = int(value)
                except ValueError:
                    raise ConfigError(f"workers 必須是整數: {value}")
            elif name == 'format':
                values['default_format'] = value
            else:
                raise ConfigError(f"設定檔含有未知項目: {key}")
        return values

    def validate(self) -> 'Config':
        """檢查設定是否合法"""
        if self.workers < 1:
            raise ConfigError(f"workers 必須為正整數: {self.workers}")
        if self.output_mode not in OUTPUT_MODES:
            raise ConfigError(f"未知的輸出模式: {self.output_mode}")
        if self.error_handler is not None and not self.error_handler.strip():
            raise ConfigError("error_handler 不可為空白")
        return self
