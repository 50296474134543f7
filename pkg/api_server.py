from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from starlette.exceptions import HTTPException as StarletteHTTPException
from pydantic import BaseModel, Field
from typing import List, Dict, Any, Optional
import logging
from datetime import datetime
import uvicorn
from contextlib import asynccontextmanager

from alert_model import Alert, CheckerMapping, builtin_mapping, format_generic, load_mapping, map_alerts
from config import Config
from errors import RepairToolError
from evaluation import (EffortParams, diff_alert_sets, estimate_effort, frequency_report, repair_rate_table,
                        unexplained_delta)
from repair_engine import emit_support_header, format_summary, repair_sources
from sa_ingest import FORMATS, parse_alerts
from source_scanner import count_sigloc

# 設定日誌
logging.basicConfig(level=Config.LOG_LEVEL)
logger = logging.getLogger(__name__)

# 全局變量
mapping: Optional[CheckerMapping] = None


@asynccontextmanager
async def lifespan(app: FastAPI):
    """應用生命週期管理：啟動時載入 checker 對照表"""
    global mapping
    try:
        config = Config()
        logger.info(f"正在載入對照表: {config.mapping_path}")
        mapping = load_mapping(config.mapping_path)
        logger.info(f"對照表載入完成，共 {len(mapping)} 筆")
    except Exception as e:
        logger.error(f"對照表載入失敗: {e}")
        raise

    yield

    logger.info("API服務正在關閉...")


app = FastAPI(
    title="警告自動修復API",
    description="依靜態分析警告修復 C 程式碼（只回傳 patch，不修改任何檔案）",
    version="1.0.0",
    docs_url="/docs",
    redoc_url="/redoc",
    lifespan=lifespan
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


# Pydantic 模型定義
class AlertInput(BaseModel):
    format: str = Field('generic', description=f"輸入格式：{', '.join(FORMATS)}")
    data: str = Field(..., description="工具輸出內容")
    root: Optional[str] = Field(None, description="用來把絕對路徑轉成相對路徑的根目錄")


class IngestResponse(BaseModel):
    alerts: List[Alert]
    generic: str
    skipped_lines: int
    parse_notes: List[List[str]]


class RepairRequest(AlertInput):
    sources: Dict[str, str] = Field(..., description="相對路徑 -> 原始碼內容")
    error_handler: Optional[str] = Field(None, description="自訂錯誤處理敘述；未指定時依 ACR_ERROR_HANDLER")
    msc12: Optional[bool] = Field(None, description="是否修復 MSC12-C；未指定時依 REPAIR_MSC12")


class OutcomeItem(BaseModel):
    alert_key: str
    file: str
    line: int
    guideline: Optional[str]
    status: str
    reason: Optional[str] = None
    replacement: Optional[str] = None


class RepairResponse(BaseModel):
    outcomes: List[OutcomeItem]
    counts: Dict[str, Dict[str, int]]
    repaired: int
    declined_files: List[str]
    header_emitted: bool
    patch: str
    summary: str


class RecurrenceRequest(BaseModel):
    format: str = 'generic'
    before: str
    after: str


class RecurrenceResponse(BaseModel):
    resolved: int
    persisting: int
    new: int
    by_guideline: Dict[str, Dict[str, int]]
    rates: List[Dict[str, Any]]
    unexplained: Optional[int] = None


class FrequencyRequest(AlertInput):
    codebase: str = ''
    grouping: str = 'tool'


class EffortRequest(EffortParams):
    ksigloc: float = Field(..., ge=0, description="kSigLoC")


class SigLocRequest(BaseModel):
    files: Dict[str, str] = Field(..., description="相對路徑 -> 原始碼內容")


def _alerts(body: AlertInput) -> List[Alert]:
    report = parse_alerts(body.data.encode('utf-8'), body.format, body.root)
    return map_alerts(report.alerts, mapping if mapping is not None else builtin_mapping())


@app.get("/", response_class=JSONResponse)
async def root():
    """根端點 - API信息"""
    return {
        "message": "警告自動修復API",
        "version": "1.0.0",
        "formats": list(FORMATS),
        "docs": "/docs",
        "health": "/health"
    }


@app.get("/health")
async def health_check():
    """健康檢查端點"""
    return {
        "status": "healthy" if mapping is not None else "degraded",
        "timestamp": datetime.now().isoformat(),
        "mapping_rows": len(mapping) if mapping is not None else 0,
    }


@app.get("/header", response_class=PlainTextResponse)
async def header():
    """acr.h 內容"""
    return emit_support_header()


@app.post("/ingest", response_model=IngestResponse)
async def ingest(body: AlertInput):
    report = parse_alerts(body.data.encode('utf-8'), body.format, body.root)
    alerts = map_alerts(report.alerts, mapping if mapping is not None else builtin_mapping())
    return IngestResponse(
        alerts=alerts,
        generic=format_generic(alerts),
        skipped_lines=report.skipped_lines,
        parse_notes=[list(note) for note in report.parse_notes],
    )


@app.post("/repair", response_model=RepairResponse)
async def repair(body: RepairRequest):
    """試跑修復：回傳每筆警告的結果與 patch"""
    # 未指定的欄位沿用環境變數的設定
    overrides = {'error_handler': body.error_handler, 'msc12_enabled': body.msc12}
    config = Config(**{k: v for k, v in overrides.items() if v is not None}).validate()
    alerts = _alerts(body)
    report, _ = repair_sources(body.sources, alerts, config)
    logger.info(f"API 修復: {report.repaired}/{len(alerts)} 筆")
    return RepairResponse(
        outcomes=[
            OutcomeItem(
                alert_key=o.alert_key,
                file=o.alert.file,
                line=o.alert.line,
                guideline=o.alert.guideline,
                status=o.status,
                reason=o.reason,
                replacement=o.edit.replacement if o.edit else None,
            )
            for o in report.outcomes
        ],
        counts=report.counts,
        repaired=report.repaired,
        declined_files=report.declined_files,
        header_emitted=report.header_emitted,
        patch=report.patch,
        summary=format_summary(report),
    )


@app.post("/recurrence", response_model=RecurrenceResponse)
async def recurrence(body: RecurrenceRequest, repaired: Optional[int] = None):
    before = _alerts(AlertInput(format=body.format, data=body.before))
    after = _alerts(AlertInput(format=body.format, data=body.after))
    report = diff_alert_sets(before, after)
    return RecurrenceResponse(
        resolved=len(report.resolved),
        persisting=len(report.persisting),
        new=len(report.new),
        by_guideline=report.by_guideline,
        rates=repair_rate_table(report).to_dict('records'),
        unexplained=unexplained_delta(report, repaired) if repaired is not None else None,
    )


@app.post("/frequency")
async def frequency(body: FrequencyRequest):
    report = frequency_report(_alerts(body), grouping=body.grouping, codebase=body.codebase)
    return {
        "rows": [row.model_dump() for row in report.rows],
        "totals": report.totals,
        "distinct": report.distinct,
        "unmapped": report.unmapped,
        "total": report.total,
    }


@app.post("/effort")
async def effort(body: EffortRequest):
    params = EffortParams(**body.model_dump(exclude={'ksigloc'}))
    return estimate_effort(params, body.ksigloc).model_dump()


@app.post("/sigloc")
async def sigloc(body: SigLocRequest):
    files: Dict[str, int] = {}
    skipped: Dict[str, str] = {}
    for path in sorted(body.files):
        try:
            files[path] = count_sigloc(body.files[path])
        except RepairToolError as e:
            skipped[path] = str(e)
    total = sum(files.values())
    return {"files": files, "skipped": skipped, "total": total, "ksigloc": total / 1000.0}


# 錯誤處理器
@app.exception_handler(StarletteHTTPException)
async def http_exception_handler(request, exc):
    return JSONResponse(
        status_code=exc.status_code,
        content={
            "error": exc.detail,
            "status_code": exc.status_code,
            "timestamp": datetime.now().isoformat()
        }
    )


@app.exception_handler(RepairToolError)
async def repair_tool_exception_handler(request, exc):
    logger.warning(f"請求無法處理: {exc}")
    return JSONResponse(
        status_code=400,
        content={
            "error": str(exc),
            "status_code": 400,
            "timestamp": datetime.now().isoformat()
        }
    )


@app.exception_handler(Exception)
async def general_exception_handler(request, exc):
    logger.error(f"未處理的異常: {exc}")
    return JSONResponse(
        status_code=500,
        content={
            "error": "內部服務器錯誤",
            "status_code": 500,
            "timestamp": datetime.now().isoformat()
        }
    )


if __name__ == "__main__":
    # 開發環境運行
    uvicorn.run(
        "api_server:app",
        host=Config.API_HOST,
        port=Config.API_PORT,
        reload=True,
        log_level="info"
    )
