from datetime import datetime, timezone
from typing import Any, Dict, List

from pydantic import BaseModel, Field

from config.settings import VERSION


class OutputEntry(BaseModel):
    path: str
    kind: str = Field(..., description="json or csv")
    description: str = ""


class RunManifest(BaseModel):
    command: str
    config: Dict[str, Any] = Field(default_factory=dict, description="Resolved flags and settings")
    model_hash: str = ""
    tool_version: str = VERSION
    started_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
    finished_at: datetime | None = None
    exit_code: int = 0
    outputs: List[OutputEntry] = Field(default_factory=list)
