"""
計算結果の保存
出力ファイルにはすべて来歴（ツール版・実行ID・設定・ライブラリ版・許容誤差）を埋め込む
"""

import json
import logging
import uuid
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
import scipy

from settings import TOOL_NAME, VERSION, settings

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12e"


def _jsonable(value: Any):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.bool_):
        return bool(value)
    if hasattr(value, "model_dump"):
        return value.model_dump()
    raise TypeError(f"JSON に変換できない型です: {type(value).__name__}")


class ResultWriter:
    """1回の実行の出力先ディレクトリと来歴を管理する"""

    def __init__(self, out_dir: str, command: str, config: Dict[str, Any], prefix: str = ""):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.config = config
        self.prefix = prefix
        self.run_id = str(uuid.uuid4())
        self.created_at = datetime.now(timezone.utc).isoformat()
        self.written: List[Path] = []

    def provenance(self) -> Dict[str, Any]:
        return {
            "tool": TOOL_NAME,
            "version": VERSION,
            "command": self.command,
            "run_id": self.run_id,
            "created_at": self.created_at,
            "config": self.config,
            "versions": {"numpy": np.__version__, "scipy": scipy.__version__, "pandas": pd.__version__},
            "tolerances": settings.tolerances(),
        }

    def _path(self, name: str) -> Path:
        return self.out_dir / f"{self.prefix}{name}"

    def _comment_lines(self) -> str:
        lines = [f"# {key}: {json.dumps(value, ensure_ascii=False, default=_jsonable)}" for key, value in self.provenance().items()]
        return "\n".join(lines) + "\n"

    def write_json(self, name: str, payload: Dict[str, Any]) -> Path:
        path = self._path(name)
        body = dict(payload)
        body["provenance"] = self.provenance()
        path.write_text(json.dumps(body, ensure_ascii=False, indent=2, default=_jsonable), encoding="utf-8")
        self.written.append(path)
        logger.info(f"📁 JSON を保存しました: {path}")
        return path

    def write_csv(self, name: str, table: pd.DataFrame) -> Path:
        path = self._path(name)
        with path.open("w", encoding="utf-8", newline="") as f:
            f.write(self._comment_lines())
            table.to_csv(f, index=False, float_format=FLOAT_FORMAT)
        self.written.append(path)
        logger.info(f"📁 CSV を保存しました: {path} ({len(table)} 行)")
        return path

    def open_stream(self, name: str) -> "CsvStream":
        stream = CsvStream(self._path(name), self._comment_lines())
        self.written.append(stream.path)
        return stream


class CsvStream:
    """行ごとに追記して flush する CSV（中断しても完了した行は残る）"""

    def __init__(self, path: Path, header_comment: str):
        self.path = path
        self.columns: Optional[List[str]] = None
        self.rows = 0
        with self.path.open("w", encoding="utf-8", newline="") as f:
            f.write(header_comment)

    def append(self, row: Dict[str, Any]):
        if self.columns is None:
            self.columns = list(row.keys())
        frame = pd.DataFrame([row], columns=self.columns)
        with self.path.open("a", encoding="utf-8", newline="") as f:
            frame.to_csv(f, index=False, header=self.rows == 0, float_format=FLOAT_FORMAT)
            f.flush()
        self.rows += 1
        logger.debug(f"📁 {self.path.name} に {self.rows} 行目を書き込みました")


def read_csv(path) -> pd.DataFrame:
    """来歴コメント付き CSV を読み込む"""
    return pd.read_csv(path, comment="#")
