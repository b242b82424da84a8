"""
実行時設定の管理
環境変数（.env を含む）から許容誤差やスレッド数を読み込む
"""

import logging
import os
from typing import Any, Dict, Optional

from dotenv import load_dotenv

# .envファイルを読み込む
load_dotenv()

logger = logging.getLogger(__name__)

TOOL_NAME = "darkpath"
VERSION = "1.0.0"


class Settings:
    """数値計算の既定値を保持する設定クラス"""

    def __init__(self):
        # 主方程式の積分許容誤差
        self.rtol = float(os.getenv("DARKPATH_RTOL", "1e-9"))
        self.atol = float(os.getenv("DARKPATH_ATOL", "1e-12"))
        self.ode_method = os.getenv("DARKPATH_ODE_METHOD", "RK45")

        # 最適化の目的関数で使う（やや緩い）許容誤差
        self.objective_rtol = float(os.getenv("DARKPATH_OBJECTIVE_RTOL", "1e-8"))
        self.objective_atol = float(os.getenv("DARKPATH_OBJECTIVE_ATOL", "1e-11"))

        self.frame_grid = int(os.getenv("DARKPATH_FRAME_GRID", "2001"))
        self.gap_floor = float(os.getenv("DARKPATH_GAP_FLOOR", "1e-6"))
        self.dark_tol = float(os.getenv("DARKPATH_DARK_TOL", "1e-10"))
        self.quad_epsrel = float(os.getenv("DARKPATH_QUAD_EPSREL", "1e-12"))

        self.threads = int(os.getenv("DARKPATH_THREADS", "1"))
        self.log_level = os.getenv("DARKPATH_LOG_LEVEL", "INFO").upper()

        # HTTP サービス
        self.allowed_origins = [o.strip() for o in os.getenv("DARKPATH_ALLOWED_ORIGINS", "*").split(",") if o.strip()]
        self.port = int(os.getenv("PORT", "8000"))

    def tolerances(self) -> Dict[str, float]:
        """出力ファイルに埋め込む許容誤差"""
        return {
            "rtol": self.rtol,
            "atol": self.atol,
            "ode_method": self.ode_method,
            "objective_rtol": self.objective_rtol,
            "objective_atol": self.objective_atol,
            "frame_grid": self.frame_grid,
            "gap_floor": self.gap_floor,
            "dark_tol": self.dark_tol,
            "quad_epsrel": self.quad_epsrel,
        }

    def get_status(self) -> Dict[str, Any]:
        """設定状態を取得"""
        return {
            "tool": TOOL_NAME,
            "version": VERSION,
            "threads": self.threads,
            "log_level": self.log_level,
            "tolerances": self.tolerances(),
        }


# グローバルインスタンス
settings = Settings()


def get_settings() -> Settings:
    """設定インスタンスを取得"""
    return settings


def configure_logging(level: Optional[str] = None) -> None:
    """エントリーポイント共通のロギング設定"""
    logging.basicConfig(
        level=getattr(logging, (level or settings.log_level), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
