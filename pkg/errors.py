"""
darkpath 例外クラス
CLIの終了コードとAPIのエラー応答はここで定義した exit_code / to_dict() から決まる
"""

from typing import Any, Dict, Optional, Tuple


class DarkPathError(Exception):
    """darkpath の基底例外"""

    exit_code = 1

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> Dict[str, Any]:
        payload = {"error": type(self).__name__, "message": self.message}
        payload.update(self.details)
        return payload


class InvalidInputError(DarkPathError):
    """次元不一致・非エルミート演算子・負のレートなど入力側の誤り"""

    exit_code = 2


class ConfigError(InvalidInputError):
    """実験設定ファイルの検証エラー"""


class DivergentTransferError(DarkPathError):
    """ℰ=0 で転送時間が発散する"""

    exit_code = 3

    def __init__(self, message: str, theta: float):
        super().__init__(message, theta=float(theta), divergent=True)
        self.theta = float(theta)


class NumericalError(DarkPathError):
    """数値計算の失敗"""

    exit_code = 4


class GapUnderflowError(NumericalError):
    """エネルギーギャップが下限を下回った"""

    def __init__(self, message: str, pair: Tuple[int, int], t: Optional[float] = None):
        super().__init__(message, pair=list(pair), t=t)
        self.pair = pair
        self.t = t


class LevelCrossingError(NumericalError):
    """経路上で準位交差（近縮退）を検出"""

    def __init__(self, message: str, t: float, levels: Tuple[int, int]):
        super().__init__(message, t=float(t), levels=list(levels))
        self.t = float(t)
        self.levels = levels


class ConvergenceError(NumericalError):
    """境界値問題などが収束しない"""

    def __init__(self, message: str, residual: float):
        super().__init__(message, residual=float(residual))
        self.residual = float(residual)


class IntegrationError(NumericalError):
    """常微分方程式ソルバーの失敗（ステップ幅アンダーフロー等）"""
