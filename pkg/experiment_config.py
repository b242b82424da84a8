"""
実験設定ファイル（JSON）のスキーマ
計算の前にすべて検証し、未知のキーは拒否する
"""

import json
import logging
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from adiabatic_engine import Channel, HamiltonianFamily
from errors import ConfigError
from lambda_model import LambdaParams

logger = logging.getLogger(__name__)

COMMANDS = ("analytic", "simulate", "optimize", "sweep")


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LinearPulseSpec(StrictModel):
    kind: Literal["linear"] = "linear"


class FourierPulseSpec(StrictModel):
    kind: Literal["fourier"] = "fourier"
    coefficients: List[float] = Field(default_factory=list)


class EnergyOptimalPulseSpec(StrictModel):
    """エネルギー法の最適軌道（energy 省略時は run.t_f から逆算）"""

    kind: Literal["energy_optimal"] = "energy_optimal"
    energy: Optional[float] = None
    smoothing: Optional[float] = Field(None, gt=0)
    smooth: bool = True


class FilePulseSpec(StrictModel):
    """alpha 列を持つ CSV（optimize の best_pulse.csv と同じ形式）"""

    kind: Literal["file"] = "file"
    path: str


PulseSpec = Annotated[
    Union[LinearPulseSpec, FourierPulseSpec, EnergyOptimalPulseSpec, FilePulseSpec],
    Field(discriminator="kind"),
]


class MatrixSpec(StrictModel):
    """複素行列（実部と任意の虚部）"""

    real: List[List[float]]
    imag: Optional[List[List[float]]] = None

    def to_array(self) -> np.ndarray:
        arr = np.asarray(self.real, dtype=complex)
        if self.imag is not None:
            arr = arr + 1j * np.asarray(self.imag, dtype=float)
        return arr


class ChannelSpec(StrictModel):
    operator: MatrixSpec
    rate: float = Field(..., ge=0)
    label: str = ""


class GenericModelSpec(StrictModel):
    """明示的な行列で与える一般のハミルトニアン族（simulate 用、経路は g0 → g1 の直線）"""

    generators: List[MatrixSpec] = Field(..., min_length=1)
    channels: List[ChannelSpec] = Field(default_factory=list)
    subspace: Optional[MatrixSpec] = None
    g0: List[float]
    g1: List[float]
    initial_state: List[float]
    target: Optional[List[float]] = None

    @model_validator(mode="after")
    def _check_lengths(self):
        n = len(self.generators)
        if len(self.g0) != n or len(self.g1) != n:
            raise ValueError("g0, g1 の長さは生成子の数と一致する必要があります")
        return self

    def to_family(self) -> HamiltonianFamily:
        return HamiltonianFamily(
            generators=tuple(g.to_array() for g in self.generators),
            channels=tuple(Channel(c.operator.to_array(), c.rate, c.label) for c in self.channels),
            subspace=None if self.subspace is None else self.subspace.to_array(),
        )


class RunSpec(StrictModel):
    t_f: Optional[float] = Field(None, gt=0)
    t_f_grid: Optional[List[float]] = None
    n_terms: int = Field(0, ge=0)
    n_values: Optional[List[int]] = None
    lam_grid: Optional[List[float]] = None
    n_max: int = Field(8, ge=0)
    # λ スイープで t_f を探す範囲（analytic_optimal_time に対する比、t_f 指定時は使わない）
    t_f_span: Tuple[float, float] = (0.5, 2.0)
    seeds: Optional[List[List[float]]] = None
    max_evaluations: int = Field(2000, gt=0)
    restarts: int = Field(2, ge=0)
    n_points: int = Field(201, ge=2)
    require_transfer_time: bool = False
    rtol: Optional[float] = Field(None, gt=0)
    atol: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _check_grids(self):
        if self.t_f_grid is not None:
            if any(t <= 0 for t in self.t_f_grid):
                raise ValueError("t_f_grid の値は正である必要があります")
            if any(b <= a for a, b in zip(self.t_f_grid, self.t_f_grid[1:])):
                raise ValueError("t_f_grid は狭義単調増加である必要があります")
        if self.n_values is not None and any(n < 0 for n in self.n_values):
            raise ValueError("n_values は0以上である必要があります")
        if self.lam_grid is not None and any(not -1.0 < lam <= 1.0 for lam in self.lam_grid):
            raise ValueError("lam_grid の値は (−1, 1] の範囲である必要があります")
        lo, hi = self.t_f_span
        if not (0.0 < lo <= 1.0 <= hi and lo < hi):
            raise ValueError("t_f_span は 0 < lo ≤ 1 ≤ hi である必要があります")
        return self


class OutputSpec(StrictModel):
    prefix: str = ""


class ExperimentConfig(StrictModel):
    """実験設定（Λ 系の model か一般の generic_model のどちらか一方を指定）"""

    command: Optional[Literal["analytic", "simulate", "optimize", "sweep"]] = None
    model: Optional[LambdaParams] = None
    generic_model: Optional[GenericModelSpec] = None
    pulse: PulseSpec = Field(default_factory=LinearPulseSpec)
    run: RunSpec = Field(default_factory=RunSpec)
    output: OutputSpec = Field(default_factory=OutputSpec)

    @model_validator(mode="after")
    def _check_model(self):
        if (self.model is None) == (self.generic_model is None):
            raise ValueError("model と generic_model はどちらか一方だけを指定してください")
        return self

    def require_lambda(self, command: str) -> LambdaParams:
        if self.model is None:
            raise ConfigError(f"{command} には Λ 系の model が必要です")
        return self.model


def _validation_details(e: ValidationError) -> list:
    return [{"loc": ".".join(str(x) for x in err["loc"]), "msg": err["msg"]} for err in e.errors()]


def parse_config(payload: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(payload)
    except ValidationError as e:
        raise ConfigError("設定ファイルの検証に失敗しました", errors=_validation_details(e))


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """JSON 設定ファイルを読み込んで検証する"""
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"設定ファイルを読み込めません: {path}: {e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"設定ファイルが JSON として不正です: {path}: {e}")
    if not isinstance(payload, dict):
        raise ConfigError("設定ファイルのトップレベルはオブジェクトである必要があります")
    config = parse_config(payload)
    logger.info(f"✅ 設定ファイルを読み込みました: {path}")
    return config
