"""
2量子ビット＋散逸バスの Λ 系モデル
混合角 θ による1次元粒子描像、エネルギー保存から得る t_f(ℰ)・ΔF_opt(ℰ)・ΔF_min、
前因子と極限の閉形式、最適軌道と境界平滑化を提供する

基底は (|e,g,0⟩, |g,e,0⟩, |g,g,1⟩, |g,g,0⟩)。回転座標系で扱うため周波数 ω は
ダイナミクスに現れない（メタデータとしてのみ保持する）。
"""

import logging
from dataclasses import dataclass
from typing import Annotated, Callable, Literal, NamedTuple, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.integrate import quad
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from action_framework import ControlCurve
from adiabatic_engine import Channel, ControlPath, HamiltonianFamily
from errors import DivergentTransferError, InvalidInputError, NumericalError
from settings import settings

logger = logging.getLogger(__name__)

HALF_PI = 0.5 * np.pi
BASIS_LABELS = ("eg0", "ge0", "gg1", "gg0")
# 暗状態は単一励起ブロック (eg0, ge0, gg1) の固有値 (−G, 0, +G) の中央
DARK_LEVEL = 1
# 閉形式の適用判定に使う相対許容誤差
LIMIT_TOL = 1e-12


class PAPConstraint(BaseModel):
    """|G| = G_max を一定に保つ並行断熱通過"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["pap"] = "pap"
    g_max: float = Field(..., gt=0)


class BoundedConstraint(BaseModel):
    """各結合の上限 G1_max, G2_max のみを課す拘束"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["bounded"] = "bounded"
    g1_max: float = Field(..., gt=0)
    g2_max: float = Field(..., gt=0)


Constraint = Annotated[Union[PAPConstraint, BoundedConstraint], Field(discriminator="kind")]


class LambdaParams(BaseModel):
    """Λ 系の散逸レートと結合の拘束（レートは参照結合の単位）"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    gamma1_R: float = Field(0.0, ge=0)
    gamma2_R: float = Field(0.0, ge=0)
    gamma1_phi: float = Field(0.0, ge=0)
    gamma2_phi: float = Field(0.0, ge=0)
    kappa_R: float = Field(0.0, ge=0)
    kappa_phi: float = Field(0.0, ge=0)
    constraint: Constraint
    omega: Optional[float] = None

    @property
    def kappa_tot(self) -> float:
        return self.kappa_R + self.kappa_phi

    @property
    def gamma_phi_tot(self) -> float:
        return self.gamma1_phi + self.gamma2_phi

    @property
    def gamma_tot(self) -> float:
        return self.gamma1_R + self.gamma2_R + self.gamma_phi_tot

    @property
    def r1(self) -> float:
        return self.gamma1_R / self.gamma_tot if self.gamma_tot > 0 else 0.0

    @property
    def r2(self) -> float:
        return self.gamma2_R / self.gamma_tot if self.gamma_tot > 0 else 0.0

    @property
    def lam(self) -> float:
        """λ = (γ₂ᴿ − γ₁ᴿ)/γ_tot"""
        return (self.gamma2_R - self.gamma1_R) / self.gamma_tot if self.gamma_tot > 0 else 0.0

    @property
    def is_pap(self) -> bool:
        return isinstance(self.constraint, PAPConstraint)

    @property
    def g1_max(self) -> float:
        return self.constraint.g_max if self.is_pap else self.constraint.g1_max

    @property
    def g2_max(self) -> float:
        return self.constraint.g_max if self.is_pap else self.constraint.g2_max

    @property
    def g_weakest(self) -> float:
        return min(self.g1_max, self.g2_max)

    @property
    def theta_bar(self) -> float:
        return float(np.arctan2(self.g1_max, self.g2_max))

    @property
    def v_max(self) -> float:
        """max_θ V(θ)。V は sin²θ について凹なので最大は端点でとる"""
        return -min(self.gamma1_R, self.gamma2_R)

    def swapped(self) -> "LambdaParams":
        """2つの量子ビットを入れ替えたパラメータ"""
        constraint = self.constraint
        if not self.is_pap:
            constraint = BoundedConstraint(g1_max=self.g2_max, g2_max=self.g1_max)
        return self.model_copy(
            update={
                "gamma1_R": self.gamma2_R,
                "gamma2_R": self.gamma1_R,
                "gamma1_phi": self.gamma2_phi,
                "gamma2_phi": self.gamma1_phi,
                "constraint": constraint,
            }
        )


class LambdaEigenstates(NamedTuple):
    """瞬時固有状態（エネルギー E₀=E₁=0, E_±=±G）"""

    ground: np.ndarray
    dark: np.ndarray
    plus: np.ndarray
    minus: np.ndarray


def eigenstates(theta: float) -> LambdaEigenstates:
    if not -1e-12 <= theta <= HALF_PI + 1e-12:
        raise InvalidInputError(f"θ は [0, π/2] の範囲である必要があります: {theta}")
    s, c = np.sin(theta), np.cos(theta)
    root = 1.0 / np.sqrt(2.0)
    return LambdaEigenstates(
        ground=np.array([0.0, 0.0, 0.0, 1.0], dtype=complex),
        dark=np.array([c, -s, 0.0, 0.0], dtype=complex),
        plus=root * np.array([s, c, 1.0, 0.0], dtype=complex),
        minus=root * np.array([s, c, -1.0, 0.0], dtype=complex),
    )


def _ket_bra(i: int, j: int) -> np.ndarray:
    op = np.zeros((4, 4), dtype=complex)
    op[i, j] = 1.0
    return op


def lambda_family(p: LambdaParams) -> HamiltonianFamily:
    """4準位の HamiltonianFamily（生成子 H₁, H₂ と6つの散逸チャネル）"""
    h1 = _ket_bra(0, 2) + _ket_bra(2, 0)
    h2 = _ket_bra(1, 2) + _ket_bra(2, 1)
    channels = (
        Channel(_ket_bra(3, 0), p.gamma1_R, "sigma1_minus"),
        Channel(_ket_bra(3, 1), p.gamma2_R, "sigma2_minus"),
        Channel(np.diag([1.0, -1.0, -1.0, -1.0]).astype(complex), p.gamma1_phi, "sigma1_z"),
        Channel(np.diag([-1.0, 1.0, -1.0, -1.0]).astype(complex), p.gamma2_phi, "sigma2_z"),
        Channel(_ket_bra(3, 2), p.kappa_R, "a"),
        Channel(np.diag([0.0, 0.0, 1.0, 0.0]).astype(complex), p.kappa_phi, "a_dag_a"),
    )
    return HamiltonianFamily(
        generators=(h1, h2),
        channels=channels,
        subspace=np.eye(4)[:, :3],
        basis_labels=BASIS_LABELS,
    )


def gmax(theta, p: LambdaParams):
    """経路に沿って許される最大結合 G_max(θ)"""
    theta = np.asarray(theta, dtype=float)
    if p.is_pap:
        return np.full_like(theta, p.g1_max) if theta.ndim else float(p.g1_max)
    with np.errstate(divide="ignore"):
        value = np.where(theta < p.theta_bar, p.g2_max / np.cos(theta), p.g1_max / np.sin(theta))
    return value if value.ndim else float(value)


def potential_theta(theta, p: LambdaParams):
    """V(θ) = −(γ₁ᴿcos²θ + γ₂ᴿsin²θ + γ^φ_tot sin²2θ)"""
    theta = np.asarray(theta, dtype=float)
    value = -(
        p.gamma1_R * np.cos(theta) ** 2
        + p.gamma2_R * np.sin(theta) ** 2
        + p.gamma_phi_tot * np.sin(2.0 * theta) ** 2
    )
    return value if value.ndim else float(value)


def loss_integrand(theta: float, theta_dot: float, G: float, p: LambdaParams) -> float:
    """κ_tot θ̇²/G² − V(θ)"""
    if not G > 0:
        raise InvalidInputError(f"結合 G は正である必要があります: {G}")
    return p.kappa_tot * theta_dot**2 / G**2 - potential_theta(theta, p)


def couplings(theta: float, p: LambdaParams) -> np.ndarray:
    """拘束に沿った (G₁, G₂)"""
    if p.is_pap:
        g = p.g1_max
        return np.array([g * np.sin(theta), g * np.cos(theta)])
    if theta < p.theta_bar:
        return np.array([p.g2_max * np.tan(theta), p.g2_max])
    return np.array([p.g1_max, p.g1_max * np.cos(theta) / np.sin(theta)])


def couplings_dot(theta: float, theta_dot: float, p: LambdaParams) -> np.ndarray:
    if p.is_pap:
        g = p.g1_max
        return np.array([g * np.cos(theta), -g * np.sin(theta)]) * theta_dot
    if theta < p.theta_bar:
        return np.array([p.g2_max * theta_dot / np.cos(theta) ** 2, 0.0])
    return np.array([0.0, -p.g1_max * theta_dot / np.sin(theta) ** 2])


def control_curve(p: LambdaParams) -> ControlCurve:
    """混合角を座標とする1次元の制御多様体"""
    return ControlCurve(
        point=lambda q: couplings(q, p),
        tangent=lambda q: couplings_dot(q, 1.0, p),
        coordinate=lambda g: float(np.arctan2(g[0], g[1])),
        bounds=(0.0, HALF_PI),
        breakpoints=() if p.is_pap else (p.theta_bar,),
    )


def theta_path(
    theta_fn: Callable[[float], float],
    theta_dot_fn: Callable[[float], float],
    t_f: float,
    p: LambdaParams,
    boundary_smooth: bool = False,
    breakpoints: Tuple[float, ...] = (),
) -> ControlPath:
    """角度軌道 θ(t) を ControlPath として包む"""

    def angle(t: float) -> Tuple[float, float]:
        t = min(max(float(t), 0.0), t_f)
        return min(max(float(theta_fn(t)), 0.0), HALF_PI), float(theta_dot_fn(t))

    def evaluate(t: float) -> np.ndarray:
        return couplings(angle(t)[0], p)

    def derivative(t: float) -> np.ndarray:
        theta, theta_dot = angle(t)
        return couplings_dot(theta, theta_dot, p)

    return ControlPath(
        t_f=t_f,
        evaluate=evaluate,
        derivative=derivative,
        n_controls=2,
        boundary_smooth=boundary_smooth,
        breakpoints=tuple(breakpoints),
        mixing_angle=angle,
    )


def _integrate(fn: Callable[[float], float], p: LambdaParams, a: float = 0.0, b: float = HALF_PI) -> float:
    points = None if p.is_pap or not a < p.theta_bar < b else [p.theta_bar]
    value, _ = quad(fn, a, b, points=points, epsabs=0.0, epsrel=settings.quad_epsrel, limit=400)
    return float(value)


def _require_kappa(p: LambdaParams):
    if not p.kappa_tot > 0:
        raise InvalidInputError("κ_tot = 0 では転送時間を定義できません")


def divergent_angle(energy: float, p: LambdaParams) -> Optional[float]:
    """ℰ − V(θ) が端点で0以下になる場合にその θ を返す（解析的な判定）

    V は端点で極大をとり、そこでの ℰ − V は θ について2次で消えるため、
    ℰ ≤ V_max なら t_f の積分は必ず発散する。
    """
    if energy > p.v_max:
        return None
    if p.gamma2_R < p.gamma1_R:
        return HALF_PI
    return 0.0


def transfer_time(energy: float, p: LambdaParams) -> float:
    """t_f(ℰ) = ∫ dθ/G_max(θ) · √(κ_tot/(ℰ − V(θ)))"""
    _require_kappa(p)
    theta = divergent_angle(energy, p)
    if theta is not None:
        raise DivergentTransferError(f"ℰ={energy:.3e} で転送時間が発散します (θ={theta:.4f})", theta=theta)
    root_kappa = np.sqrt(p.kappa_tot)
    return _integrate(lambda th: root_kappa / (gmax(th, p) * np.sqrt(energy - potential_theta(th, p))), p)


def minimal_loss(p: LambdaParams) -> float:
    """ΔF_min = 2∫ √(κ_tot|V(θ)|)/G_max(θ) dθ（常に有限）"""
    if p.kappa_tot == 0 or p.gamma_tot == 0:
        return 0.0
    root_kappa = np.sqrt(p.kappa_tot)
    return 2.0 * _integrate(lambda th: root_kappa * np.sqrt(-potential_theta(th, p)) / gmax(th, p), p)


def optimal_loss(energy: float, p: LambdaParams) -> float:
    """ΔF_opt(ℰ) = ∫ √κ_tot/G_max · (ℰ − 2V)/√(ℰ − V) dθ"""
    if energy == 0.0:
        return minimal_loss(p)
    _require_kappa(p)
    theta = divergent_angle(energy, p)
    if theta is not None:
        raise DivergentTransferError(f"ℰ={energy:.3e} で損失の積分が発散します (θ={theta:.4f})", theta=theta)
    root_kappa = np.sqrt(p.kappa_tot)

    def integrand(th: float) -> float:
        v = potential_theta(th, p)
        return root_kappa * (energy - 2.0 * v) / (gmax(th, p) * np.sqrt(energy - v))

    return _integrate(integrand, p)


def _check_shares(r1: float, r2: float):
    if r1 < 0 or r2 < 0 or r1 + r2 > 1.0 + 1e-12:
        raise InvalidInputError(f"(r₁, r₂) が定義域外です: ({r1}, {r2})")


def pap_prefactor(r1: float, r2: float) -> float:
    """c(r₁,r₂) = ∫₀^{π/2} √(r₁cos²θ + r₂sin²θ + (1−r₁−r₂)sin²2θ) dθ"""
    _check_shares(r1, r2)
    r_phi = max(1.0 - r1 - r2, 0.0)

    def integrand(th: float) -> float:
        return np.sqrt(r1 * np.cos(th) ** 2 + r2 * np.sin(th) ** 2 + r_phi * np.sin(2.0 * th) ** 2)

    value, _ = quad(integrand, 0.0, HALF_PI, epsabs=0.0, epsrel=settings.quad_epsrel, limit=400)
    return float(value)


def _g_shape(a: float, b: float, x: float) -> float:
    r_phi = max(1.0 - a - b, 0.0)
    x2 = x * x
    return a * (1.0 - x2) + b * x2 + 4.0 * r_phi * x2 * (1.0 - x2)


def _half_integral(a: float, b: float, upper: float) -> float:
    value, _ = quad(
        lambda x: np.sqrt(max(_g_shape(a, b, x), 0.0)),
        0.0,
        upper,
        epsabs=0.0,
        epsrel=settings.quad_epsrel,
        limit=400,
    )
    return float(value)


def general_prefactor(r1: float, r2: float, theta_bar: float) -> float:
    """上限拘束での前因子 c(r₁,r₂,θ̄)（ΔF_min = 2c√(κ_totγ_tot)/√(G₁²+G₂²)）

    c = (1/cosθ̄)∫₀^{sinθ̄}√g(r₁,r₂,x)dx + (1/sinθ̄)∫₀^{cosθ̄}√g(r₂,r₁,x)dx
    g(a,b,x) = a(1−x²) + bx² + 4(1−a−b)x²(1−x²)
    """
    _check_shares(r1, r2)
    if not 0.0 < theta_bar < HALF_PI:
        raise InvalidInputError(f"θ̄ は (0, π/2) の範囲である必要があります: {theta_bar}")
    s, c = np.sin(theta_bar), np.cos(theta_bar)
    return _half_integral(r1, r2, s) / c + _half_integral(r2, r1, c) / s


def weak_coupling_prefactor(r1: float, r2: float, theta_bar: float) -> float:
    """最弱結合で表した前因子 c₁ = c·sinθ̄（θ̄ ≤ π/4）"""
    if theta_bar > np.pi / 4 + 1e-12:
        raise InvalidInputError(f"c₁ は θ̄ ≤ π/4 でのみ定義されます: {theta_bar}")
    return general_prefactor(r1, r2, theta_bar) * np.sin(theta_bar)


def _near(a: float, b: float) -> bool:
    return abs(a - b) <= LIMIT_TOL * max(abs(a), abs(b), 1e-300)


def closed_form(p: LambdaParams) -> Optional[float]:
    """3つの極限（等レート・片側緩和・純位相緩和のみ）での ΔF_min の閉形式

    どの極限にも当てはまらなければ None を返す。
    """
    g1, g2, phi = p.gamma1_R, p.gamma2_R, p.gamma_phi_tot
    kappa = p.kappa_tot
    if g1 == 0 and g2 == 0 and phi == 0:
        return 0.0

    if p.is_pap:
        g = p.g1_max
        if phi == 0 and _near(g1, g2):
            return float(np.pi * np.sqrt(kappa * g1) / g)
        if phi == 0 and g2 == 0:
            return float(2.0 * np.sqrt(kappa * g1) / g)
        if phi == 0 and g1 == 0:
            return float(2.0 * np.sqrt(kappa * g2) / g)
        if g1 == 0 and g2 == 0:
            return float(2.0 * np.sqrt(kappa * phi) / g)
        return None

    G1, G2, theta_bar = p.g1_max, p.g2_max, p.theta_bar
    if phi == 0 and _near(g1, g2):
        return float(2.0 * np.sqrt(kappa * g1) * np.sqrt(1.0 / G1**2 + 1.0 / G2**2))
    if phi == 0 and g2 == 0:
        return float(np.sqrt(kappa * g1) * (1.0 / G1 + theta_bar / G2))
    if phi == 0 and g1 == 0:
        return float(np.sqrt(kappa * g2) * (1.0 / G2 + (HALF_PI - theta_bar) / G1))
    if g1 == 0 and g2 == 0:
        return float(
            4.0 / 3.0
            * np.sqrt(kappa * phi / (G1**2 + G2**2))
            * (1.0 / np.sin(theta_bar) + 1.0 / np.cos(theta_bar) - 1.0)
        )
    return None


def optimal_time_equal_rates(p: LambdaParams) -> float:
    """等レート・位相緩和なしでの最適転送時間 t_f* = √(κ_tot/γ₁ᴿ · (1/G₁² + 1/G₂²))"""
    if p.is_pap or p.gamma_phi_tot != 0 or not p.gamma1_R > 0 or not _near(p.gamma1_R, p.gamma2_R):
        raise InvalidInputError("t_f* の閉形式は上限拘束・等レート・位相緩和なしの場合のみ有効です")
    _require_kappa(p)
    return float(np.sqrt(p.kappa_tot / p.gamma1_R * (1.0 / p.g1_max**2 + 1.0 / p.g2_max**2)))


def energy_for_time(t_f: float, p: LambdaParams) -> float:
    """transfer_time の逆関数。log(ℰ − V_max) についての括弧付き求根で解く"""
    if not t_f > 0:
        raise InvalidInputError(f"t_f は正である必要があります: {t_f}")
    _require_kappa(p)
    v_max = p.v_max

    def residual(s: float) -> float:
        return transfer_time(v_max + np.exp(s), p) - t_f

    lo, hi = -20.0, 5.0
    while residual(lo) < 0:
        lo -= 40.0
        if lo < -700.0:
            raise NumericalError(f"t_f={t_f:.3e} に対応するエネルギーの括弧が見つかりません")
    while residual(hi) > 0:
        hi += 10.0
        if hi > 700.0:
            raise NumericalError(f"t_f={t_f:.3e} に対応するエネルギーの括弧が見つかりません")
    s = brentq(residual, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)
    return float(v_max + np.exp(s))


def analytic_optimal_time(p: LambdaParams, excess: float = 1e-3) -> float:
    """解析的な最適転送時間

    t_f(ℰ=0) が有限ならそれを返す。発散する場合は ΔF_opt が ΔF_min を相対 excess だけ
    上回る時間を作業点として返す。
    """
    try:
        return transfer_time(0.0, p)
    except DivergentTransferError as e:
        floor = minimal_loss(p)
        if floor == 0.0:
            raise
        target = floor * (1.0 + excess)
        logger.info(f"🔍 最適時間が発散するため ΔF_opt = {target:.6e} となる時間を使います (θ={e.theta:.4f})")
        s = brentq(lambda s: optimal_loss(np.exp(s), p) - target, -60.0, 10.0, xtol=1e-12)
        return transfer_time(float(np.exp(s)), p)


def applicability_warning(p: LambdaParams) -> bool:
    """κ_tot < 10·γ_tot のとき（摂動的な扱いの適用範囲外）警告を出す"""
    if p.gamma_tot > 0 and p.kappa_tot < 10.0 * p.gamma_tot:
        logger.warning(
            f"⚠️ κ_tot={p.kappa_tot:.3e} が 10·γ_tot={10 * p.gamma_tot:.3e} を下回っています。"
            "主要次の近似は信頼できません"
        )
        return True
    return False


def lambda_params(base: LambdaParams, lam: float) -> LambdaParams:
    """γ₂ᴿ を固定し γ₁ᴿ = γ₂ᴿ(1−λ)/(1+λ) とした非対称度 λ のパラメータ"""
    if not -1.0 < lam <= 1.0:
        raise InvalidInputError(f"λ は (−1, 1] の範囲である必要があります: {lam}")
    return base.model_copy(update={"gamma1_R": base.gamma2_R * (1.0 - lam) / (1.0 + lam)})


@dataclass(frozen=True, eq=False)
class EnergySolution:
    """エネルギー ℰ の最適軌道（θ は 0 から π/2 へ単調に増加）"""

    energy: float
    t_f: float
    times: np.ndarray
    theta: np.ndarray
    theta_dot: np.ndarray
    delta_F: float
    params: LambdaParams

    def spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.times, self.theta, self.theta_dot)

    def conserved_energy(self) -> np.ndarray:
        """κ_tot θ̇²/G_max² + V（軌道上で ℰ に等しい）"""
        g = gmax(self.theta, self.params)
        return self.params.kappa_tot * self.theta_dot**2 / g**2 + potential_theta(self.theta, self.params)

    def to_control_path(self) -> ControlPath:
        spline = self.spline()
        slope = spline.derivative()
        breakpoints = ()
        if not self.params.is_pap:
            breakpoints = (float(np.interp(self.params.theta_bar, self.theta, self.times)),)
        return theta_path(spline, slope, self.t_f, self.params, breakpoints=breakpoints)


def _theta_grid(p: LambdaParams, n_samples: int) -> np.ndarray:
    if p.is_pap:
        return np.linspace(0.0, HALF_PI, n_samples)
    # θ̄ を格子点に含める（G_max の折れ目）
    n_low = max(2, int(round(n_samples * p.theta_bar / HALF_PI)))
    n_high = max(2, n_samples - n_low + 1)
    return np.concatenate([np.linspace(0.0, p.theta_bar, n_low), np.linspace(p.theta_bar, HALF_PI, n_high)[1:]])


def optimal_trajectory(energy: float, p: LambdaParams, n_samples: int = 401) -> EnergySolution:
    """θ̇ = G_max√((ℰ − V)/κ_tot) を積分して最適軌道を得る"""
    transfer_time(energy, p)
    theta = _theta_grid(p, n_samples)
    kappa = p.kappa_tot

    def rate(th):
        return gmax(th, p) * np.sqrt((energy - potential_theta(th, p)) / kappa)

    times = np.zeros_like(theta)
    for k in range(1, theta.size):
        times[k] = times[k - 1] + _integrate(lambda th: 1.0 / rate(th), p, theta[k - 1], theta[k])
    theta_dot = np.asarray(rate(theta), dtype=float)

    solution = EnergySolution(
        energy=float(energy),
        t_f=float(times[-1]),
        times=times,
        theta=theta,
        theta_dot=theta_dot,
        delta_F=optimal_loss(energy, p),
        params=p,
    )
    logger.debug(f"📊 最適軌道: ℰ={energy:.3e}, t_f={solution.t_f:.6f}, ΔF={solution.delta_F:.6e}")
    return solution


def smooth_boundaries(sol: EnergySolution, delta_t: Optional[float] = None) -> ControlPath:
    """両端で θ̇ を線形に立ち上げ・立ち下げる時間変換 τ(t) を最適軌道に施す

    τ̇ = λ·w(t)、w = min(t/Δt, 1, (t_f − t)/Δt)、λ = t_f/(t_f − Δt) なので
    τ(0)=0, τ(t_f)=t_f が保たれ、θ は π/2 まで到達したまま Ġ(0)=Ġ(t_f)=0 となる。
    """
    t_f = sol.t_f
    delta_t = t_f / 200.0 if delta_t is None else float(delta_t)
    if not 0.0 < delta_t < 0.5 * t_f:
        raise InvalidInputError(f"平滑化の幅 Δt は (0, t_f/2) の範囲である必要があります: {delta_t}")
    scale = t_f / (t_f - delta_t)
    spline = sol.spline()
    slope = spline.derivative()

    def warp(t: float) -> Tuple[float, float]:
        t = min(max(float(t), 0.0), t_f)
        if t < delta_t:
            return scale * t * t / (2.0 * delta_t), scale * t / delta_t
        if t > t_f - delta_t:
            rest = t_f - t
            return t_f - scale * rest * rest / (2.0 * delta_t), scale * rest / delta_t
        return scale * (t - 0.5 * delta_t), scale

    def theta_fn(t: float) -> float:
        return float(spline(warp(t)[0]))

    def theta_dot_fn(t: float) -> float:
        tau, tau_dot = warp(t)
        return float(slope(tau)) * tau_dot

    return theta_path(
        theta_fn,
        theta_dot_fn,
        t_f,
        sol.params,
        boundary_smooth=True,
        breakpoints=(delta_t, t_f - delta_t),
    )
