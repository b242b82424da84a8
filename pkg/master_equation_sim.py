"""
時間依存 Lindblad 方程式の直接数値積分
Fourier パルス、転送忠実度、Schrödinger 方程式による参照伝播を提供する
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp

from adiabatic_engine import ControlPath, HamiltonianFamily
from errors import IntegrationError, InvalidInputError
from lambda_model import DARK_LEVEL, LambdaParams, couplings, couplings_dot, lambda_family
from operator_core import (
    as_density_matrix,
    dagger,
    dissipator_superoperator,
    hamiltonian_superoperator,
    lindblad_rhs,
)
from settings import settings

logger = logging.getLogger(__name__)

# |e,g,0⟩ から |g,e,0⟩ への転送
INITIAL_INDEX = 0
TARGET_INDEX = 1


@dataclass(frozen=True)
class FourierPulse:
    """θ̇(t) = π/(2t_f) + Σ_n α_n cos(nπt/t_f)

    余弦項は両端で0になる正弦に積分されるので θ(0)=0, θ(t_f)=π/2 が恒等的に成り立つ。
    """

    t_f: float
    coefficients: Tuple[float, ...] = ()

    def __post_init__(self):
        if not self.t_f > 0:
            raise InvalidInputError(f"t_f は正である必要があります: {self.t_f}")
        coeffs = tuple(float(a) for a in self.coefficients)
        if not np.all(np.isfinite(coeffs)):
            raise InvalidInputError("Fourier 係数に有限でない値が含まれています")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def n_terms(self) -> int:
        return len(self.coefficients)


def theta_of_t(pulse: FourierPulse, t):
    """(θ(t), θ̇(t))"""
    t = np.asarray(t, dtype=float)
    omega = np.pi / pulse.t_f
    theta = 0.5 * omega * t
    theta_dot = np.full_like(t, 0.5 * omega)
    for n, alpha in enumerate(pulse.coefficients, start=1):
        theta = theta + alpha / (n * omega) * np.sin(n * omega * t)
        theta_dot = theta_dot + alpha * np.cos(n * omega * t)
    if theta.ndim == 0:
        return float(theta), float(theta_dot)
    return theta, theta_dot


def pulse_path(pulse: FourierPulse, p: LambdaParams) -> ControlPath:
    """Fourier パルスを拘束に沿った制御経路 G(t) に変換（θ は範囲外でもクリップしない）"""

    def angle(t: float) -> Tuple[float, float]:
        return theta_of_t(pulse, float(t))

    def evaluate(t: float) -> np.ndarray:
        return couplings(angle(t)[0], p)

    def derivative(t: float) -> np.ndarray:
        theta, theta_dot = angle(t)
        return couplings_dot(theta, theta_dot, p)

    return ControlPath(t_f=pulse.t_f, evaluate=evaluate, derivative=derivative, n_controls=2, mixing_angle=angle)


@dataclass(frozen=True, eq=False)
class PropagationReport:
    """伝播結果と数値診断"""

    state: np.ndarray
    fidelity: float
    trace_drift: float
    hermiticity_drift: float
    min_eigenvalue: float
    n_steps: int
    times: Optional[np.ndarray] = None
    states: Optional[np.ndarray] = None


def _target_projector(
    fam: HamiltonianFamily, path: ControlPath, target: Optional[np.ndarray], ref_level: int
) -> np.ndarray:
    if target is None:
        vec = fam.embed(fam.spectrum(path.evaluate(path.t_f)).vectors[:, ref_level])
        return np.outer(vec, vec.conj())
    target = np.asarray(target, dtype=complex)
    if target.ndim == 1:
        target = np.outer(target, target.conj())
    if target.shape != (fam.dim, fam.dim):
        raise InvalidInputError(f"target の次元が一致しません: {target.shape}")
    return target


def _report_density(
    rho: np.ndarray, projector: np.ndarray, n_steps: int, times=None, states=None
) -> PropagationReport:
    fidelity = float(np.real(np.trace(projector @ rho)))
    herm = 0.5 * (rho + dagger(rho))
    return PropagationReport(
        state=rho,
        fidelity=float(np.clip(fidelity, 0.0, 1.0)),
        trace_drift=float(abs(np.trace(rho) - 1.0)),
        hermiticity_drift=float(np.max(np.abs(rho - dagger(rho)))),
        min_eigenvalue=float(np.min(np.linalg.eigvalsh(herm))),
        n_steps=n_steps,
        times=times,
        states=states,
    )


def propagate_lindblad(
    fam: HamiltonianFamily,
    path: ControlPath,
    rho0: np.ndarray,
    rtol: Optional[float] = None,
    atol: Optional[float] = None,
    method: Optional[str] = None,
    t_eval: Optional[Sequence[float]] = None,
    target: Optional[np.ndarray] = None,
    ref_level: int = DARK_LEVEL,
) -> PropagationReport:
    """ρ̇ = L(t)ρ を埋め込み型 Runge–Kutta で積分する

    L(t) = Σ_j G_j(t)·(−i[H_j, ·]) + D はベクトル化した密度行列に作用する。
    トレースの再規格化は行わない（ドリフトは診断値として返す）。

    Args:
        fam: ハミルトニアン族
        path: 制御経路
        rho0: 初期密度行列（または状態ベクトル）
        rtol, atol: 許容誤差（既定は settings）
        method: solve_ivp の解法名
        t_eval: 状態を記録する時刻
        target: 忠実度を測る射影子または状態（既定は t_f での参照固有状態）
        ref_level: target 省略時に使う固有準位

    Returns:
        PropagationReport
    """
    dim = fam.dim
    rho0 = as_density_matrix(rho0, dim)
    rtol = settings.rtol if rtol is None else rtol
    atol = settings.atol if atol is None else atol
    method = method or settings.ode_method

    generators = [hamiltonian_superoperator(h) for h in fam.generators]
    dissipator = dissipator_superoperator(fam.channels, dim)

    def rhs(t, y):
        g = path.evaluate(t)
        generator = dissipator + sum(gj * lj for gj, lj in zip(g, generators))
        return generator @ y

    sol = solve_ivp(
        rhs,
        (0.0, path.t_f),
        rho0.reshape(-1),
        method=method,
        rtol=rtol,
        atol=atol,
        dense_output=t_eval is not None,
    )
    if not sol.success:
        raise IntegrationError(f"主方程式の積分に失敗しました: {sol.message}")

    rho_f = sol.y[:, -1].reshape(dim, dim)
    times = states = None
    if t_eval is not None:
        times = np.asarray(t_eval, dtype=float)
        states = np.array([sol.sol(t).reshape(dim, dim) for t in times])

    report = _report_density(
        rho_f, _target_projector(fam, path, target, ref_level), len(sol.t) - 1, times, states
    )
    logger.debug(f"📊 Lindblad 伝播: F={report.fidelity:.10f}, steps={report.n_steps}, trace drift={report.trace_drift:.2e}")
    return report


def propagate_lindblad_rk4(
    fam: HamiltonianFamily,
    path: ControlPath,
    rho0: np.ndarray,
    n_steps: int = 4000,
    target: Optional[np.ndarray] = None,
    ref_level: int = DARK_LEVEL,
) -> PropagationReport:
    """固定刻みの古典的 RK4（行列形の右辺）による参照積分"""
    if n_steps < 1:
        raise InvalidInputError(f"n_steps は1以上である必要があります: {n_steps}")
    rho = as_density_matrix(rho0, fam.dim)
    channels = fam.channels
    h = path.t_f / n_steps

    def rhs(t, r):
        return lindblad_rhs(r, fam.hamiltonian(path.evaluate(t)), channels)

    for k in range(n_steps):
        t = k * h
        k1 = rhs(t, rho)
        k2 = rhs(t + 0.5 * h, rho + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, rho + 0.5 * h * k2)
        k4 = rhs(t + h, rho + h * k3)
        rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    return _report_density(rho, _target_projector(fam, path, target, ref_level), n_steps)


def propagate_schrodinger(
    fam: HamiltonianFamily,
    path: ControlPath,
    psi0: np.ndarray,
    rtol: Optional[float] = None,
    atol: Optional[float] = None,
    t_eval: Optional[Sequence[float]] = None,
    target: Optional[np.ndarray] = None,
    ref_level: int = DARK_LEVEL,
) -> PropagationReport:
    """散逸なしの i∂ψ/∂t = H(t)ψ による参照伝播"""
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (fam.dim,):
        raise InvalidInputError(f"初期状態の次元が一致しません: {psi0.shape}")
    if abs(np.vdot(psi0, psi0).real - 1.0) > 1e-9:
        raise InvalidInputError("初期状態が規格化されていません")
    rtol = settings.rtol if rtol is None else rtol
    atol = settings.atol if atol is None else atol

    def rhs(t, y):
        return -1j * (fam.hamiltonian(path.evaluate(t)) @ y)

    sol = solve_ivp(
        rhs, (0.0, path.t_f), psi0, method=settings.ode_method, rtol=rtol, atol=atol, dense_output=t_eval is not None
    )
    if not sol.success:
        raise IntegrationError(f"Schrödinger 方程式の積分に失敗しました: {sol.message}")

    psi_f = sol.y[:, -1]
    times = states = None
    if t_eval is not None:
        times = np.asarray(t_eval, dtype=float)
        states = np.array([sol.sol(t) for t in times])

    projector = _target_projector(fam, path, target, ref_level)
    fidelity = float(np.real(np.vdot(psi_f, projector @ psi_f)))
    return PropagationReport(
        state=psi_f,
        fidelity=float(np.clip(fidelity, 0.0, 1.0)),
        trace_drift=float(abs(np.vdot(psi_f, psi_f).real - 1.0)),
        hermiticity_drift=0.0,
        min_eigenvalue=0.0,
        n_steps=len(sol.t) - 1,
        times=times,
        states=states,
    )


def _as_path(pulse: Union[FourierPulse, ControlPath], p: LambdaParams) -> ControlPath:
    return pulse if isinstance(pulse, ControlPath) else pulse_path(pulse, p)


def _initial_state() -> np.ndarray:
    rho0 = np.zeros((4, 4), dtype=complex)
    rho0[INITIAL_INDEX, INITIAL_INDEX] = 1.0
    return rho0


def _target() -> np.ndarray:
    # |E₁(t_f)⟩ = −|g,e,0⟩ の符号は射影子では消える
    target = np.zeros((4, 4), dtype=complex)
    target[TARGET_INDEX, TARGET_INDEX] = 1.0
    return target


def transfer_report(
    p: LambdaParams,
    pulse: Union[FourierPulse, ControlPath],
    rtol: Optional[float] = None,
    atol: Optional[float] = None,
) -> PropagationReport:
    """|e,g,0⟩ から出発し |g,e,0⟩ への射影で忠実度を測る伝播"""
    fam = lambda_family(p)
    return propagate_lindblad(fam, _as_path(pulse, p), _initial_state(), rtol=rtol, atol=atol, target=_target())


def transfer_fidelity(
    p: LambdaParams,
    pulse: Union[FourierPulse, ControlPath],
    rtol: Optional[float] = None,
    atol: Optional[float] = None,
) -> float:
    """⟨g,e,0|ρ(t_f)|g,e,0⟩"""
    return transfer_report(p, pulse, rtol, atol).fidelity


def trajectory_table(
    p: LambdaParams,
    pulse: Union[FourierPulse, ControlPath],
    n_points: int = 201,
    rtol: Optional[float] = None,
    atol: Optional[float] = None,
) -> pd.DataFrame:
    """時刻ごとの θ、4つの基底状態の占有数、瞬時暗状態への忠実度 F(t)"""
    if n_points < 2:
        raise InvalidInputError("n_points は2以上である必要があります")
    fam = lambda_family(p)
    path = _as_path(pulse, p)
    times = np.linspace(0.0, path.t_f, n_points)
    report = propagate_lindblad(
        fam, path, _initial_state(), rtol=rtol, atol=atol, t_eval=times, target=_target()
    )

    rows = []
    previous = None
    for t, rho in zip(times, report.states):
        snap = fam.spectrum(path.evaluate(t), previous)
        previous = snap
        dark = fam.embed(snap.vectors[:, DARK_LEVEL])
        populations = np.real(np.diag(rho))
        rows.append(
            {
                "t": t,
                "theta": path.mixing_angle(t)[0] if path.mixing_angle else np.nan,
                "p_eg0": populations[0],
                "p_ge0": populations[1],
                "p_gg1": populations[2],
                "p_gg0": populations[3],
                "F": float(np.clip(np.real(np.vdot(dark, rho @ dark)), 0.0, 1.0)),
            }
        )
    logger.info(f"✅ 軌道を計算しました: {n_points} 点, F(t_f)={report.fidelity:.8f}")
    return pd.DataFrame(rows)
