"""
忠実度損失の古典作用としての定式化
有効ポテンシャル V(G)、暗チャネル分類、逆有効質量テンソル M⁻¹(G)、作用 ΔF、最小作用経路
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad, solve_bvp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from adiabatic_engine import ControlPath, HamiltonianFamily
from errors import ConvergenceError, GapUnderflowError, InvalidInputError
from operator_core import SpectrumSnapshot, dagger, lindblad_rhs
from settings import settings

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ActionModel:
    """作用の構成要素（参照準位と暗/明チャネルの分割）"""

    fam: HamiltonianFamily
    ref_level: int = 1
    dark_channels: Tuple[int, ...] = ()
    bright_channels: Tuple[int, ...] = ()

    def __post_init__(self):
        indices = sorted(self.dark_channels + self.bright_channels)
        if indices != list(range(len(self.fam.channels))):
            raise InvalidInputError("暗/明チャネルの分割が全チャネルを重複なく覆っていません")
        if not 0 <= self.ref_level < self.fam.active_dim:
            raise InvalidInputError(f"ref_level が範囲外です: {self.ref_level}")


@dataclass(frozen=True, eq=False)
class LagrangianSample:
    """1点でのラグランジアン L = K − V の成分"""

    G: np.ndarray
    V: float
    Minv: np.ndarray
    K: float

    @property
    def L(self) -> float:
        return self.K - self.V


@dataclass(frozen=True, eq=False)
class ControlCurve:
    """1次元の制御多様体 G(q)"""

    point: Callable[[float], np.ndarray]
    tangent: Callable[[float], np.ndarray]
    coordinate: Callable[[np.ndarray], float]
    bounds: Tuple[float, float]
    breakpoints: Tuple[float, ...] = ()


def _ref_state(fam: HamiltonianFamily, snap: SpectrumSnapshot, ref_level: int) -> np.ndarray:
    return fam.embed(snap.vectors[:, ref_level])


def leakage(
    fam: HamiltonianFamily,
    G: Sequence[float],
    channel_index: int,
    ref_level: int = 1,
    snapshot: Optional[SpectrumSnapshot] = None,
) -> float:
    """Σ_{m≠ref} |⟨E_m|A|E_ref⟩|²（全空間で ‖A E‖² − |⟨E|A|E⟩|² として評価）"""
    snap = snapshot or fam.spectrum(G)
    e_ref = _ref_state(fam, snap, ref_level)
    a_e = fam.channels[channel_index].operator @ e_ref
    diag = np.vdot(e_ref, a_e)
    return max(float(np.vdot(a_e, a_e).real - abs(diag) ** 2), 0.0)


def classify_channels(
    fam: HamiltonianFamily,
    G_samples: Sequence[Sequence[float]],
    tol: Optional[float] = None,
    ref_level: int = 1,
) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    """暗条件 ⟨E_{m≠ref}|A_α|E_ref⟩ = 0 でチャネルを分類する

    Returns:
        (暗チャネルの添字, 明チャネルの添字)
    """
    tol = settings.dark_tol if tol is None else tol
    samples = [np.asarray(g, dtype=float) for g in G_samples]
    if not samples:
        raise InvalidInputError("制御点のサンプルが1つ以上必要です")

    snaps = [fam.spectrum(g) for g in samples]
    dark, bright = [], []
    for idx, channel in enumerate(fam.channels):
        scale = float(np.linalg.norm(channel.operator, 2)) ** 2
        worst = max(leakage(fam, g, idx, ref_level, s) for g, s in zip(samples, snaps))
        if worst <= tol * scale:
            dark.append(idx)
        else:
            bright.append(idx)
    logger.debug(f"🔍 チャネル分類: dark={dark}, bright={bright}")
    return tuple(dark), tuple(bright)


def build_action_model(
    fam: HamiltonianFamily,
    G_samples: Sequence[Sequence[float]],
    ref_level: int = 1,
    tol: Optional[float] = None,
) -> ActionModel:
    dark, bright = classify_channels(fam, G_samples, tol, ref_level)
    return ActionModel(fam=fam, ref_level=ref_level, dark_channels=dark, bright_channels=bright)


def potential(model: ActionModel, G: Sequence[float], snapshot: Optional[SpectrumSnapshot] = None) -> float:
    """V(G) = −Σ_α Γ_α (⟨E|A†A|E⟩ − |⟨E|A|E⟩|²)（明チャネルのみ）"""
    snap = snapshot or model.fam.spectrum(G)
    total = 0.0
    for idx in model.bright_channels:
        rate = model.fam.channels[idx].rate
        if rate:
            total += rate * leakage(model.fam, G, idx, model.ref_level, snap)
    return -total


def _response_vectors(model: ActionModel, snap: SpectrumSnapshot) -> np.ndarray:
    # u_j = Σ_{m≠ref} |E_m⟩⟨E_m|H_j|E_ref⟩ / (E_m − E_ref)²  （列が j）
    fam, ref = model.fam, model.ref_level
    floor = settings.gap_floor * max(float(np.max(np.abs(snap.values))), 1e-300)
    vecs = snap.vectors
    coeffs = np.zeros((snap.dim, fam.n_controls), dtype=complex)
    for j, gen in enumerate(fam.generators):
        column = dagger(vecs) @ fam.restrict(gen) @ vecs[:, ref]
        for m in range(snap.dim):
            if m == ref:
                continue
            gap = snap.values[m] - snap.values[ref]
            if abs(gap) < floor:
                raise GapUnderflowError(f"準位 ({m}, {ref}) のギャップがアンダーフローしました: {gap:.3e}", pair=(m, ref))
            coeffs[m, j] = column[m] / gap**2
    return fam.embed(vecs @ coeffs)


def inverse_mass(model: ActionModel, G: Sequence[float], snapshot: Optional[SpectrumSnapshot] = None) -> np.ndarray:
    """逆有効質量テンソル M⁻¹(G)（K = ½ ĠᵀM⁻¹Ġ）

    c_n = −iΣ_j Ġ_j⟨E_n|H_j|E_ref⟩/(E_n − E_ref)² を暗チャネルの K に代入し、
    Ġ についての2次形式として読み取る。
    """
    fam = model.fam
    n = fam.n_controls
    minv = np.zeros((n, n))
    active = [i for i in model.dark_channels if fam.channels[i].rate > 0]
    if not active:
        return minv

    snap = snapshot or fam.spectrum(G)
    e_ref = _ref_state(fam, snap, model.ref_level)
    u = _response_vectors(model, snap)
    for idx in active:
        channel = fam.channels[idx]
        a_u = channel.operator @ u
        a11 = np.vdot(e_ref, channel.operator @ e_ref)
        w = a_u - a11 * u
        w = w - np.outer(e_ref, e_ref.conj() @ w)
        minv += 2.0 * channel.rate * np.real(dagger(w) @ w)
    return 0.5 * (minv + minv.T)


def lagrangian(model: ActionModel, G: Sequence[float], G_dot: Sequence[float]) -> LagrangianSample:
    g = np.asarray(G, dtype=float)
    g_dot = np.asarray(G_dot, dtype=float)
    snap = model.fam.spectrum(g)
    minv = inverse_mass(model, g, snap)
    return LagrangianSample(G=g, V=potential(model, g, snap), Minv=minv, K=float(0.5 * g_dot @ minv @ g_dot))


def dissipative_loss_rate(model: ActionModel, G: Sequence[float]) -> float:
    """ρ = |E_ref⟩⟨E_ref| での瞬時の損失率 −⟨E_ref|R(ρ)|E_ref⟩（Lindblad 形での −V に一致）"""
    fam = model.fam
    snap = fam.spectrum(G)
    e_ref = _ref_state(fam, snap, model.ref_level)
    rho = np.outer(e_ref, e_ref.conj())
    rate = lindblad_rhs(rho, np.zeros_like(rho), fam.channels)
    return float(-np.vdot(e_ref, rate @ e_ref).real)


def action(
    model: ActionModel,
    path: ControlPath,
    t_span: Optional[Tuple[float, float]] = None,
    epsrel: Optional[float] = None,
    limit: int = 400,
) -> float:
    """ΔF = ∫ (K − V) dt を適応 Gauss–Kronrod 求積で計算"""
    t0, t1 = t_span if t_span is not None else (0.0, path.t_f)
    if not path.boundary_smooth:
        logger.debug("⚠️ 境界で Ġ≠0 の経路に対して作用を評価します")

    def density(t: float) -> float:
        return lagrangian(model, path.evaluate(t), path.derivative(t)).L

    points = [b for b in path.breakpoints if t0 < b < t1] or None
    value, err = quad(
        density,
        t0,
        t1,
        points=points,
        epsabs=0.0,
        epsrel=settings.quad_epsrel if epsrel is None else epsrel,
        limit=limit,
    )
    return float(value)


def _finite_gradient(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, step: float) -> np.ndarray:
    grads = []
    for k in range(x.size):
        dx = np.zeros_like(x)
        dx[k] = step * max(1.0, abs(x[k]))
        grads.append((np.asarray(fn(x + dx)) - np.asarray(fn(x - dx))) / (2.0 * dx[k]))
    return np.array(grads)


def solve_euler_lagrange(
    potential_fn: Callable[[np.ndarray], float],
    kinetic_fn: Callable[[np.ndarray], np.ndarray],
    G0: Sequence[float],
    G1: Sequence[float],
    t_f: float,
    n_nodes: int = 101,
    tol: float = 1e-8,
    max_nodes: int = 50000,
    fd_step: float = 1e-6,
) -> Tuple[ControlPath, float]:
    """L = ½ĠᵀW(G)Ġ − V(G) のオイラー＝ラグランジュ方程式を選点法で解く

    W(G)G̈ = ½[ĠᵀW_,kĠ]_k − (Σ_k W_,k Ġ_k)Ġ − ∇V

    Returns:
        (経路, 離散残差の最大値)
    """
    g0 = np.atleast_1d(np.asarray(G0, dtype=float))
    g1 = np.atleast_1d(np.asarray(G1, dtype=float))
    n = g0.size

    def rhs(_t, y):
        out = np.empty_like(y)
        out[:n] = y[n:]
        for col in range(y.shape[1]):
            g, v = y[:n, col], y[n:, col]
            w = np.atleast_2d(kinetic_fn(g))
            dw = _finite_gradient(kinetic_fn, g, fd_step)
            dv = _finite_gradient(lambda x: potential_fn(x), g, fd_step)
            force = 0.5 * np.einsum("i,kij,j->k", v, dw.reshape(n, n, n), v)
            force -= np.einsum("kij,k,j->i", dw.reshape(n, n, n), v, v)
            force -= dv.reshape(n)
            out[n:, col] = np.linalg.solve(w, force)
        return out

    def bc(ya, yb):
        return np.concatenate([ya[:n] - g0, yb[:n] - g1])

    mesh = np.linspace(0.0, t_f, n_nodes)
    guess = np.vstack(
        [g0[:, None] + np.outer(g1 - g0, mesh / t_f), np.repeat(((g1 - g0) / t_f)[:, None], n_nodes, axis=1)]
    )
    sol = solve_bvp(rhs, bc, mesh, guess, tol=tol, max_nodes=max_nodes)
    residual = float(np.max(sol.rms_residuals)) if sol.rms_residuals is not None else np.inf
    if sol.status != 0:
        raise ConvergenceError(f"境界値問題が収束しませんでした: {sol.message}", residual=residual)

    path = ControlPath(
        t_f=t_f,
        evaluate=lambda t: np.asarray(sol.sol(t))[:n],
        derivative=lambda t: np.asarray(sol.sol(t))[n:],
        n_controls=n,
    )
    return path, residual


def _energy_on_curve(
    potential_fn: Callable[[float], float],
    mass_fn: Callable[[float], float],
    q0: float,
    q1: float,
    t_f: float,
    breakpoints: Sequence[float],
    n_nodes: int,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    # 1次元の粒子: ½ m q̇² + V = ℰ を保存量として t(q) を逆に解く
    sign = 1.0 if q1 >= q0 else -1.0
    lo_q, hi_q = min(q0, q1), max(q0, q1)
    points = [b for b in breakpoints if lo_q < b < hi_q] or None
    v_max = max(potential_fn(q) for q in np.linspace(lo_q, hi_q, 257))

    def speed(q: float, energy: float) -> float:
        return np.sqrt(2.0 * max(energy - potential_fn(q), 0.0) / mass_fn(q))

    def duration(log_gap: float) -> float:
        energy = v_max + np.exp(log_gap)
        value, _ = quad(lambda q: 1.0 / speed(q, energy), lo_q, hi_q, points=points, limit=400)
        return value - t_f

    lo, hi = -20.0, 5.0
    while duration(lo) < 0 and lo > -60.0:
        lo -= 10.0
    while duration(hi) > 0 and hi < 60.0:
        hi += 10.0
    energy = v_max + np.exp(brentq(duration, lo, hi, xtol=1e-14, rtol=1e-14))

    q_grid = np.linspace(q0, q1, n_nodes)
    times = np.zeros(n_nodes)
    for k in range(1, n_nodes):
        a, b = sorted((q_grid[k - 1], q_grid[k]))
        seg, _ = quad(lambda q: 1.0 / speed(q, energy), a, b, limit=200)
        times[k] = times[k - 1] + seg
    rates = sign * np.array([speed(q, energy) for q in q_grid])
    scale = t_f / times[-1]
    return times * scale, q_grid, rates / scale


def solve_least_action(
    model: ActionModel,
    boundary_G0: Sequence[float],
    boundary_G1: Sequence[float],
    t_f: float,
    curve: Optional[ControlCurve] = None,
    n_nodes: int = 101,
    tol: float = 1e-8,
    method: str = "collocation",
) -> ControlPath:
    """最小作用の原理で最適経路を求める

    Args:
        model: 作用モデル
        boundary_G0, boundary_G1: 境界での制御値
        t_f: 転送時間
        curve: 1次元の制御多様体（PAP など拘束つきの場合）
        n_nodes: 初期選点数
        tol: 選点残差の許容値
        method: "collocation" または "energy"（curve 指定時のみ）

    Returns:
        ControlPath
    """
    g0 = np.asarray(boundary_G0, dtype=float)
    g1 = np.asarray(boundary_G1, dtype=float)

    if curve is None:
        def kinetic(g):
            return inverse_mass(model, g)

        w0 = kinetic(g0)
        if np.linalg.cond(w0) > 1e12:
            raise InvalidInputError("M⁻¹ が特異です。拘束曲線 (curve) を指定してください")
        path, residual = solve_euler_lagrange(lambda g: potential(model, g), kinetic, g0, g1, t_f, n_nodes, tol)
        logger.info(f"✅ 最小作用経路（全制御空間）: residual={residual:.3e}")
        return path

    q0, q1 = curve.coordinate(g0), curve.coordinate(g1)
    for g, q in ((g0, q0), (g1, q1)):
        if np.linalg.norm(curve.point(q) - g) > 1e-9 * max(1.0, float(np.linalg.norm(g))):
            raise InvalidInputError("境界値が拘束曲線上にありません")

    def v_curve(q):
        return potential(model, curve.point(float(np.atleast_1d(q)[0])))

    def m_curve(q):
        q = float(np.atleast_1d(q)[0])
        tau = curve.tangent(q)
        return np.array([[tau @ inverse_mass(model, curve.point(q)) @ tau]])

    if method == "collocation":
        try:
            path_q, residual = solve_euler_lagrange(v_curve, m_curve, [q0], [q1], t_f, n_nodes, tol)
            logger.info(f"✅ 最小作用経路（選点法）: residual={residual:.3e}")

            def q_of_t(t):
                y = path_q.evaluate(t)
                return float(y[0]), float(path_q.derivative(t)[0])
        except ConvergenceError as e:
            logger.warning(f"⚠️ 選点法が収束しないためエネルギー法に切り替えます: residual={e.residual:.3e}")
            method = "energy"
    if method == "energy":
        times, qs, rates = _energy_on_curve(
            lambda q: v_curve(q),
            lambda q: float(m_curve(q)[0, 0]),
            q0, q1, t_f, curve.breakpoints, max(n_nodes, 401),
        )
        spline = CubicHermiteSpline(times, qs, rates)

        def q_of_t(t):
            return float(spline(t)), float(spline(t, 1))
    elif method != "collocation":
        raise InvalidInputError(f"未知の解法です: {method}")

    return ControlPath(
        t_f=t_f,
        evaluate=lambda t: curve.point(q_of_t(t)[0]),
        derivative=lambda t: curve.tangent(q_of_t(t)[0]) * q_of_t(t)[1],
        n_controls=g0.size,
        mixing_angle=q_of_t,
    )
