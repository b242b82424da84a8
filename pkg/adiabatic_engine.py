"""
制御経路に沿った非断熱摂動論
瞬時スペクトル、非断熱パラメータ ε_{m,n}、主要次の振幅 c_m、位相補正 δγ を計算する
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from errors import GapUnderflowError, InvalidInputError, LevelCrossingError
from operator_core import (
    Operator,
    SpectrumSnapshot,
    as_operator,
    dagger,
    eigendecompose,
)
from settings import settings

logger = logging.getLogger(__name__)


class Channel(NamedTuple):
    """Lindblad チャネル (A_α, Γ_α)"""

    operator: Operator
    rate: float
    label: str = ""


@dataclass(frozen=True, eq=False)
class HamiltonianFamily:
    """H(G) = Σ_j G_j H_j と散逸チャネルの組

    subspace は活性な不変部分空間を張る等長行列（dim×k）。指定した場合、スペクトルと
    ε はその内部で計算し、チャネルの行列要素は全空間で評価する。
    """

    generators: Tuple[Operator, ...]
    channels: Tuple[Channel, ...] = ()
    subspace: Optional[np.ndarray] = None
    basis_labels: Tuple[str, ...] = ()

    def __post_init__(self):
        if not self.generators:
            raise InvalidInputError("生成子が1つ以上必要です")
        gens = tuple(as_operator(g, hermitian=True) for g in self.generators)
        dim = gens[0].shape[0]
        if any(g.shape != (dim, dim) for g in gens):
            raise InvalidInputError("生成子の次元がそろっていません")
        chans = []
        for ch in self.channels:
            ch = ch if isinstance(ch, Channel) else Channel(*ch)
            op = as_operator(ch.operator)
            if op.shape != (dim, dim):
                raise InvalidInputError(f"チャネル {ch.label or '?'} の次元が一致しません")
            if ch.rate < 0:
                raise InvalidInputError(f"チャネル {ch.label or '?'} のレートが負です: {ch.rate}")
            chans.append(Channel(op, float(ch.rate), ch.label))
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "channels", tuple(chans))
        if self.subspace is not None:
            p = np.asarray(self.subspace, dtype=complex)
            if p.ndim != 2 or p.shape[0] != dim or p.shape[1] > dim:
                raise InvalidInputError(f"subspace の形が不正です: {p.shape}")
            if not np.allclose(dagger(p) @ p, np.eye(p.shape[1]), atol=1e-12):
                raise InvalidInputError("subspace は正規直交な列を持つ必要があります")
            object.__setattr__(self, "subspace", p)

    @property
    def dim(self) -> int:
        return self.generators[0].shape[0]

    @property
    def n_controls(self) -> int:
        return len(self.generators)

    @property
    def active_dim(self) -> int:
        return self.dim if self.subspace is None else self.subspace.shape[1]

    def hamiltonian(self, g: Sequence[float]) -> Operator:
        g = np.asarray(g, dtype=float)
        if g.shape != (self.n_controls,):
            raise InvalidInputError(f"制御ベクトルの長さが不正です: {g.shape}")
        return np.tensordot(g, np.array(self.generators), axes=1)

    def hamiltonian_dot(self, g_dot: Sequence[float]) -> Operator:
        return self.hamiltonian(g_dot)

    def restrict(self, op: Operator) -> Operator:
        if self.subspace is None:
            return op
        return dagger(self.subspace) @ op @ self.subspace

    def embed(self, vectors: np.ndarray) -> np.ndarray:
        if self.subspace is None:
            return vectors
        return self.subspace @ vectors

    def spectrum(self, g: Sequence[float], gauge_ref: Optional[SpectrumSnapshot] = None) -> SpectrumSnapshot:
        return eigendecompose(self.restrict(self.hamiltonian(g)), gauge_ref)

    def with_channels(self, channels: Sequence[Channel]) -> "HamiltonianFamily":
        return HamiltonianFamily(self.generators, tuple(channels), self.subspace, self.basis_labels)


@dataclass(frozen=True, eq=False)
class ControlPath:
    """制御経路 G(t)（導関数と境界情報つき）"""

    t_f: float
    evaluate: Callable[[float], np.ndarray]
    derivative: Callable[[float], np.ndarray]
    n_controls: int
    boundary_smooth: bool = False
    breakpoints: Tuple[float, ...] = ()
    mixing_angle: Optional[Callable[[float], Tuple[float, float]]] = None

    def __post_init__(self):
        if not self.t_f > 0:
            raise InvalidInputError(f"t_f は正である必要があります: {self.t_f}")
        if self.boundary_smooth and not self.has_smooth_boundaries():
            raise InvalidInputError("boundary_smooth が指定されましたが Ġ(0), Ġ(t_f) が0ではありません")

    def has_smooth_boundaries(self, n_samples: int = 257) -> bool:
        times = np.linspace(0.0, self.t_f, n_samples)
        peak = max(float(np.linalg.norm(self.derivative(t))) for t in times)
        if peak == 0.0:
            return True
        ends = max(np.linalg.norm(self.derivative(0.0)), np.linalg.norm(self.derivative(self.t_f)))
        return bool(ends <= 1e-9 * peak)

    @classmethod
    def constant(cls, g: Sequence[float], t_f: float) -> "ControlPath":
        g = np.asarray(g, dtype=float)
        zero = np.zeros_like(g)
        return cls(t_f, lambda t: g.copy(), lambda t: zero.copy(), g.size, boundary_smooth=True)

    @classmethod
    def linear(cls, g0: Sequence[float], g1: Sequence[float], t_f: float) -> "ControlPath":
        g0 = np.asarray(g0, dtype=float)
        g1 = np.asarray(g1, dtype=float)
        slope = (g1 - g0) / t_f
        return cls(t_f, lambda t: g0 + slope * t, lambda t: slope.copy(), g0.size)


@dataclass(frozen=True, eq=False)
class AdiabaticFrame:
    """経路上のゲージ整列済み固有系と動的位相・幾何学的位相

    ゲージは隣接スナップショットとの重なりを実正にそろえる（平行移動ゲージ）ため、
    幾何学的位相はこのゲージでは格子誤差の範囲で0になる。
    """

    times: np.ndarray
    snapshots: List[SpectrumSnapshot]
    energies: np.ndarray
    dynamical_phases: np.ndarray
    geometric_phases: np.ndarray
    gap_floor: float
    max_geometric_imag: float = 0.0

    def nearest(self, t: float) -> SpectrumSnapshot:
        k = int(np.clip(np.searchsorted(self.times, t), 0, len(self.times) - 1))
        if k > 0 and abs(self.times[k - 1] - t) < abs(self.times[k] - t):
            k -= 1
        return self.snapshots[k]

    def phases_at(self, t: float) -> Tuple[np.ndarray, np.ndarray]:
        phi = np.array([np.interp(t, self.times, col) for col in self.dynamical_phases.T])
        gamma = np.array([np.interp(t, self.times, col) for col in self.geometric_phases.T])
        return phi, gamma


def _check_gaps(values: np.ndarray, floor: float, t: float):
    gaps = np.diff(values)
    if gaps.size and np.min(gaps) < floor:
        k = int(np.argmin(gaps))
        raise LevelCrossingError(
            f"t={t:.6g} で準位 {k} と {k + 1} が近縮退しています (gap={gaps[k]:.3e})",
            t=t,
            levels=(k, k + 1),
        )


def build_frame(
    fam: HamiltonianFamily,
    path: ControlPath,
    n_grid: Optional[int] = None,
    gap_floor: Optional[float] = None,
) -> AdiabaticFrame:
    """経路に沿った断熱フレームを構築

    Args:
        fam: ハミルトニアン族
        path: 制御経路
        n_grid: 時間格子点数（既定は settings.frame_grid）
        gap_floor: 近縮退とみなす相対ギャップ（max|E| に対する比）

    Returns:
        AdiabaticFrame
    """
    n_grid = n_grid or settings.frame_grid
    rel_floor = settings.gap_floor if gap_floor is None else gap_floor
    if n_grid < 2:
        raise InvalidInputError("n_grid は2以上である必要があります")

    times = np.linspace(0.0, path.t_f, n_grid)
    snapshots: List[SpectrumSnapshot] = []
    previous = None
    for t in times:
        snap = fam.spectrum(path.evaluate(t), previous)
        snapshots.append(snap)
        previous = snap

    energies = np.array([s.values for s in snapshots])
    floor = rel_floor * max(float(np.max(np.abs(energies))), 1e-300)
    for t, snap in zip(times, snapshots):
        _check_gaps(snap.values, floor, t)

    dynamical = cumulative_trapezoid(energies, times, axis=0, initial=0.0)

    vectors = np.array([s.vectors for s in snapshots])
    d_vectors = np.gradient(vectors, times, axis=0)
    connection = 1j * np.einsum("tin,tin->tn", vectors.conj(), d_vectors)
    max_imag = float(np.max(np.abs(connection.imag)))
    geometric = cumulative_trapezoid(connection.real, times, axis=0, initial=0.0)

    logger.debug(f"🔍 断熱フレーム構築: n_grid={n_grid}, min gap={np.min(np.diff(energies, axis=1), initial=np.inf):.3e}")
    return AdiabaticFrame(
        times=times,
        snapshots=snapshots,
        dynamical_phases=dynamical,
        geometric_phases=geometric,
        gap_floor=floor,
        max_geometric_imag=max_imag,
        energies=energies,
    )


def _snapshot_at(frame: AdiabaticFrame, fam: HamiltonianFamily, path: ControlPath, t: float) -> SpectrumSnapshot:
    if not -1e-12 <= t <= path.t_f + 1e-12:
        raise InvalidInputError(f"t は [0, t_f] の範囲内である必要があります: {t}")
    return fam.spectrum(path.evaluate(t), frame.nearest(t))


def _eps_from_snapshot(
    snap: SpectrumSnapshot, h_dot: Operator, floor: float, t: Optional[float] = None
) -> np.ndarray:
    k = snap.dim
    coupling = dagger(snap.vectors) @ h_dot @ snap.vectors
    eps = np.zeros((k, k), dtype=complex)
    for m in range(k):
        for n in range(m + 1, k):
            gap = snap.values[m] - snap.values[n]
            if abs(gap) < floor:
                raise GapUnderflowError(
                    f"準位 ({m}, {n}) のギャップがアンダーフローしました: {gap:.3e}",
                    pair=(m, n),
                    t=t,
                )
            eps[m, n] = coupling[m, n] / gap**2
            eps[n, m] = np.conj(eps[m, n])
    return eps


def nonadiabatic_eps(frame: AdiabaticFrame, fam: HamiltonianFamily, path: ControlPath, t: float) -> np.ndarray:
    """ε_{m,n}(t) = ⟨E_m|Ḣ|E_n⟩ / (E_m − E_n)²（対角は0）"""
    snap = _snapshot_at(frame, fam, path, t)
    h_dot = fam.restrict(fam.hamiltonian_dot(path.derivative(t)))
    return _eps_from_snapshot(snap, h_dot, frame.gap_floor, t)


def perturbative_amplitudes(
    frame: AdiabaticFrame,
    fam: HamiltonianFamily,
    path: ControlPath,
    t: float,
    ref: int = 1,
) -> np.ndarray:
    """主要次の振幅 c_m(t) ≃ −iε_{m,ref}(t) + iε_{m,ref}(0) e^{iγ_{m,ref}} e^{−iφ_{m,ref}}

    返り値の ref 成分は 0 とする。
    """
    eps_t = nonadiabatic_eps(frame, fam, path, t)[:, ref]
    eps_0 = nonadiabatic_eps(frame, fam, path, 0.0)[:, ref]
    phi, gamma = frame.phases_at(t)
    phi_rel = phi - phi[ref]
    gamma_rel = gamma - gamma[ref]
    amps = -1j * eps_t + 1j * eps_0 * np.exp(1j * gamma_rel) * np.exp(-1j * phi_rel)
    amps[ref] = 0.0
    return amps


def phase_correction(
    frame: AdiabaticFrame,
    fam: HamiltonianFamily,
    path: ControlPath,
    t: float,
    ref: int = 1,
) -> float:
    """δγ_ref(t) ≃ Σ_{m≠ref} ∫_0^t Δ_{m,ref} |ε_{m,ref}|² dt'"""
    if not 0.0 <= t <= path.t_f + 1e-12:
        raise InvalidInputError(f"t は [0, t_f] の範囲内である必要があります: {t}")
    grid = frame.times[frame.times < t]
    grid = np.append(grid, t)
    if grid.size < 2:
        return 0.0

    integrand = np.empty(grid.size)
    for i, s in enumerate(grid):
        snap = _snapshot_at(frame, fam, path, s)
        h_dot = fam.restrict(fam.hamiltonian_dot(path.derivative(s)))
        eps = _eps_from_snapshot(snap, h_dot, frame.gap_floor, s)[:, ref]
        gaps = snap.values - snap.values[ref]
        integrand[i] = float(np.sum(gaps * np.abs(eps) ** 2))
    return float(trapezoid(integrand, grid))


def project_onto_frame(
    fam: HamiltonianFamily,
    path: ControlPath,
    psi: np.ndarray,
    t: float,
    gauge_ref: Optional[SpectrumSnapshot] = None,
) -> np.ndarray:
    """厳密な波動関数の瞬時固有状態への射影 ⟨E_m(t)|ψ(t)⟩"""
    snap = fam.spectrum(path.evaluate(t), gauge_ref)
    return dagger(fam.embed(snap.vectors)) @ np.asarray(psi, dtype=complex)
