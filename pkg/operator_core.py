"""
密行列の演算子代数
エルミート固有値分解（ゲージ連続性つき）、Lindblad 散逸子、期待値を提供する
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from errors import InvalidInputError, NumericalError

logger = logging.getLogger(__name__)

# 演算子・密度行列はいずれも dim×dim の複素 ndarray
Operator = np.ndarray
DensityMatrix = np.ndarray

HERMITIAN_TOL = 1e-12
RESIDUAL_TOL = 1e-10


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    scale = max(float(np.max(np.abs(a))), 1.0) if a.size else 1.0
    return bool(np.max(np.abs(a - dagger(a)), initial=0.0) <= tol * scale)


def as_operator(matrix: Union[np.ndarray, Sequence], hermitian: bool = False) -> Operator:
    """行列を演算子として検証し complex128 で返す"""
    op = np.asarray(matrix, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1] or op.shape[0] == 0:
        raise InvalidInputError(f"演算子は正方行列である必要があります: shape={op.shape}")
    if not np.all(np.isfinite(op)):
        raise InvalidInputError("演算子に有限でない要素が含まれています")
    if hermitian and not is_hermitian(op):
        raise InvalidInputError("エルミートではない演算子が渡されました")
    return op


def as_density_matrix(rho: Union[np.ndarray, Sequence], dim: Optional[int] = None) -> DensityMatrix:
    """密度行列の不変条件（エルミート・トレース1・半正定値）を確認する

    状態ベクトルが渡された場合は |ψ⟩⟨ψ| に変換する。
    """
    arr = np.asarray(rho, dtype=complex)
    if arr.ndim == 1:
        arr = np.outer(arr, arr.conj())
    arr = as_operator(arr)
    if dim is not None and arr.shape[0] != dim:
        raise InvalidInputError(f"密度行列の次元が一致しません: {arr.shape[0]} != {dim}")
    if np.max(np.abs(arr - dagger(arr))) > 1e-10:
        raise InvalidInputError("密度行列がエルミートではありません")
    if abs(np.trace(arr).real - 1.0) > 1e-9:
        raise InvalidInputError(f"密度行列のトレースが1ではありません: {np.trace(arr).real}")
    if np.min(np.linalg.eigvalsh(arr)) < -1e-8:
        raise InvalidInputError("密度行列に負の固有値があります")
    return arr


@dataclass(frozen=True, eq=False)
class SpectrumSnapshot:
    """ある制御点での瞬時固有値（昇順）と正規直交固有ベクトル（列）"""

    values: np.ndarray
    vectors: np.ndarray
    gauge_aligned: bool = False

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def vector(self, n: int) -> np.ndarray:
        return self.vectors[:, n]


def _fix_free_gauge(vectors: np.ndarray) -> np.ndarray:
    # 参照がない場合は最大成分を実正にする
    idx = np.argmax(np.abs(vectors), axis=0)
    pivots = vectors[idx, np.arange(vectors.shape[1])]
    return vectors * (np.abs(pivots) / pivots)


def eigendecompose(h: Operator, gauge_ref: Optional[SpectrumSnapshot] = None) -> SpectrumSnapshot:
    """エルミート行列の固有値分解

    Args:
        h: エルミート演算子
        gauge_ref: 直前の固有系。与えられた場合、各固有ベクトルに単位位相を掛けて
            最大重なりの相手との内積を実正にそろえる

    Returns:
        SpectrumSnapshot
    """
    h = as_operator(h, hermitian=True)
    if gauge_ref is not None and gauge_ref.vectors.shape[0] != h.shape[0]:
        raise InvalidInputError(
            f"gauge_ref の次元が一致しません: {gauge_ref.vectors.shape[0]} != {h.shape[0]}"
        )
    try:
        values, vectors = scipy.linalg.eigh(0.5 * (h + dagger(h)))
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
        raise NumericalError(f"固有値ソルバーが収束しませんでした: {e}")

    if gauge_ref is None:
        vectors = _fix_free_gauge(vectors)
    else:
        overlaps = dagger(gauge_ref.vectors) @ vectors
        partners = np.argmax(np.abs(overlaps), axis=0)
        phases = overlaps[partners, np.arange(vectors.shape[1])]
        norms = np.abs(phases)
        safe = np.where(norms > 0, phases, 1.0)
        vectors = vectors * (np.abs(safe) / safe)

    norm_h = max(float(np.linalg.norm(h, 2)), 1.0)
    residual = np.max(np.linalg.norm(h @ vectors - vectors * values, axis=0))
    if residual > RESIDUAL_TOL * norm_h:
        raise NumericalError(f"固有値分解の残差が大きすぎます: {residual:.3e}")

    return SpectrumSnapshot(values=values, vectors=vectors, gauge_aligned=gauge_ref is not None)


def _check_channels(dim: int, channels: Sequence[Tuple[Operator, float]]):
    for channel in channels:
        op, rate = channel[0], channel[1]
        if op.shape != (dim, dim):
            raise InvalidInputError(f"散逸演算子の次元が一致しません: {op.shape} != {(dim, dim)}")
        if rate < 0:
            raise InvalidInputError(f"レートは非負である必要があります: {rate}")


def lindblad_rhs(rho: DensityMatrix, h: Operator, channels: Sequence[Tuple[Operator, float]]) -> np.ndarray:
    """−i[H,ρ] + Σ_α Γ_α (AρA† − ½A†Aρ − ½ρA†A)"""
    rho = np.asarray(rho, dtype=complex)
    h = np.asarray(h, dtype=complex)
    if rho.shape != h.shape:
        raise InvalidInputError(f"ρ と H の次元が一致しません: {rho.shape} != {h.shape}")
    _check_channels(h.shape[0], channels)

    rho_dot = -1j * (h @ rho - rho @ h)
    if channels:
        ops = np.array([c[0] for c in channels], dtype=complex)
        rates = np.array([c[1] for c in channels], dtype=float).reshape(-1, 1, 1)
        ops_dag = dagger(ops)
        ops_sq = ops_dag @ ops
        rho_dot = rho_dot + np.sum(
            rates * (ops @ rho @ ops_dag - 0.5 * (ops_sq @ rho + rho @ ops_sq)),
            axis=0,
        )
    return rho_dot


def hamiltonian_superoperator(h: Operator) -> np.ndarray:
    """行優先ベクトル化での −i[H, ·]"""
    h = np.asarray(h, dtype=complex)
    eye = np.eye(h.shape[0])
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


def dissipator_superoperator(channels: Sequence[Tuple[Operator, float]], dim: int) -> np.ndarray:
    _check_channels(dim, channels)
    eye = np.eye(dim)
    total = np.zeros((dim * dim, dim * dim), dtype=complex)
    for channel in channels:
        op, rate = np.asarray(channel[0], dtype=complex), float(channel[1])
        if rate == 0.0:
            continue
        sq = dagger(op) @ op
        total += rate * (
            np.kron(op, op.conj()) - 0.5 * np.kron(sq, eye) - 0.5 * np.kron(eye, sq.T)
        )
    return total


def lindblad_superoperator(h: Operator, channels: Sequence[Tuple[Operator, float]]) -> np.ndarray:
    """vec(AρB) = (A ⊗ Bᵀ) vec(ρ) の規約で Lindblad 生成子を行列化する"""
    h = np.asarray(h, dtype=complex)
    return hamiltonian_superoperator(h) + dissipator_superoperator(channels, h.shape[0])


def expectation(a: Operator, psi_or_rho: np.ndarray) -> complex:
    """⟨ψ|A|ψ⟩ または Tr(Aρ)"""
    a = np.asarray(a, dtype=complex)
    state = np.asarray(psi_or_rho, dtype=complex)
    if state.shape[0] != a.shape[0]:
        raise InvalidInputError(f"次元が一致しません: {state.shape[0]} != {a.shape[0]}")
    if state.ndim == 1:
        value = np.vdot(state, a @ state)
    elif state.ndim == 2 and state.shape == a.shape:
        value = np.trace(a @ state)
    else:
        raise InvalidInputError(f"状態の形が不正です: {state.shape}")
    if is_hermitian(a):
        return complex(value.real, 0.0) if abs(value.imag) <= 1e-12 * max(abs(value), 1.0) else complex(value)
    return complex(value)
