# flow_ode/integrate.py
"""
確率フロー ODE dX/dλ = u(X, λ, conditions) を λ=0 → 1 で固定刻み積分する。
conditions は中身を解釈せずにそのまま u に渡す。
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import Any, Callable, List, Optional, Protocol

import numpy as np

DEFAULT_STEPS = 50
METHODS = ("euler", "heun")


class VectorField(Protocol):
    def __call__(self, x: np.ndarray, lam: float, conditions: Any = None) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class FlowState:
    x: np.ndarray
    lam: float

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"flow time must be in [0,1]: {self.lam}")
        if not np.all(np.isfinite(self.x)):
            raise FloatingPointError("state contains non-finite values")


def gaussian_init(shape, seed: int) -> np.ndarray:
    """X⁰ ~ N(0, I)。seed 必須。"""
    if seed is None:
        raise ValueError("seed is required")
    return np.random.default_rng(seed).standard_normal(shape)


def _eval(field: VectorField, x: np.ndarray, lam: float, conditions: Any) -> np.ndarray:
    out = np.asarray(field(x, lam, conditions), dtype=np.float64)
    if out.shape != x.shape:
        raise ValueError(f"vector field returned shape {out.shape}, expected {x.shape}")
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(f"vector field returned non-finite values at λ={lam:.4f}")
    return out


def integrate(field: VectorField, x0: np.ndarray, steps: int = DEFAULT_STEPS, method: str = "heun",
              conditions: Any = None, callback: Optional[Callable[[FlowState], None]] = None) -> np.ndarray:
    if steps < 1:
        raise ValueError(f"steps must be >= 1: {steps}")
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}: {method}")
    x = np.array(x0, dtype=np.float64)
    grid = np.linspace(0.0, 1.0, steps + 1)
    for i in range(steps):
        lam, nxt = float(grid[i]), float(grid[i + 1])
        h = nxt - lam
        u = _eval(field, x, lam, conditions)
        if method == "euler":
            x = x + h * u
        else:
            pred = x + h * u
            x = x + 0.5 * h * (u + _eval(field, pred, nxt, conditions))
        if callback is not None:
            callback(FlowState(x, nxt))
    return x


def integrate_path(field: VectorField, x0: np.ndarray, steps: int = DEFAULT_STEPS, method: str = "heun",
                   conditions: Any = None) -> List[FlowState]:
    """各ステップ後の状態列（λ=0 を含む）"""
    states = [FlowState(np.array(x0, dtype=np.float64), 0.0)]
    integrate(field, x0, steps, method, conditions, callback=states.append)
    return states


# --- 解析解のあるテスト用の場 --------------------------------------------------

def zero_field(x, lam, conditions=None):
    return np.zeros_like(x)


def constant_field(c: float | np.ndarray) -> VectorField:
    def f(x, lam, conditions=None):
        return np.broadcast_to(np.asarray(c, dtype=np.float64), x.shape).copy()
    return f


def linear_field(x, lam, conditions=None):
    return np.array(x, dtype=np.float64)


def convergence_order(field: VectorField, x0: np.ndarray, exact: np.ndarray, method: str = "heun",
                      steps=(25, 50, 100)) -> float:
    """最粗・最細の誤差比から推定した収束次数"""
    errs = [float(np.max(np.abs(integrate(field, x0, n, method) - exact))) for n in steps]
    return float(np.log(errs[0] / errs[-1]) / np.log(steps[-1] / steps[0]))
