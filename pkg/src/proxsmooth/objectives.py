"""Weakly convex objectives: small analytic test functions and the
robust sparse recovery problem

    min_x  ||A x - y||_1 + lambda_bar * sum_i f(x_i),

where f is a clipped quadratic penalty.  Every objective carries its
weak-convexity modulus rho (phi + rho/2 * ||.||^2 convex) and, when
known, a global lower bound, so envelope parameters can be checked for
admissibility.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

INSTANCE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class WeaklyConvexFunction:
    """A function with a subgradient selection and declared modulus.

    ``value`` and ``subgradient`` act on shape-(dim,) arrays.  The
    optional ``batch_value`` evaluates shape-(N, dim) stacks in one call
    (used by the grid oracle); ``value_and_subgradient`` fuses the two
    evaluations when sharing work is worthwhile (e.g. one residual
    matvec for the sparse recovery objective).
    """

    dim: int
    rho: float
    value: Callable[[np.ndarray], float]
    subgradient: Callable[[np.ndarray], np.ndarray]
    lower_bound: Optional[float] = None
    batch_value: Optional[Callable[[np.ndarray], np.ndarray]] = None
    fused: Optional[Callable[[np.ndarray], tuple[float, np.ndarray]]] = None
    name: str = ""

    def value_and_subgradient(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        if self.fused is not None:
            return self.fused(x)
        return self.value(x), self.subgradient(x)


def zero_function(dim: int = 1) -> WeaklyConvexFunction:
    return WeaklyConvexFunction(
        dim=dim,
        rho=0.0,
        value=lambda x: 0.0,
        subgradient=lambda x: np.zeros(dim),
        lower_bound=0.0,
        batch_value=lambda ys: np.zeros(ys.shape[0]),
        name="zero",
    )


def quadratic(dim: int = 1) -> WeaklyConvexFunction:
    """phi(x) = ||x||^2 / 2; convex, minimum 0 at the origin."""
    return WeaklyConvexFunction(
        dim=dim,
        rho=0.0,
        value=lambda x: 0.5 * float(np.dot(x, x)),
        subgradient=lambda x: np.asarray(x, dtype=float).copy(),
        lower_bound=0.0,
        batch_value=lambda ys: 0.5 * np.einsum("ij,ij->i", ys, ys),
        name="quadratic",
    )


def absolute() -> WeaklyConvexFunction:
    """phi(x) = |x| in one dimension, subgradient 0 at the kink."""
    return WeaklyConvexFunction(
        dim=1,
        rho=0.0,
        value=lambda x: float(abs(x[0])),
        subgradient=lambda x: np.sign(np.asarray(x, dtype=float)),
        lower_bound=0.0,
        batch_value=lambda ys: np.abs(ys[:, 0]),
        name="abs",
    )


def double_well() -> WeaklyConvexFunction:
    """phi(x) = x^4 - x^2; 2-weakly convex, minima at +-1/sqrt(2)."""
    return WeaklyConvexFunction(
        dim=1,
        rho=2.0,
        value=lambda x: float(x[0] ** 4 - x[0] ** 2),
        subgradient=lambda x: 4.0 * x**3 - 2.0 * x,
        lower_bound=-0.25,
        batch_value=lambda ys: ys[:, 0] ** 4 - ys[:, 0] ** 2,
        name="double-well",
    )


def clipped_quadratic(t: float, sigma: float = 1.0) -> float:
    """Bounded sparsity penalty: 2 sigma |t| - sigma^2 t^2 capped at 1.

    Equals the quadratic branch for |t| <= 1/sigma and is identically 1
    beyond; continuously differentiable at the junction.  With the
    convention phi + rho/2 ||.||^2 convex its modulus is rho = 2 sigma^2
    (the quadratic branch has curvature -2 sigma^2).
    """
    t = float(t)
    if abs(t) <= 1.0 / sigma:
        return 2.0 * sigma * abs(t) - sigma**2 * t**2
    return 1.0


def clipped_quadratic_subgrad(t: float, sigma: float = 1.0) -> float:
    """A subgradient selection for :func:`clipped_quadratic` (0 at t=0)."""
    t = float(t)
    if t == 0.0 or abs(t) >= 1.0 / sigma:
        return 0.0
    return 2.0 * sigma * np.sign(t) - 2.0 * sigma**2 * t


def _penalty_vec(x: np.ndarray, sigma: float) -> np.ndarray:
    ax = np.abs(x)
    return np.where(ax <= 1.0 / sigma, 2.0 * sigma * ax - sigma**2 * x**2, 1.0)


def _penalty_subgrad_vec(x: np.ndarray, sigma: float) -> np.ndarray:
    inside = (x != 0.0) & (np.abs(x) < 1.0 / sigma)
    return np.where(inside, 2.0 * sigma * np.sign(x) - 2.0 * sigma**2 * x, 0.0)


@dataclass(frozen=True)
class SparseRecoveryInstance:
    """One synthetic robust sparse recovery problem.

    y = A @ x_true + e with A iid N(0, 1/m), x_true k1-sparse with
    standard normal nonzeros, and e k2-sparse with N(2, 1) nonzeros.
    """

    A: np.ndarray
    y: np.ndarray
    x_true: np.ndarray
    e: np.ndarray
    n: int
    m: int
    k1: int
    k2: int
    sigma: float
    lambda_bar: float
    seed: int


def generate_instance(
    n: int,
    m: int,
    k1: int,
    k2: int,
    sigma: float = 1.0,
    lambda_bar: float = 0.1,
    seed: int = 0,
) -> SparseRecoveryInstance:
    """Draw an instance deterministically from ``seed``.

    The same seed always produces bitwise-identical arrays.  Supports
    are drawn without replacement, then nonzero values, in a fixed
    order, so the construction is stable across calls.
    """
    if not (0 < k1 <= n and 0 <= k2 <= m):
        raise ValueError(f"invalid sparsity levels k1={k1} (n={n}), k2={k2} (m={m})")
    rng = np.random.default_rng(seed)
    A = rng.normal(0.0, 1.0 / np.sqrt(m), size=(m, n))
    x_true = np.zeros(n)
    support = rng.choice(n, size=k1, replace=False)
    x_true[support] = rng.normal(0.0, 1.0, size=k1)
    e = np.zeros(m)
    if k2 > 0:
        noise_support = rng.choice(m, size=k2, replace=False)
        e[noise_support] = rng.normal(2.0, 1.0, size=k2)
    y = A @ x_true + e
    return SparseRecoveryInstance(
        A=A, y=y, x_true=x_true, e=e, n=n, m=m, k1=k1, k2=k2,
        sigma=sigma, lambda_bar=lambda_bar, seed=seed,
    )


def rsr_value(inst: SparseRecoveryInstance, x: np.ndarray) -> float:
    r = inst.A @ x - inst.y
    return float(np.sum(np.abs(r)) + inst.lambda_bar * np.sum(_penalty_vec(x, inst.sigma)))


def rsr_subgrad(inst: SparseRecoveryInstance, x: np.ndarray) -> np.ndarray:
    r = inst.A @ x - inst.y
    return inst.A.T @ np.sign(r) + inst.lambda_bar * _penalty_subgrad_vec(x, inst.sigma)


def sparse_recovery_objective(inst: SparseRecoveryInstance) -> WeaklyConvexFunction:
    """Wrap an instance as a WeaklyConvexFunction.

    Modulus: the l1 term is convex and each penalty coordinate is
    2 sigma^2-weakly convex, so rho = 2 * lambda_bar * sigma^2.  The
    objective is nonnegative, hence lower bound 0.
    """

    def fused(x: np.ndarray) -> tuple[float, np.ndarray]:
        r = inst.A @ x - inst.y
        v = float(np.sum(np.abs(r)) + inst.lambda_bar * np.sum(_penalty_vec(x, inst.sigma)))
        g = inst.A.T @ np.sign(r) + inst.lambda_bar * _penalty_subgrad_vec(x, inst.sigma)
        return v, g

    return WeaklyConvexFunction(
        dim=inst.n,
        rho=2.0 * inst.lambda_bar * inst.sigma**2,
        value=lambda x: rsr_value(inst, x),
        subgradient=lambda x: rsr_subgrad(inst, x),
        lower_bound=0.0,
        fused=fused,
        name="rsr",
    )


def relative_error(x: np.ndarray, x_true: np.ndarray) -> float:
    """||x - x_true||_2 / ||x_true||_2 (requires x_true != 0)."""
    denom = float(np.linalg.norm(x_true))
    if denom == 0.0:
        raise ValueError("relative error is undefined for x_true = 0")
    return float(np.linalg.norm(x - x_true)) / denom


def save_instance(inst: SparseRecoveryInstance, path) -> None:
    """Write an instance as .npz with a JSON header of all parameters."""
    header = json.dumps(
        {
            "format": "sparse-recovery-instance",
            "version": INSTANCE_FORMAT_VERSION,
            "n": inst.n, "m": inst.m, "k1": inst.k1, "k2": inst.k2,
            "sigma": inst.sigma, "lambda_bar": inst.lambda_bar, "seed": inst.seed,
        },
        sort_keys=True,
    )
    np.savez(
        path,
        header=np.frombuffer(header.encode(), dtype=np.uint8),
        A=inst.A, y=inst.y, x_true=inst.x_true, e=inst.e,
    )


def load_instance(path) -> SparseRecoveryInstance:
    with np.load(path) as data:
        header = json.loads(bytes(data["header"]).decode())
        if header.get("format") != "sparse-recovery-instance":
            raise ValueError(f"{path} is not a sparse recovery instance file")
        if header.get("version") != INSTANCE_FORMAT_VERSION:
            raise ValueError(f"unsupported instance format version {header.get('version')}")
        return SparseRecoveryInstance(
            A=data["A"], y=data["y"], x_true=data["x_true"], e=data["e"],
            n=int(header["n"]), m=int(header["m"]),
            k1=int(header["k1"]), k2=int(header["k2"]),
            sigma=float(header["sigma"]), lambda_bar=float(header["lambda_bar"]),
            seed=int(header["seed"]),
        )
