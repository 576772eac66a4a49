"""
metric_lab.py

Floating point experiments on step-2 Carnot groups in exponential coordinates:
group law, dilations, the box gauge, Monte Carlo volume scaling, the volume of
a flow tube, and an upper bound for the Carnot-Caratheodory distance in the
first Heisenberg group.

Monte Carlo sampling is split into chunks of fixed size; chunk c draws from
the generator spawned as child c of SeedSequence(seed), so results depend on
(seed, samples, chunk_size) only.
"""

import logging
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
import pandas as pd
from scipy.optimize import minimize
from sklearn.linear_model import LinearRegression

from carnot_bounds.algebra_spec import CarnotAlgebra
from carnot_bounds.constants import (
    MC_CHUNK_SIZE, DEFAULT_SAMPLES, DEFAULT_SEED, DEFAULT_EPS, DEFAULT_TAU, DEFAULT_SEGMENTS, DEFAULT_RESTARTS,
    MIN_SEGMENTS, PENALTY_START, PENALTY_GROWTH, PENALTY_ROUNDS, CONSTRAINT_TOLERANCE,
)

logger = logging.getLogger(f"CARNOT.{__name__}")

GroupElement = np.ndarray

# keeps segment lengths differentiable at zero
_SMOOTHING = 1e-12


class StepUnsupported(ValueError):
    """The group law used here is exact only for step <= 2."""


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, best_value: float, residual: float):
        super().__init__(message)
        self.best_value = best_value
        self.residual = residual


def _require_step2(alg: CarnotAlgebra):
    if alg.r > 2:
        raise StepUnsupported(f"'{alg.name}' has step {alg.r}; the metric lab supports step <= 2 only")


def _as_element(alg: CarnotAlgebra, x) -> GroupElement:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != alg.n:
        raise ValueError(f"Expected {alg.n} coordinates, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("Group element has non-finite coordinates")
    return x


def _bracket(alg: CarnotAlgebra, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...j,ijk->...k", x, y, alg.float_structure)


def group_multiply(alg: CarnotAlgebra, x, y) -> GroupElement:
    """x . y = x + y + [x, y]/2; works on single points and on (N, n) batches."""
    _require_step2(alg)
    x, y = _as_element(alg, x), _as_element(alg, y)
    return x + y + 0.5 * _bracket(alg, x, y)


def dilate(alg: CarnotAlgebra, eps: float, x) -> GroupElement:
    if eps <= 0:
        raise ValueError(f"Dilation factor must be positive, got {eps}")
    return _as_element(alg, x) * eps ** np.asarray(alg.weights, dtype=float)


def box_gauge(alg: CarnotAlgebra, x) -> np.ndarray:
    """max_i |x_i|^(1/w_i); the sublevel set {gauge <= eps} is the box |x_i| <= eps^w_i."""
    x = _as_element(alg, x)
    return np.max(np.abs(x) ** (1.0 / np.asarray(alg.weights, dtype=float)), axis=-1)


def _chunks(samples: int, seed: int, chunk_size: int) -> Iterator[tuple]:
    n_chunks = -(-samples // chunk_size)
    for c, child in enumerate(np.random.SeedSequence(seed).spawn(n_chunks)):
        yield np.random.default_rng(child), min(chunk_size, samples - c * chunk_size)


def _hit_stats(hits: int, samples: int, volume: float):
    p = hits / samples
    return volume * p, volume * np.sqrt(p * (1 - p) / samples)


@dataclass
class VolumeScaling:
    slope: float
    intercept: float
    expected: int
    frame: pd.DataFrame = field(repr=False)


def volume_scaling_experiment(alg: CarnotAlgebra, eps_list: Sequence[float] = DEFAULT_EPS,
                              samples: int = DEFAULT_SAMPLES, seed: int = DEFAULT_SEED,
                              chunk_size: int = MC_CHUNK_SIZE) -> VolumeScaling:
    """
    Estimate vol{gauge <= eps} for each eps from one shared uniform sample of
    the largest box, then fit log vol against log eps; the slope estimates Q.
    """
    _require_step2(alg)
    eps = np.asarray(sorted(eps_list), dtype=float)
    if len(eps) < 2 or eps[0] <= 0:
        raise ValueError("Need at least two positive scales")
    weights = np.asarray(alg.weights, dtype=float)
    half_widths = eps[-1] ** weights
    domain = float(np.prod(2 * half_widths))

    counts = np.zeros(len(eps), dtype=np.int64)
    for rng, size in _chunks(samples, seed, chunk_size):
        points = rng.uniform(-1.0, 1.0, size=(size, alg.n)) * half_widths
        gauge = box_gauge(alg, points)
        counts += (gauge[:, None] <= eps[None, :]).sum(axis=0)

    rows = []
    for e, hits in zip(eps, counts):
        volume, stderr = _hit_stats(int(hits), samples, domain)
        rows.append({"parameter": e, "estimate": volume, "stderr": stderr, "hits": int(hits)})
    frame = pd.DataFrame(rows)
    if (frame["hits"] == 0).any():
        raise ValueError("Some scale received no samples; increase samples or raise the smallest eps")

    model = LinearRegression().fit(np.log(frame[["parameter"]].to_numpy()), np.log(frame["estimate"].to_numpy()))
    result = VolumeScaling(slope=float(model.coef_[0]), intercept=float(model.intercept_), expected=alg.Q, frame=frame)
    logger.info(f"Volume scaling of '{alg.name}': slope {result.slope:.4f} (Q = {alg.Q}) from {samples} samples")
    return result


@dataclass
class TubeExperiment:
    """ratio = vol(Tube) / ((tau / eps) vol(Box)); box_ratio = vol(Tube) / vol(Box)."""
    eps: float
    tau: float
    samples: int
    seed: int
    ratio: float
    stderr: float
    tube_volume: float
    box_volume: float
    box_ratio: float

    def frame(self) -> pd.DataFrame:
        norm = (self.tau / self.eps) * self.box_volume
        return pd.DataFrame([
            {"parameter": "ratio", "estimate": self.ratio, "stderr": self.stderr},
            {"parameter": "tube_volume", "estimate": self.tube_volume, "stderr": self.stderr * norm},
            {"parameter": "box_ratio", "estimate": self.box_ratio, "stderr": self.stderr * norm / self.box_volume},
        ])


def _in_tube(alg: CarnotAlgebra, points: np.ndarray, bounds: np.ndarray, tau: float) -> np.ndarray:
    """
    y lies in the tube iff y . exp(-t e1) is in the box for some t in [0, tau].
    In step 2 that product is affine in t, so each coordinate constraint is an
    interval of t and the test is exact.
    """
    e1 = np.zeros(alg.n)
    e1[0] = 1.0
    slope = -e1 - 0.5 * _bracket(alg, points, e1[None, :])
    lo = np.zeros(len(points))
    hi = np.full(len(points), tau)
    with np.errstate(divide="ignore", invalid="ignore"):
        for k in range(alg.n):
            a, b, bound = points[:, k], slope[:, k], bounds[k]
            t1 = (-bound - a) / b
            t2 = (bound - a) / b
            moving = b != 0
            inside = np.abs(a) <= bound
            lo = np.where(moving, np.maximum(lo, np.minimum(t1, t2)), np.where(inside, lo, np.inf))
            hi = np.where(moving, np.minimum(hi, np.maximum(t1, t2)), hi)
    return lo <= hi


def tube_experiment(alg: CarnotAlgebra, eps: float, tau: float = DEFAULT_TAU, samples: int = DEFAULT_SAMPLES,
                    seed: int = DEFAULT_SEED, chunk_size: int = MC_CHUNK_SIZE) -> TubeExperiment:
    """Volume swept by the gauge box of size eps under right translation by exp(t e1), 0 <= t <= tau."""
    _require_step2(alg)
    if eps <= 0 or tau <= 0:
        raise ValueError(f"eps and tau must be positive, got eps={eps}, tau={tau}")
    weights = np.asarray(alg.weights)
    bounds = eps ** weights.astype(float)
    spread = np.abs(alg.float_structure[:, 0, :]).sum(axis=0)

    lower = -bounds.copy()
    upper = bounds.copy()
    upper[0] += tau
    vertical = weights == 2
    upper[vertical] = bounds[vertical] + 0.5 * tau * eps * spread[vertical]
    lower[vertical] = -upper[vertical]
    domain = float(np.prod(upper - lower))

    hits = 0
    for rng, size in _chunks(samples, seed, chunk_size):
        points = lower + rng.uniform(0.0, 1.0, size=(size, alg.n)) * (upper - lower)
        hits += int(_in_tube(alg, points, bounds, tau).sum())

    tube_volume, tube_err = _hit_stats(hits, samples, domain)
    box_volume = float(np.prod(2 * bounds))
    norm = (tau / eps) * box_volume
    result = TubeExperiment(eps=eps, tau=tau, samples=samples, seed=seed, ratio=tube_volume / norm,
                            stderr=tube_err / norm, tube_volume=tube_volume, box_volume=box_volume,
                            box_ratio=tube_volume / box_volume)
    logger.info(f"Tube of '{alg.name}' at eps={eps}, tau={tau}: ratio {result.ratio:.4f} +- {result.stderr:.4f}")
    return result


def lift_coordinates(target, inverse: bool = False) -> np.ndarray:
    """
    Exponential coordinates (x, y, z) of the first Heisenberg group to the
    coordinates of the contact form theta = dz - x dy, where z' = z + xy/2,
    and back with inverse=True.
    """
    x, y, z = np.asarray(target, dtype=float)
    shift = -0.5 * x * y if inverse else 0.5 * x * y
    return np.array([x, y, z + shift])


def polygon_length(vertices: np.ndarray) -> float:
    return float(np.linalg.norm(np.diff(vertices, axis=0), axis=1).sum())


def polygon_lift(vertices: np.ndarray) -> float:
    """Integral of x dy along the polygon, exact for straight segments."""
    x, y = vertices[:, 0], vertices[:, 1]
    return float(np.sum(0.5 * (x[:-1] + x[1:]) * np.diff(y)))


def _lift_gradient(vertices: np.ndarray) -> np.ndarray:
    x, y = vertices[:, 0], vertices[:, 1]
    grad = np.zeros_like(vertices)
    grad[:-1, 0] += 0.5 * np.diff(y)
    grad[1:, 0] += 0.5 * np.diff(y)
    grad[1:, 1] += 0.5 * (x[:-1] + x[1:])
    grad[:-1, 1] -= 0.5 * (x[:-1] + x[1:])
    return grad


def _length_gradient(vertices: np.ndarray):
    steps = np.diff(vertices, axis=0)
    lengths = np.sqrt((steps ** 2).sum(axis=1) + _SMOOTHING)
    unit = steps / lengths[:, None]
    grad = np.zeros_like(vertices)
    grad[1:] += unit
    grad[:-1] -= unit
    return lengths.sum(), grad


@dataclass
class HorizontalPath:
    """Planar trace of a horizontal polygon from the origin; vertices[-1] is the target's (x, y)."""
    target: np.ndarray
    vertices: np.ndarray
    length: float
    residual: float
    restarts: pd.DataFrame = field(repr=False, default=None)


def _initial_trace(end: np.ndarray, area: float, segments: int) -> np.ndarray:
    """Chord to the target plus a loop whose signed area is the missing lift."""
    s = np.linspace(0.0, 1.0, segments + 1)
    trace = s[:, None] * end[None, :]
    radius = np.sqrt(abs(area) / np.pi)
    angle = 2 * np.pi * s
    loop = np.stack([radius * (np.cos(angle) - 1), np.sign(area) * radius * np.sin(angle)], axis=1)
    return trace + loop


def _solve(vertices: np.ndarray, goal: float, tolerance: float) -> np.ndarray:
    """Quadratic penalty rounds with L-BFGS-B, then Newton steps onto the constraint."""
    start, end = vertices[0].copy(), vertices[-1].copy()
    shape = vertices[1:-1].shape

    def assemble(flat):
        return np.vstack([start, flat.reshape(shape), end])

    mu = PENALTY_START
    flat = vertices[1:-1].ravel()
    for _ in range(PENALTY_ROUNDS):
        def objective(z, mu=mu):
            path = assemble(z)
            length, grad = _length_gradient(path)
            c = polygon_lift(path) - goal
            grad = grad + 2 * mu * c * _lift_gradient(path)
            return length + mu * c * c, grad[1:-1].ravel()

        flat = minimize(objective, flat, jac=True, method="L-BFGS-B").x
        mu *= PENALTY_GROWTH

    path = assemble(flat)
    for _ in range(20):
        c = polygon_lift(path) - goal
        if abs(c) <= tolerance:
            break
        grad = _lift_gradient(path)
        grad[0] = grad[-1] = 0
        norm = (grad ** 2).sum()
        if norm == 0:
            break
        path = path - c * grad / norm
    return path


def cc_distance_path(alg: CarnotAlgebra, target, segments: int = DEFAULT_SEGMENTS,
                     restarts: int = DEFAULT_RESTARTS, seed: int = DEFAULT_SEED,
                     tolerance: float = CONSTRAINT_TOLERANCE) -> HorizontalPath:
    """
    Shortest horizontal polygon found from the origin to `target` in the first
    Heisenberg group: minimize the planar length subject to the lift of the
    trace reaching the target height. Restart 0 starts from a chord plus a
    loop, later restarts from noisy copies of it.
    """
    _require_step2(alg)
    if tuple(alg.strata_dims) != (2, 1) or alg.float_structure[0, 1, 2] != 1.0:
        raise ValueError(f"'{alg.name}' is not the first Heisenberg group with [X, Y] = Z")
    if segments < MIN_SEGMENTS:
        raise ValueError(f"Need at least {MIN_SEGMENTS} segments, got {segments}")
    target = _as_element(alg, target)
    lifted = lift_coordinates(target)
    end, goal = lifted[:2], lifted[2]
    if not np.any(target):
        return HorizontalPath(target=target, vertices=np.zeros((segments + 1, 2)), length=0.0, residual=0.0)

    base = _initial_trace(end, float(target[2]), segments)
    scale = float(box_gauge(alg, target))
    records = []
    best = None
    for restart, child in enumerate(np.random.SeedSequence(seed).spawn(restarts)):
        trace = base.copy()
        if restart > 0:
            trace[1:-1] += np.random.default_rng(child).normal(scale=0.1 * scale, size=trace[1:-1].shape)
        path = _solve(trace, goal, tolerance)
        length = polygon_length(path)
        residual = abs(polygon_lift(path) - goal)
        records.append({"parameter": restart, "estimate": length, "stderr": np.nan, "residual": residual})
        logger.debug(f"Restart {restart}: length {length:.6f}, constraint residual {residual:.2e}")
        if residual <= tolerance and (best is None or length < best.length):
            best = HorizontalPath(target=target, vertices=path, length=length, residual=residual)

    frame = pd.DataFrame(records)
    if best is None:
        top = frame.loc[frame["residual"].idxmin()]
        raise ConvergenceError(f"No restart met the constraint tolerance {tolerance}",
                               best_value=float(top["estimate"]), residual=float(top["residual"]))
    best.restarts = frame
    logger.info(f"CC distance to {target.tolist()} is at most {best.length:.6f} ({segments} segments)")
    return best


def cc_distance_upper(alg: CarnotAlgebra, target, segments: int = DEFAULT_SEGMENTS,
                      restarts: int = DEFAULT_RESTARTS, seed: int = DEFAULT_SEED) -> float:
    return cc_distance_path(alg, target, segments=segments, restarts=restarts, seed=seed).length
