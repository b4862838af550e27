"""Anisotropy diagnostics: homogeneity, sphere constants, duality and boundary distance."""

from functools import lru_cache
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize, minimize_scalar

from ..config.logging_config import get_logger
from ..core.exceptions import (
    ConfigurationError,
    ConvergenceError,
    DomainError,
    NonSmoothPointError,
    NotStrictlyConvexError,
)
from ..models.anisotropy import (
    CONVEXITY_THRESHOLD,
    AnisotropyModel,
    BoundaryGeometry,
    ConstantMobility,
    DistanceResult,
    EllipsoidNorm,
    EuclideanNorm,
    LevelSetGeometry,
    Mobility,
    Norm,
    QuarticPerturbedNorm,
    SphereConstants,
    TiltedMobility,
)
from ..models.grid import DomainSpec
from ..utils.helpers import sphere_samples, tangent_basis

logger = get_logger(__name__)

SPHERE_SAMPLES = {2: 2048, 3: 4096}
DUAL_STARTS = 64
DUAL_POLISHED = 4
BOUNDARY_SAMPLES = 1024
THIRD_DERIVATIVE_STEP = 1e-4


def build_anisotropy(
    norm: str,
    dimension: int,
    q: Optional[Sequence[Sequence[float]]] = None,
    epsilon: float = 0.3,
    mobility: str = "constant",
    delta: float = 0.0,
) -> AnisotropyModel:
    """Build an anisotropy from its configuration name and parameters.

    Raises:
        ConfigurationError: unknown names or invalid parameters
        NotStrictlyConvexError: sampled tangential convexity below 1e-4
    """
    norm_obj: Norm
    if norm == "euclidean":
        norm_obj = EuclideanNorm()
    elif norm == "ellipsoid":
        if q is None:
            raise ConfigurationError("ellipsoid anisotropy needs a matrix q")
        norm_obj = EllipsoidNorm(q)
    elif norm == "quartic":
        norm_obj = QuarticPerturbedNorm(epsilon)
    else:
        raise ConfigurationError(f"unknown anisotropy '{norm}'")

    mobility_obj: Mobility
    if mobility == "constant":
        mobility_obj = ConstantMobility()
    elif mobility == "tilted":
        mobility_obj = TiltedMobility(delta)
    else:
        raise ConfigurationError(f"unknown mobility '{mobility}'")

    model = AnisotropyModel(norm_obj, mobility_obj, dimension)
    logger.debug(f"Built anisotropy {model.name} in dimension {dimension}")
    return model


def verify_homogeneity(
    model: AnisotropyModel, samples: int = 1000, seed: int = 0
) -> Dict[str, float]:
    """Maximum relative residuals of the homogeneity identities over sampled (q, v, lambda).

    Checked: F(lq) = l F(q), m(lq) = m(q), DF(lq) = DF(q), D^2F|_q(q, v) = 0 and
    D^2F(lq) = D^2F(q) / l, with lambda in [0.1, 10].
    """
    rng = np.random.default_rng(seed)
    d = model.dimension + 1
    q = rng.standard_normal((samples, d))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    v = rng.standard_normal((samples, d))
    lam = 10.0 ** rng.uniform(-1.0, 1.0, samples)
    scaled = lam[:, None] * q
    norm, mobility = model.norm, model.mobility

    f_q = norm.value(q)
    grad_q = norm.gradient(q)
    hess_q = norm.hessian(q)
    hess_scale = np.linalg.norm(hess_q, axis=(1, 2))

    value = np.abs(norm.value(scaled) - lam * f_q) / (lam * f_q)
    mobility_res = np.abs(mobility.value(scaled) - mobility.value(q)) / mobility.value(q)
    gradient = np.linalg.norm(norm.gradient(scaled) - grad_q, axis=1)
    gradient /= np.linalg.norm(grad_q, axis=1)
    radial = np.abs(np.einsum("mi,mij,mj->m", q, hess_q, v)) / (
        hess_scale * np.linalg.norm(v, axis=1)
    )
    second = np.linalg.norm(lam[:, None, None] * norm.hessian(scaled) - hess_q, axis=(1, 2))
    second /= hess_scale

    return {
        "value_degree_one": float(np.max(value)),
        "mobility_degree_zero": float(np.max(mobility_res)),
        "gradient_degree_zero": float(np.max(gradient)),
        "hessian_radial": float(np.max(radial)),
        "hessian_degree_minus_one": float(np.max(second)),
    }


def _third_derivative_bound(norm: Norm, points: np.ndarray) -> float:
    d = points.shape[1]
    bound = 0.0
    for k in range(d):
        step = np.zeros(d)
        step[k] = THIRD_DERIVATIVE_STEP
        difference = norm.hessian(points + step) - norm.hessian(points - step)
        derivative = difference / (2.0 * THIRD_DERIVATIVE_STEP)
        bound = max(bound, float(np.max(np.abs(derivative))))
    return bound


def _refine_on_sphere(objective, starts: np.ndarray) -> Tuple[float, np.ndarray]:
    """Minimise an objective of unit covectors from several starts with Nelder-Mead."""
    best_value, best_point = np.inf, starts[0]
    for start in starts:
        basis = tangent_basis(start)
        if basis.shape[0] == 0:
            value = float(objective(start))
            point = start
        else:
            def along(c: np.ndarray, start: np.ndarray = start, basis: np.ndarray = basis) -> float:
                z = start + basis.T @ c
                return float(objective(z / np.linalg.norm(z)))

            result = minimize(
                along,
                np.zeros(basis.shape[0]),
                method="Nelder-Mead",
                options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 2000},
            )
            z = start + basis.T @ result.x
            value, point = float(result.fun), z / np.linalg.norm(z)
        if value < best_value:
            best_value, best_point = value, point
    return best_value, best_point


def sphere_constants(model: AnisotropyModel) -> SphereConstants:
    """Constants A1, A2, A = A1 A2 and the upper bound C of the norm on the unit sphere.

    Raises:
        NotStrictlyConvexError: A1 <= 1e-4
    """
    d = model.dimension + 1
    samples = np.vstack([sphere_samples(d, SPHERE_SAMPLES.get(d, 8192)), np.eye(d), -np.eye(d)])
    tangential = model.tangential_minimum(samples)
    worst = samples[np.argsort(tangential)[:5]]
    a1, _ = _refine_on_sphere(lambda z: model.tangential_minimum(z[None, :])[0], worst)
    a1 = min(a1, float(np.min(tangential)))
    if a1 <= CONVEXITY_THRESHOLD:
        logger.warning(f"{model.name}: tangential convexity {a1:.3e} at the threshold")
        raise NotStrictlyConvexError(f"{model.name}: A1 = {a1:.3e} <= {CONVEXITY_THRESHOLD}")

    values = model.norm.value(samples)
    mobilities = model.mobility.value(samples)
    products = values * mobilities
    a2, _ = _refine_on_sphere(
        lambda z: float(model.norm.value(z) * model.mobility.value(z)),
        samples[np.argsort(products)[:5]],
    )
    a2 = min(a2, float(np.min(products)))

    hessian_max = float(np.max(np.abs(np.linalg.eigvalsh(model.norm.hessian(samples)))))
    subset = samples[:: max(1, len(samples) // 256)]
    components = {
        "max_norm": float(np.max(values)),
        "inverse_min_norm": float(1.0 / np.min(values)),
        "max_mobility": float(np.max(mobilities)),
        "inverse_min_mobility": float(1.0 / np.min(mobilities)),
        "max_hessian": hessian_max,
        "inverse_a1": 1.0 / a1,
        "third_derivative": _third_derivative_bound(model.norm, subset),
    }
    c = max(components.values())
    logger.info(f"{model.name}: A1={a1:.6g}, A2={a2:.6g}, C={c:.6g}")
    return SphereConstants(a1=a1, a2=a2, a=a1 * a2, c=c, components=components)


# Duality


def _support_maximizer(norm: Norm, v: np.ndarray) -> Tuple[float, np.ndarray]:
    """Maximise h(d) = v.d / F(d) over unit d: multi-start, then Riemannian Newton."""
    n = v.shape[0]
    starts = sphere_samples(n, DUAL_STARTS)
    h = starts @ v / norm.value(starts)
    if n == 1:
        k = int(np.argmax(h))
        return float(h[k]), starts[k]

    tolerance = 1e-10 * max(1.0, float(np.linalg.norm(v)))
    best_value, best_point, best_residual = -np.inf, starts[0], np.inf
    for start in starts[np.argsort(h)[::-1][:DUAL_POLISHED]]:
        d = start.copy()
        residual = np.inf
        for _ in range(60):
            f = float(norm.value(d))
            df = norm.gradient(d)
            vd = float(v @ d)
            grad = v / f - vd * df / f**2
            hess = (
                -(np.outer(v, df) + np.outer(df, v)) / f**2
                - vd * norm.hessian(d) / f**2
                + 2.0 * vd * np.outer(df, df) / f**3
            )
            basis = tangent_basis(d)
            tangential = basis @ grad
            residual = float(np.linalg.norm(tangential))
            if residual <= tolerance:
                break
            reduced = basis @ hess @ basis.T - float(d @ grad) * np.eye(basis.shape[0])
            try:
                step = np.linalg.solve(reduced, -tangential)
            except np.linalg.LinAlgError:
                step = tangential
            if float(step @ tangential) <= 0.0:
                # Newton direction not an ascent direction away from the maximum
                step = 0.1 * tangential
            d = d + basis.T @ step
            d /= np.linalg.norm(d)
        value = float(v @ d / norm.value(d))
        if value > best_value:
            best_value, best_point, best_residual = value, d, residual

    if best_residual > tolerance:
        raise ConvergenceError(
            f"numerical-failure: dual norm gradient {best_residual:.3e} exceeds {tolerance:.1e}"
        )
    return best_value, best_point


def dual_norm(model: AnisotropyModel, v: Any) -> float:
    """F*(v) = sup{v.p : F~(p) <= 1} for the restricted norm F~(p) = F(p, 0)."""
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ConfigurationError("dual norm argument must be finite")
    if not np.any(v):
        return 0.0
    norm = model.restricted_norm
    closed = norm.dual_closed_form(v)
    if closed is not None:
        return float(closed)
    return _support_maximizer(norm, v)[0]


def p_of_n(model: AnisotropyModel, n: Any) -> np.ndarray:
    """p(n) = DF*|_n, the covector with F~(p) = 1 dual to n."""
    n = np.asarray(n, dtype=float)
    if not np.any(n):
        raise ConfigurationError("normal map needs a nonzero argument")
    norm = model.restricted_norm
    closed = norm.dual_gradient_closed_form(n)
    if closed is not None:
        return closed
    _, d = _support_maximizer(norm, n)
    return d / float(norm.value(d))


def n_of_p(model: AnisotropyModel, p: Any) -> np.ndarray:
    """n(p) = DF~|_p."""
    p = np.asarray(p, dtype=float)
    if not np.any(p):
        raise ConfigurationError("normal map needs a nonzero argument")
    return model.DF_tilde(p)


def normal_maps(model: AnisotropyModel, argument: Any) -> Tuple[np.ndarray, np.ndarray]:
    """Both Wulff maps at ``argument``: (p(argument), n(argument))."""
    return p_of_n(model, argument), n_of_p(model, argument)


def dual_hessian(model: AnisotropyModel, n: Any) -> np.ndarray:
    """D^2F* at n through the Legendre identity for F*^2 / 2."""
    n = np.asarray(n, dtype=float)
    dual = dual_norm(model, n)
    dp = p_of_n(model, n)
    q = dual * dp
    df = model.DF_tilde(q)
    half_square = np.outer(df, df) + float(model.F_tilde(q)) * model.D2F_tilde(q)
    inverse = np.linalg.inv(half_square)
    hessian = (inverse - np.outer(dp, dp)) / dual
    return 0.5 * (hessian + hessian.T)


def min_unit_covector(model: AnisotropyModel) -> float:
    """Smallest |p| on the level set F~(p) = 1, i.e. 1 / max_{|p|=1} F~(p)."""
    n = model.dimension
    samples = sphere_samples(n, SPHERE_SAMPLES.get(n, 1024) if n > 1 else 2)
    values = model.F_tilde(samples)
    largest = samples[np.argsort(values)[::-1][:3]]
    best, _ = _refine_on_sphere(lambda z: -float(model.F_tilde(z)), largest)
    return 1.0 / max(-best, float(np.max(values)))


# Boundary distance


@lru_cache(maxsize=16)
def _planar_dual_table(model: AnisotropyModel) -> CubicSpline:
    """Periodic spline of F* on the unit circle for norms without a closed-form dual."""
    angles = np.linspace(0.0, 2.0 * np.pi, 1025)
    directions = np.stack([np.cos(angles[:-1]), np.sin(angles[:-1])], axis=-1)
    values = np.array([_support_maximizer(model.restricted_norm, u)[0] for u in directions])
    return CubicSpline(angles, np.append(values, values[0]), bc_type="periodic")


def _dual_batch(model: Optional[AnisotropyModel], vectors: np.ndarray) -> np.ndarray:
    if model is None:
        return np.linalg.norm(vectors, axis=-1)
    closed = model.restricted_norm.dual_closed_form(vectors)
    if closed is not None:
        return closed
    if vectors.shape[-1] == 2:
        radius = np.linalg.norm(vectors, axis=-1)
        angle = np.mod(np.arctan2(vectors[..., 1], vectors[..., 0]), 2.0 * np.pi)
        return radius * _planar_dual_table(model)(angle)
    flat = vectors.reshape(-1, vectors.shape[-1])
    return np.array([dual_norm(model, v) for v in flat]).reshape(vectors.shape[:-1])


def _interval_distance(
    model: Optional[AnisotropyModel], domain: DomainSpec, x: float
) -> Tuple[float, int]:
    ends = np.array([domain.lower[0], domain.upper[0]])
    distances = _dual_batch(model, (x - ends)[:, None])
    if abs(distances[0] - distances[1]) <= 1e-12 * max(1.0, float(np.max(distances))):
        raise NonSmoothPointError(f"non-smooth point: x = {x} is equidistant from both ends")
    side = int(np.argmin(distances))
    return float(distances[side]), side


def _circular_gap(a: float, b: float, period: float) -> float:
    gap = abs(a - b) % period
    return min(gap, period - gap)


def anisotropic_distance(
    model: Optional[AnisotropyModel], domain: DomainSpec, x: Sequence[float]
) -> DistanceResult:
    """d(x) = inf{F*(x - y) : y on the boundary}, its foot point and inward normal.

    A dense boundary sample (1024 points, doubled until the minimum moves by < 1e-6) is refined
    by bounded 1D minimisation. ``model=None`` means the Euclidean distance.

    Raises:
        DomainError: x outside the open domain
        NonSmoothPointError: the foot point is not unique (cut locus)
    """
    point = np.asarray(x, dtype=float)
    if not domain.contains(point):
        raise DomainError(f"point {point.tolist()} is not in the open domain")
    geometry = BoundaryGeometry(domain, model)

    if geometry.is_interval:
        distance, side = _interval_distance(model, domain, float(point[0]))
        inward = np.array([1.0 if side == 0 else -1.0])
        norm = model.restricted_norm if model is not None else EuclideanNorm()
        foot = np.array([domain.lower[0] if side == 0 else domain.upper[0]])
        return DistanceResult(distance, foot, norm.gradient(inward), float(side))

    period = geometry.perimeter

    def objective(s: float) -> float:
        return float(np.asarray(_dual_batch(model, point - geometry.point(np.array(s)))))

    count = BOUNDARY_SAMPLES
    previous = np.inf
    while True:
        params = np.arange(count) * period / count
        values = _dual_batch(model, point[None, :] - geometry.point(params))
        k = int(np.argmin(values))
        spacing = period / count
        refined = minimize_scalar(
            objective,
            bounds=(params[k] - spacing, params[k] + spacing),
            method="bounded",
            options={"xatol": 1e-10},
        )
        distance, parameter = float(refined.fun), float(refined.x) % period
        if distance > values[k]:
            distance, parameter = float(values[k]), float(params[k])
        if abs(distance - previous) < 1e-6 or count >= 64 * BOUNDARY_SAMPLES:
            break
        previous = distance
        count *= 2

    _check_unique_foot(objective, params, values, distance, parameter, period)
    foot = geometry.point(np.array(parameter))
    normal = geometry.anisotropic_normal(np.array(parameter))
    return DistanceResult(distance, foot, normal, parameter)


def _check_unique_foot(objective, params, values, distance, parameter, period) -> None:
    scale = max(1.0, distance)
    spacing = period / len(params)
    near = params[values <= distance + 1e-9 * scale]
    if len(near) > 2 and max(_circular_gap(s, parameter, period) for s in near) > 2.0 * spacing:
        raise NonSmoothPointError("non-smooth point: boundary distance attains a plateau")

    left, right = np.roll(values, 1), np.roll(values, -1)
    low = values <= distance * 1.01 + 1e-12
    candidates = np.flatnonzero((values < left) & (values <= right) & low)
    spacing_window = (-spacing, spacing)
    for k in candidates:
        if _circular_gap(params[k], parameter, period) <= 2.0 * spacing:
            continue
        local = minimize_scalar(
            objective,
            bounds=(params[k] + spacing_window[0], params[k] + spacing_window[1]),
            method="bounded",
            options={"xatol": 1e-10},
        )
        other = min(float(local.fun), float(values[k]))
        if abs(other - distance) <= 1e-8 * scale:
            raise NonSmoothPointError(
                "non-smooth point: two foot points at parameters "
                f"{parameter:.6g} and {float(local.x):.6g}"
            )


def distance_field(
    model: Optional[AnisotropyModel], domain: DomainSpec, points: np.ndarray, samples: int = 2048
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised boundary distance for many interior points.

    Returns:
        Tuple ``(distance, parameter, cut_locus)``; cut-locus points carry a flag and are not
        meant to be used where d is required to be smooth
    """
    points = np.asarray(points, dtype=float).reshape(-1, domain.dimension)
    geometry = BoundaryGeometry(domain, model)

    if geometry.is_interval:
        ends = np.array([domain.lower[0], domain.upper[0]])
        left = _dual_batch(model, (points[:, 0] - ends[0])[:, None])
        right = _dual_batch(model, (points[:, 0] - ends[1])[:, None])
        distance = np.minimum(left, right)
        cut = np.abs(left - right) <= 1e-12 * np.maximum(1.0, distance)
        return distance, (right < left).astype(float), cut

    period = geometry.perimeter
    params = np.arange(samples) * period / samples
    boundary = geometry.point(params)
    spacing = period / samples

    distance = np.empty(len(points))
    parameter = np.empty(len(points))
    cut = np.zeros(len(points), dtype=bool)
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    for start in range(0, len(points), 256):
        chunk = points[start : start + 256]
        values = _dual_batch(model, chunk[:, None, :] - boundary[None, :, :])
        k = np.argmin(values, axis=1)
        sampled = values[np.arange(len(chunk)), k]

        # vectorised golden-section refinement inside the bracketing samples
        lo, hi = params[k] - spacing, params[k] + spacing
        for _ in range(48):
            a = hi - golden * (hi - lo)
            b = lo + golden * (hi - lo)
            fa = _dual_batch(model, chunk - geometry.point(a))
            fb = _dual_batch(model, chunk - geometry.point(b))
            left = fa < fb
            hi = np.where(left, b, hi)
            lo = np.where(left, lo, a)
        best = 0.5 * (lo + hi)
        refined = _dual_batch(model, chunk - geometry.point(best))
        use = refined < sampled
        distance[start : start + len(chunk)] = np.where(use, refined, sampled)
        parameter[start : start + len(chunk)] = np.mod(np.where(use, best, params[k]), period)

        # a second well-separated local minimum at the same level marks the cut locus
        local_min = (values < np.roll(values, 1, axis=1)) & (values <= np.roll(values, -1, axis=1))
        index = np.arange(samples)[None, :]
        gap = np.abs(index - k[:, None])
        gap = np.minimum(gap, samples - gap)
        rivals = np.where(local_min & (gap > 2), values, np.inf).min(axis=1)
        cut[start : start + len(chunk)] = rivals <= sampled + 1e-9 * np.maximum(1.0, sampled)
    return distance, parameter, cut


def distance_laplacian_and_curvatures(
    domain: DomainSpec, x: Sequence[float], model: Optional[AnisotropyModel] = None
) -> LevelSetGeometry:
    """Laplacian of d and the curvatures of the boundary and the level set through x.

    In the plane, with foot parameter s, inward normal nu, tangent tau and anisotropic
    curvature k = k_E tau^T D^2F~(nu) tau, the level-set curvature is k / (1 - d k) and
    Delta d = -k_E (Dq(nu) tau) . l / (1 - d k), where q(nu) = nu / F~(nu) and l is the dual
    covector of tau in the frame (tau, n).
    """
    result = anisotropic_distance(model, domain, x)
    if domain.dimension == 1:
        return LevelSetGeometry(result.distance, [], 0.0, 0.0, 0.0 if model is None else None)

    geometry = BoundaryGeometry(domain, model)
    s = np.array(result.parameter)
    kappa_e = float(geometry.euclidean_curvature(s))
    kappa = float(geometry.curvature(s))
    d = result.distance
    if 1.0 - d * kappa <= 1e-12:
        raise NonSmoothPointError(f"non-smooth point: distance {d:.6g} reaches the focal distance")

    norm = model.restricted_norm if model is not None else EuclideanNorm()
    nu = geometry.inward_normal(s)
    tau = geometry.tangent(s)
    f = float(norm.value(nu))
    df = norm.gradient(nu)
    dq_tau = tau / f - nu * float(df @ tau) / f**2
    normal = result.normal
    rotated = np.array([-normal[1], normal[0]])
    dual_tau = rotated / float(rotated @ tau)
    laplacian = -kappa_e * float(dq_tau @ dual_tau) / (1.0 - d * kappa)

    euclidean = None
    if model is None or isinstance(model.norm, EuclideanNorm):
        euclidean = -kappa / (1.0 - kappa * d)
    return LevelSetGeometry(
        distance=d,
        curvatures=[kappa],
        laplacian=laplacian,
        level_set_mean_curvature=kappa / (1.0 - d * kappa),
        euclidean_formula=euclidean,
    )


def shape_operator_residual(
    model: Optional[AnisotropyModel], domain: DomainSpec, samples: int = 64
) -> float:
    """Largest |g(A tau, w) - g(tau, A w)| over tangent vectors, g = D^2F* at n(y)."""
    geometry = BoundaryGeometry(domain, model)
    if geometry.is_interval:
        return 0.0
    residual = 0.0
    euclidean = AnisotropyModel(EuclideanNorm(), ConstantMobility(), domain.dimension, check=False)
    for s in (np.arange(samples) + 0.5) * geometry.perimeter / samples:
        shape = geometry.shape_operator(float(s))
        normal = geometry.anisotropic_normal(np.array(s))
        metric = dual_hessian(model if model is not None else euclidean, normal)
        tau = geometry.tangent(np.array(s))
        moved = shape @ tau
        residual = max(residual, abs(float(moved @ metric @ tau - tau @ metric @ moved)))
    return residual


def lemma_sampling(
    model: AnisotropyModel, constants: SphereConstants, count: int = 10_000, seed: int = 0
) -> Dict[str, Any]:
    """Sampled a-posteriori coefficient bounds over (p, v) with |p| log-uniform in [1e-3, 1e3].

    ``ratio_min`` is min (1 + |p|^2) v^T a(p) v / (A |v|^2); ``projection_min`` is the smallest
    ratio of v^T a(p) v to A1 A2 (|v - (v.p^)p^|^2 + (v.p^)^2 / (1 + |p|^2)).
    """
    rng = np.random.default_rng(seed)
    n = model.dimension
    directions = rng.standard_normal((count, n))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = 10.0 ** rng.uniform(-3.0, 3.0, count)
    p = radii[:, None] * directions
    v = rng.standard_normal((count, n))

    a = model.coefficient_matrix(p)
    quadratic = np.einsum("mi,mij,mj->m", v, a, v)
    v_sq = np.sum(v * v, axis=1)
    ratio = (1.0 + radii**2) * quadratic / (constants.a * v_sq)

    along = np.sum(v * directions, axis=1)
    across = v_sq - along**2
    projection = constants.a1 * constants.a2 * (across + along**2 / (1.0 + radii**2))
    chain = quadratic / projection

    return {
        "samples": count,
        "ratio_min": float(np.min(ratio)),
        "projection_min": float(np.min(chain)),
        "ratio_pass": bool(np.min(ratio) >= 1.0 - 1e-4),
        "projection_pass": bool(np.min(chain) >= 1.0 - 1e-6),
    }


def duality_round_trip(model: AnisotropyModel, count: int = 1000, seed: int = 0) -> float:
    """Largest relative deviation of F** from F~ over sampled covectors."""
    rng = np.random.default_rng(seed)
    norm = model.restricted_norm
    worst = 0.0
    for p in rng.standard_normal((count, model.dimension)):
        # F**(p) = sup{p.v : F*(v) <= 1} is attained at v = n(p) / F*(n(p))
        direction = norm.gradient(p)
        bidual = float(p @ direction) / dual_norm(model, direction)
        worst = max(worst, abs(bidual - float(norm.value(p))) / float(norm.value(p)))
    return worst
