"""Linear Kirchhoff solves, Newton, least-action search and lambda sweeps."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.sparse.linalg import splu

from . import analysis
from .errors import (
    NoConvergence,
    NoPositivePart,
    OnlyConstantBranchFound,
    PeakSetMismatch,
    QGError,
    SingularHessian,
    SingularSystem,
)
from .functionals import (
    ProblemParams,
    constant_branch_action,
    gradient,
    hessian,
    lambda_norm_sq,
    nehari_action,
    nehari_project,
    nonlinear_load,
    operators,
    report,
)
from .graph import terminal_vertices, total_length
from .mesh import DiscreteFunction, build_mesh, resample
from .profiles import PeakSpec, build_ansatz, rescaled_soliton

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    newton_tol: float = 1e-10
    newton_max_iter: int = 60
    gradient_flow_step: float = 0.5
    gradient_flow_max_iter: int = 400
    gradient_flow_tol: float = 1e-10
    c_mesh: float = 0.1
    mesh_exponent: float = 0.5
    h_max: float = 0.1
    random_seed: int = 0
    max_restarts: int = 5

    def __post_init__(self):
        for name in ("newton_tol", "gradient_flow_step", "gradient_flow_tol", "c_mesh", "h_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("newton_max_iter", "gradient_flow_max_iter"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.max_restarts < 0:
            raise ValueError("max_restarts must be >= 0")

    def h_target(self, lam):
        """min(h_max, c_mesh * lam^-mesh_exponent); exponent 1/2 tracks the peak width."""
        return min(self.h_max, self.c_mesh * lam ** (-self.mesh_exponent))

    def to_dict(self):
        return asdict(self)


@dataclass(eq=False)
class SolutionRecord:
    params: ProblemParams
    u: DiscreteFunction
    functionals: object
    residual_norm: float
    newton_iters: int
    branch: str
    peaks: list = field(default_factory=list)
    nehari_action: float = None

    @property
    def mesh(self):
        return self.u.mesh

    @property
    def converged(self):
        return True

    def to_dict(self):
        return {
            "branch": self.branch,
            "lambda": self.params.lam,
            "p": self.params.p,
            "mesh": self.mesh.descriptor(),
            "functionals": self.functionals.to_dict(),
            "nehari_action": self.nehari_action,
            "residual_norm": self.residual_norm,
            "newton_iters": self.newton_iters,
            "min_value": float(self.u.values.min()),
            "max_value": float(self.u.values.max()),
            "peaks": [pk.to_dict() for pk in self.peaks],
        }


@dataclass(eq=False)
class PeakedRecord:
    record: SolutionRecord
    ansatz: DiscreteFunction
    correction_norm: float
    residual_R_norm: float
    requested: list

    @property
    def ansatz_norm(self):
        return math.sqrt(lambda_norm_sq(self.ansatz, self.record.params.lam))

    def to_dict(self):
        d = self.record.to_dict()
        d.update(
            requested_peaks=list(self.requested),
            correction_norm=self.correction_norm,
            residual_R_norm=self.residual_R_norm,
            ansatz_lambda_norm=self.ansatz_norm,
        )
        return d


# -- linear Kirchhoff problem ------------------------------------------------

def _factor(mesh, lam):
    ops = operators(mesh)
    key = ("lu", lam)
    lu = ops._shifted.get(key)
    if lu is None:
        try:
            lu = splu(ops.shifted(lam))
        except RuntimeError as exc:
            raise SingularSystem(str(exc)) from None
        ops._shifted[key] = lu
    return lu


def linear_kirchhoff_solve(mesh, lam, f):
    """Discrete i*_lam: solve (K + lam M) u = M f, or = f for a raw dual vector."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if isinstance(f, DiscreteFunction):
        rhs = operators(mesh).M @ f.values
    else:
        rhs = np.asarray(f, dtype=float)
    u = _factor(mesh, lam).solve(rhs)
    if not np.all(np.isfinite(u)):
        raise SingularSystem("non-finite solution of the Kirchhoff system")
    return DiscreteFunction(mesh, u)


def dual_norm(mesh, lam, g):
    """||i*_lam g||_lam for a dual vector g, i.e. sqrt(g^T (K + lam M)^-1 g)."""
    z = _factor(mesh, lam).solve(g)
    return math.sqrt(max(float(g @ z), 0.0))


# -- Newton -----------------------------------------------------------------

def classify(u, params, tag=None):
    v = u.values
    top = float(np.max(np.abs(v))) if v.size else 0.0
    if top <= 1e-12 * max(1.0, params.constant_level):
        return "trivial"
    if np.ptp(v) <= 1e-8 * top:
        return "constant"
    return tag or "nonconstant"


def finish_record(u, params, res, iters, tag):
    branch = classify(u, params, tag)
    rep = report(u, params)
    J = None
    if branch != "trivial":
        try:
            J = nehari_action(u, params)
        except QGError:
            J = None
    peaks = analysis.find_peaks(u) if branch != "trivial" else []
    return SolutionRecord(params, u, rep, res, iters, branch, peaks, J)


def newton_solve(mesh, params, u0, config=SolverConfig(), tag=None):
    """Damped Newton on the discrete gradient with Armijo backtracking.

    The merit function is half the squared dual lambda-norm of the gradient.
    """
    lam = params.lam
    u = u0 if isinstance(u0, DiscreteFunction) else DiscreteFunction(mesh, u0)
    v = u.values.copy()
    tol = config.newton_tol

    def merit(vals):
        g = gradient(DiscreteFunction(mesh, vals), params)
        r = dual_norm(mesh, lam, g)
        return g, r

    g, res = merit(v)
    for it in range(config.newton_max_iter + 1):
        unorm = math.sqrt(max(lambda_norm_sq(DiscreteFunction(mesh, v), lam), 0.0))
        if res <= tol * (1.0 + unorm):
            return finish_record(DiscreteFunction(mesh, v), params, res, it, tag)
        if it == config.newton_max_iter:
            break
        H = hessian(DiscreteFunction(mesh, v), params)
        try:
            step = splu(H).solve(-g)
        except RuntimeError as exc:
            raise SingularHessian(f"Hessian factorization failed at iteration {it}: {exc}") from None
        if not np.all(np.isfinite(step)):
            raise SingularHessian(f"non-finite Newton step at iteration {it}")
        t = 1.0
        phi0 = 0.5 * res * res
        while True:
            g_new, r_new = merit(v + t * step)
            # Newton direction gives d(phi)/dt = -2 phi at t = 0
            if 0.5 * r_new * r_new <= (1.0 - 2e-4 * t) * phi0 or r_new <= tol * (1.0 + unorm):
                break
            t *= 0.5
            if t < 1e-10:
                raise NoConvergence(it, res, f"line search failed at iteration {it} (residual {res:.3e})")
        v = v + t * step
        g, res = g_new, r_new
        log.debug("newton it=%d step=%.3g residual=%.3e", it, t, res)
    raise NoConvergence(config.newton_max_iter, res)


# -- least action -----------------------------------------------------------

def gradient_flow(u, params, config=SolverConfig()):
    """Nehari-projected descent along the Sobolev gradient i*(G(u)).

    Stops when the relative decrease of J on the manifold drops below
    ``gradient_flow_tol``. Returns the projected state and iteration count.
    """
    mesh, lam = u.mesh, params.lam
    u = nehari_project(u, params)
    J = nehari_action(u, params)
    tau = config.gradient_flow_step
    for it in range(config.gradient_flow_max_iter):
        sob = linear_kirchhoff_solve(mesh, lam, gradient(u, params))
        trial = nehari_project(u - tau * sob, params)
        J_new = nehari_action(trial, params)
        if J_new > J:
            tau *= 0.5
            if tau < 1e-8:
                break
            continue
        done = (J - J_new) <= config.gradient_flow_tol * abs(J)
        u, J = trial, J_new
        if done:
            return u, it + 1
    return u, config.gradient_flow_max_iter


def random_bump(mesh, params, rng):
    """Rescaled soliton centred at a random point of a random edge."""
    g = mesh.graph
    k = int(rng.integers(len(g.edges)))
    x0 = float(rng.uniform(0.0, g.edges[k].length))
    vals = np.zeros(mesh.ndof)
    x = mesh.edge_x(k)
    vals[mesh.edge_dofs[k]] = rescaled_soliton(params.p, params.lam, np.abs(x - x0))
    return DiscreteFunction(mesh, vals)


def default_peak_vertex(g):
    """Terminal vertex on the longest terminal edge (first in input order on ties)."""
    term = terminal_vertices(g)
    if not term:
        return None
    return max(term, key=lambda ve: g.edge(ve[1]).length)[0]


def least_action_solve(g, params, config=SolverConfig(), mesh=None, init=None):
    mesh = mesh or build_mesh(g, config.h_target(params.lam))
    rng = np.random.default_rng(config.random_seed)
    const_J = constant_branch_action(params, total_length(g))
    if init is None:
        v = default_peak_vertex(g)
        if v is not None:
            init = build_ansatz(mesh, PeakSpec.at([v], params.lam), params.p)
        else:
            init = random_bump(mesh, params, rng)
    seen_constant = False
    last_error = None
    best = None
    for attempt in range(config.max_restarts + 1):
        if attempt > 0:
            init = random_bump(mesh, params, rng)
        try:
            u, _ = gradient_flow(init, params, config)
            rec = newton_solve(mesh, params, u, config, tag="least_action")
        except (NoConvergence, SingularHessian, NoPositivePart) as exc:
            last_error = exc
            log.info("least-action attempt %d failed: %s", attempt, exc)
            continue
        if rec.branch in ("trivial", "constant") or (
            rec.nehari_action is not None and abs(rec.nehari_action - const_J) <= 1e-6 * const_J
        ):
            seen_constant = True
            continue
        if best is None or rec.nehari_action < best.nehari_action:
            best = rec
        break
    if best is not None:
        return best
    if seen_constant:
        raise OnlyConstantBranchFound(
            f"only the constant branch found at lambda={params.lam} after {config.max_restarts} restarts"
        )
    raise last_error


# -- peaked solutions -------------------------------------------------------

def peak_vertex_set(peaks):
    return {pk.vertex for pk in peaks if pk.is_vertex}, [pk for pk in peaks if not pk.is_vertex]


def peaked_solve(g, params, peaks, config=SolverConfig(), mesh=None, init=None):
    if not isinstance(peaks, PeakSpec):
        peaks = PeakSpec.at(peaks, params.lam)
    elif peaks.lam != params.lam:
        peaks = replace(peaks, lam=params.lam)
    mesh = mesh or build_mesh(g, config.h_target(params.lam))
    W = build_ansatz(mesh, peaks, params.p)
    k = len(peaks.peaks)
    rec = newton_solve(mesh, params, W if init is None else init, config, tag=f"peaked({k})")
    found, interior = peak_vertex_set(rec.peaks)
    requested = set(peaks.vertices)
    if found != requested or interior:
        raise PeakSetMismatch(requested, list(found) + [f"{pk.edge}@{pk.x:.6g}" for pk in interior])
    lam = params.lam
    phi = rec.u - W
    V = linear_kirchhoff_solve(mesh, lam, nonlinear_load(W, params.p))
    return PeakedRecord(
        record=rec,
        ansatz=W,
        correction_norm=math.sqrt(max(lambda_norm_sq(phi, lam), 0.0)),
        residual_R_norm=math.sqrt(max(lambda_norm_sq(V - W, lam), 0.0)),
        requested=list(peaks.vertices),
    )


# -- sweeps -----------------------------------------------------------------

def _solve_one(g, lam, p, mode, config, peaks, init):
    params = ProblemParams(lam, p)
    mesh = build_mesh(g, config.h_target(lam))
    if init is not None:
        init = resample(init, mesh)
    if mode == "least_action":
        return least_action_solve(g, params, config, mesh=mesh, init=init)
    return peaked_solve(g, params, peaks, config, mesh=mesh, init=init)


def continuation_sweep(g, p, lams, mode="least_action", config=SolverConfig(), peaks=None,
                       warm_start=True, workers=1):
    """Solve along an ascending list of frequencies.

    With ``warm_start`` each solve starts from the previous solution scaled
    in amplitude by (lam_next/lam)^(1/(p-1)) and re-interpolated on the new
    mesh. Without it, points are independent and may run on ``workers``
    threads. A PeakSetMismatch aborts the rest of the branch.
    """
    lams = [float(x) for x in lams]
    if len(lams) < 3:
        raise ValueError("a sweep needs at least 3 lambda values")
    if any(b <= a for a, b in zip(lams, lams[1:])) or lams[0] <= 0:
        raise ValueError("lambda values must be positive and strictly ascending")
    if mode not in ("least_action", "peaked"):
        raise ValueError(f"unknown sweep mode {mode!r}")
    if mode == "peaked" and peaks is None:
        raise ValueError("peaked sweeps need a peak specification")
    peak_vertices = None
    if mode == "peaked":
        peak_vertices = peaks.vertices if isinstance(peaks, PeakSpec) else list(peaks)

    def spec_for(lam):
        if peak_vertices is None:
            return None
        if isinstance(peaks, PeakSpec):
            return replace(peaks, lam=lam)
        return PeakSpec.at(peak_vertices, lam)

    entries = []
    if not warm_start:
        def job(lam):
            try:
                return {"lambda": lam, "status": "ok",
                        "result": _solve_one(g, lam, p, mode, config, spec_for(lam), None)}
            except QGError as exc:
                return {"lambda": lam, "status": "error", "error": exc.to_dict()}

        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            entries = list(pool.map(job, lams))
        return analysis.SweepReport(p=p, mode=mode, entries=entries, peaks=peak_vertices)

    prev, prev_lam, aborted = None, None, False
    for lam in lams:
        if aborted:
            entries.append({"lambda": lam, "status": "skipped"})
            continue
        init = None
        if prev is not None:
            init = prev * (lam / prev_lam) ** (1.0 / (p - 1))
        try:
            res = _solve_one(g, lam, p, mode, config, spec_for(lam), init)
        except PeakSetMismatch as exc:
            entries.append({"lambda": lam, "status": "error", "error": exc.to_dict()})
            aborted = True
            continue
        except QGError as exc:
            entries.append({"lambda": lam, "status": "error", "error": exc.to_dict()})
            prev = None
            continue
        entries.append({"lambda": lam, "status": "ok", "result": res})
        rec = res.record if isinstance(res, PeakedRecord) else res
        prev, prev_lam = rec.u, lam
    return analysis.SweepReport(p=p, mode=mode, entries=entries, peaks=peak_vertices)
