"""Post-processing of solutions: peaks, profile comparison, decay and scaling fits."""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EdgeNotTerminal, GraphError, InsufficientData, NonPositiveSamples
from .graph import EdgeCoordinate, vertex_end
from .profiles import distance_from, m_infinity, rescaled_soliton

PEAK_FLOOR = 1e-8


@dataclass(frozen=True)
class PeakInfo:
    location: EdgeCoordinate
    value: float
    is_vertex: bool
    vertex: str = None

    @property
    def edge(self):
        return self.location.edge

    @property
    def x(self):
        return self.location.x

    def to_dict(self):
        return {"edge": self.edge, "x": self.x, "value": self.value,
                "is_vertex": self.is_vertex, "vertex": self.vertex}


@dataclass(frozen=True)
class DecayFit:
    c1: float
    c2: float
    fit_window: tuple
    r_squared: float


def _dof_locations(mesh):
    """dof -> (edge id, x), vertices located on their first incident edge."""
    g = mesh.graph
    loc = [None] * mesh.ndof
    for k, e in enumerate(g.edges):
        for dof, x in zip(mesh.edge_dofs[k], mesh.edge_x(k)):
            if loc[dof] is None:
                loc[dof] = (e.id, float(x))
    return loc


def find_peaks(u):
    """Strict nodal local maxima, sorted by value, ignoring tiny ones."""
    m = u.mesh
    v = u.values
    top = float(v.max())
    if not top > 0:
        return []
    # a one-cell self-loop joins a vertex to itself; skip that comparison
    ei, ej = m.elem_i, m.elem_j
    keep = ei != ej
    ei, ej = ei[keep], ej[keep]
    nb_max = np.full(m.ndof, -np.inf)
    np.maximum.at(nb_max, ei, v[ej])
    np.maximum.at(nb_max, ej, v[ei])
    cand = np.nonzero((v > nb_max) & (v > PEAK_FLOOR * top))[0]
    nv = len(m.graph.vertices)
    loc = _dof_locations(m)
    out = []
    for dof in sorted(cand, key=lambda d: (-v[d], d)):
        eid, x = loc[dof]
        is_v = dof < nv
        out.append(PeakInfo(EdgeCoordinate(eid, x), float(v[dof]), bool(is_v),
                            m.graph.vertices[dof] if is_v else None))
    return out


def _terminal_vertex(u, terminal):
    """Resolve ``terminal`` (a vertex or edge id) to (vertex, edge id)."""
    g = u.mesh.graph
    if terminal in g.vertex_index:
        i = g.vertex_index[terminal]
        if len(g.adjacency[i]) != 1:
            raise EdgeNotTerminal(f"vertex {terminal!r} has degree {len(g.adjacency[i])}")
        return terminal, g.edges[g.adjacency[i][0][0]].id
    if terminal in g.edge_index:
        e = g.edge(terminal)
        ends = [g.vertices[j] for j in (e.a, e.b) if len(g.adjacency[j]) == 1]
        if not ends:
            raise EdgeNotTerminal(f"edge {terminal!r} has no degree-1 endpoint")
        # two terminal ends: use the one carrying the larger value
        best = max(ends, key=lambda vid: u.values[g.vertex_index[vid]])
        return best, terminal
    raise GraphError(f"unknown vertex or edge {terminal!r}")


def profile_error(u, params, terminal):
    """lam^(1/(1-p)) max_{[0, l/2]} |u - lam^(1/(p-1)) U(sqrt(lam) x)|, x from the terminal vertex."""
    g = u.mesh.graph
    v, eid = _terminal_vertex(u, terminal)
    k = g.edge_index[eid]
    s = distance_from(g, v, eid, u.mesh.edge_x(k))
    vals = u.on_edge(k)
    sel = s <= 0.5 * g.edge(eid).length * (1 + 1e-12)
    lam, p = params.lam, params.p
    diff = np.abs(vals[sel] - rescaled_soliton(p, lam, s[sel]))
    return float(lam ** (1.0 / (1.0 - p)) * diff.max())


def decay_fit(u, edge, window, lam, p=None, from_vertex=None):
    """Fit log u = log(c1 lam^(1/(p-1))) - c2 sqrt(lam) x on a window.

    ``x`` is the distance from ``from_vertex`` (default: the edge's first
    endpoint). The returned rate c2 is normalized by sqrt(lam).
    """
    m = u.mesh
    g = m.graph
    k = g.edge_index[edge]
    e = g.edges[k]
    if from_vertex is None:
        from_vertex = g.vertices[e.a]
    vertex_end(g, from_vertex, edge)
    lo, hi = float(window[0]), float(window[1])
    if not 0 <= lo < hi <= e.length * (1 + 1e-12):
        raise ValueError(f"window {window} not inside [0, {e.length}]")
    s = distance_from(g, from_vertex, edge, m.edge_x(k))
    vals = u.on_edge(k)
    tol = 1e-12 * e.length
    sel = (s >= lo - tol) & (s <= hi + tol)
    if sel.sum() < 6:
        raise ValueError("decay window must span at least 5 mesh cells")
    xs, ys = s[sel], vals[sel]
    if np.any(ys <= 0):
        raise NonPositiveSamples(f"{int((ys <= 0).sum())} non-positive samples in window")
    logy = np.log(ys)
    slope, icpt = np.polyfit(xs, logy, 1)
    fitted = slope * xs + icpt
    ss_res = float(np.sum((logy - fitted) ** 2))
    ss_tot = float(np.sum((logy - logy.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    amp = math.exp(icpt)
    if p is not None:
        amp /= lam ** (1.0 / (p - 1))
    return DecayFit(c1=amp, c2=-slope / math.sqrt(lam), fit_window=(lo, hi), r_squared=r2)


def loglog_slope(x, y):
    """Least-squares slope of log y against log x, with r^2."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if len(x) < 3:
        raise InsufficientData(f"need at least 3 points, got {len(x)}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise InsufficientData("log-log fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    slope, icpt = np.polyfit(lx, ly, 1)
    res = ly - (slope * lx + icpt)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(res ** 2)) / ss_tot
    return float(slope), r2


def action_gap(record, p=None):
    p = record.params.p if p is None else p
    return record.nehari_action - m_infinity(p)


SWEEP_COLUMNS = ["lambda", "status", "J", "mass_sq", "peak_vertex", "profile_error",
                 "c2_hat", "correction_norm", "residual_R"]


@dataclass
class SweepReport:
    p: float
    mode: str
    entries: list = field(default_factory=list)
    peaks: list = None

    def __post_init__(self):
        lams = [e["lambda"] for e in self.entries]
        if any(b <= a for a, b in zip(lams, lams[1:])):
            raise ValueError("sweep lambdas must be strictly ascending")

    @staticmethod
    def _record(entry):
        res = entry.get("result")
        return getattr(res, "record", res)

    def ok(self):
        return [e for e in self.entries if e["status"] == "ok"]

    @property
    def lambdas(self):
        return [e["lambda"] for e in self.entries]

    def observable(self, name):
        """(lambdas, values) over successful entries that carry ``name``."""
        xs, ys = [], []
        for e in self.ok():
            res, rec = e["result"], self._record(e)
            if name == "mass_sq":
                val = rec.functionals.mass_sq
            elif name in ("J", "action", "nehari_action"):
                val = rec.nehari_action
            elif name == "correction_norm":
                val = getattr(res, "correction_norm", None)
            elif name in ("residual_R", "residual_R_norm"):
                val = getattr(res, "residual_R_norm", None)
            else:
                raise ValueError(f"unknown observable {name!r}")
            if val is not None:
                xs.append(e["lambda"])
                ys.append(val)
        return xs, ys

    @property
    def action_values(self):
        return self.observable("J")[1]

    @property
    def mass_exponent(self):
        return fit_scaling(self, "mass_sq")[0]

    def row(self, entry):
        row = dict.fromkeys(SWEEP_COLUMNS, "")
        row["lambda"] = entry["lambda"]
        row["status"] = entry["status"]
        if entry["status"] != "ok":
            return row
        res, rec = entry["result"], self._record(entry)
        row["J"] = rec.nehari_action
        row["mass_sq"] = rec.functionals.mass_sq
        top = rec.peaks[0] if rec.peaks else None
        g = rec.mesh.graph
        if top is not None and top.is_vertex and g.degree(top.vertex) == 1:
            row["peak_vertex"] = top.vertex
            row["profile_error"] = profile_error(rec.u, rec.params, top.vertex)
            eid = g.edges[g.adjacency[g.vertex_index[top.vertex]][0][0]].id
            length = g.edge(eid).length
            try:
                fit = decay_fit(rec.u, eid, (length / 4, 3 * length / 8), rec.params.lam,
                                rec.params.p, from_vertex=top.vertex)
                row["c2_hat"] = fit.c2
            except (NonPositiveSamples, ValueError):
                pass
        elif top is not None:
            row["peak_vertex"] = top.vertex or f"{top.edge}@{top.x!r}"
        if hasattr(res, "correction_norm"):
            row["correction_norm"] = res.correction_norm
            row["residual_R"] = res.residual_R_norm
        return row

    def rows(self):
        return [self.row(e) for e in self.entries]

    def fits(self):
        out = {}
        for name in ("mass_sq", "correction_norm", "residual_R"):
            try:
                slope, r2 = fit_scaling(self, name)
                out[name] = {"slope": slope, "r_squared": r2}
            except InsufficientData:
                pass
        return out

    def to_dict(self):
        entries = []
        for e in self.entries:
            d = {"lambda": e["lambda"], "status": e["status"]}
            if e["status"] == "ok":
                d["record"] = e["result"].to_dict()
            elif "error" in e:
                d["error"] = e["error"]
            entries.append(d)
        return {"p": self.p, "mode": self.mode, "peaks": self.peaks,
                "entries": entries, "fits": self.fits()}

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SWEEP_COLUMNS)
            for row in self.rows():
                w.writerow([_cell(row[c]) for c in SWEEP_COLUMNS])
        return path

    def write_columns(self, directory):
        """Two-column whitespace data files, one per observable."""
        paths = []
        for name in ("J", "mass_sq", "correction_norm", "residual_R"):
            xs, ys = self.observable(name)
            if not xs:
                continue
            path = f"{directory}/{name}.dat"
            with open(path, "w") as fh:
                for x, y in zip(xs, ys):
                    fh.write(f"{x!r} {y!r}\n")
            paths.append(path)
        return paths


def _cell(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def fit_scaling(sweep, observable):
    xs, ys = sweep.observable(observable)
    if len(xs) < 3:
        raise InsufficientData(f"{observable}: {len(xs)} usable sweep entries, need 3")
    return loglog_slope(xs, ys)
