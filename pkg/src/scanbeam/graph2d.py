"""Coupling graphs of planar scans.

In the plane every frequency point couples to at most two partners, so the
coupling relation decomposes the coupled region into tiny connected
components: a path of two vertices, a star of three, a path of four, or a
closed cycle of four. The component shape decides everything downstream; a
cycle carries a one-dimensional null space (an explicit non-uniqueness
direction), while a two-vertex path anchored at a directly recoverable
vertex propagates values to its partner.

Vertices are named relative to the query anchor ``y = eta - sigma``:

* ``z1 = eta - H sigma`` (always the first partner),
* ``z2 = H eta - sigma``,
* ``z3 = H eta - H sigma``,

with ``H`` the scan reflection. Which of them exist, and which case of the
classification fires, is decided by strict half-space conditions evaluated
over every representation of every component vertex; the breadth-first
search over partner sets is kept as the independent ground truth and the
two must agree.
"""

from __future__ import annotations

import dataclasses
import enum

import numpy as np

from .coupling_sets import membership_flags, sphere_pair_representations
from .errors import (
    DegenerateVertex,
    DimensionMismatch,
    EmptyCouplingSet,
    InconsistentComponent,
)
from .geometry import SigmaClass, classify_sigma, hemisphere_contains, householder_reflect

#: Quantization pitch (relative to k0) for identifying equal vertices.
VERTEX_QUANTUM_RTOL = 1e-9

#: Margin (relative to k0) under which a case condition counts as ambiguous.
BOUNDARY_RTOL = 1e-9


class ComponentShape(enum.Enum):
    TWO_VERTEX_PATH = "two_vertex_path"
    THREE_VERTEX_STAR = "three_vertex_star"
    FOUR_VERTEX_PATH = "four_vertex_path"
    FOUR_VERTEX_CYCLE = "four_vertex_cycle"


_SHAPE_BY_COUNTS = {
    (2, 1): ComponentShape.TWO_VERTEX_PATH,
    (3, 2): ComponentShape.THREE_VERTEX_STAR,
    (4, 3): ComponentShape.FOUR_VERTEX_PATH,
    (4, 4): ComponentShape.FOUR_VERTEX_CYCLE,
}

_SHAPE_BY_CASE = {
    1: ComponentShape.TWO_VERTEX_PATH,
    2: ComponentShape.THREE_VERTEX_STAR,
    3: ComponentShape.FOUR_VERTEX_PATH,
    4: ComponentShape.FOUR_VERTEX_CYCLE,
}


@dataclasses.dataclass(frozen=True)
class Edge:
    """One coupling equation ``b(sigma) g(v_i) + g(v_j) = 0``.

    ``(eta, sigma)`` is the generating representation: ``v_i = eta - sigma``
    and ``v_j = eta - H sigma``. The reverse orientation would carry the
    reciprocal coupling value and describes the same constraint.
    """

    i: int
    j: int
    eta: np.ndarray
    sigma: np.ndarray


@dataclasses.dataclass(frozen=True)
class Component:
    """A connected component of the coupling graph.

    ``vertices`` are ordered ``(y, z1, z2, z3)`` restricted to the ones
    present. ``case_fired`` is the classification case (1 to 4) that some
    representation of some vertex satisfies; ``case_rep`` is that firing
    representation. ``boundary`` marks components whose conditions sit
    within tolerance of a decision boundary, with the candidate shapes
    listed.
    """

    vertices: tuple
    edges: tuple
    shape: ComponentShape
    anchor: tuple
    case_fired: int
    case_rep: tuple
    boundary: bool = False
    candidate_shapes: tuple = ()


def _quantize(cfg, p):
    pitch = VERTEX_QUANTUM_RTOL * cfg.k0
    return (int(round(p[0] / pitch)), int(round(p[1] / pitch)))


def neighbors2d(cfg, y):
    """Partner frequencies of ``y``, with their generating representations.

    Returns a list of ``(z, eta, sigma)`` with ``y = eta - sigma`` a coupled
    representation and ``z = eta - H sigma`` the partner it produces.

    Raises
    ------
    EmptyCouplingSet
        If ``y`` has no coupled representation.
    """
    if cfg.d != 2:
        raise DimensionMismatch("coupling graphs are a planar construction")
    y = np.asarray(y, dtype=float)
    out = []
    for eta, sigma, cls in sphere_pair_representations(cfg, y):
        if cls is not SigmaClass.SIGMA2:
            continue
        z = eta - householder_reflect(cfg.nu, sigma)
        out.append((z, eta, sigma))
    if not out:
        raise EmptyCouplingSet("the point has no coupled representation")
    return out


def _case_conditions(cfg, eta, sigma):
    """The strict conditions of the component classification at one
    representation, plus the smallest decision margin encountered."""
    tolk = cfg.membership_tol
    h_eta = householder_reflect(cfg.nu, eta)
    h_sigma = householder_reflect(cfg.nu, sigma)
    minus_eta_margins = (
        float(np.dot(-eta, cfg.omega)),
        float(np.dot(householder_reflect(cfg.nu, -eta), cfg.omega)),
    )
    eta_in_minus_coupled = classify_sigma(cfg, -eta) is SigmaClass.SIGMA2
    h_eta_on_receiver = hemisphere_contains(cfg, cfg.e_last, h_eta)
    sigma_descending = sigma[1] < -tolk
    h_sigma_descending = h_sigma[1] < -tolk
    margin = min(
        abs(minus_eta_margins[0]),
        abs(minus_eta_margins[1]),
        abs(eta[1]),
        abs(h_eta[1]),
        abs(sigma[1]),
        abs(h_sigma[1]),
    )
    return (eta_in_minus_coupled, h_eta_on_receiver, sigma_descending, h_sigma_descending), margin


def _fired_case(conds):
    eta_minus, h_eta_up, sig_down, h_sig_down = conds
    if eta_minus and sig_down:
        if h_eta_up and h_sig_down:
            return 4
        if not h_eta_up:
            return 3 if h_sig_down else 2
    return None


def build_component(cfg, y):
    """Connected component of the coupling graph through ``y``.

    The component is discovered by breadth-first search over partner sets,
    its shape read off the vertex and edge counts, and independently
    classified by the case conditions over all representations of all
    vertices. Disagreement between the two routes raises
    :class:`InconsistentComponent` unless a condition sits within tolerance
    of its boundary, in which case the component is flagged instead.

    Raises
    ------
    DegenerateVertex
        If ``y`` is uncoupled or sits on one of the excluded sets.
    """
    if cfg.d != 2:
        raise DimensionMismatch("coupling graphs are a planar construction")
    y = np.asarray(y, dtype=float)
    flags = membership_flags(cfg, y)
    if not flags.in_y2:
        raise DegenerateVertex("the point has no coupled representation")
    if not flags.nondegenerate:
        raise DegenerateVertex("the point sits on an excluded degenerate set")

    # breadth-first search over partner sets
    keys = {_quantize(cfg, y): 0}
    points = [y]
    adjacency = {}
    queue = [0]
    while queue:
        idx = queue.pop(0)
        try:
            partners = neighbors2d(cfg, points[idx])
        except EmptyCouplingSet:
            continue
        for z, eta, sigma in partners:
            key = _quantize(cfg, z)
            if key not in keys:
                if len(points) >= 4:
                    raise InconsistentComponent("component exceeded four vertices")
                keys[key] = len(points)
                points.append(z)
                queue.append(keys[key])
            pair = (min(idx, keys[key]), max(idx, keys[key]))
            if pair[0] == pair[1]:
                raise DegenerateVertex("self-coupled vertex (fixed-line representation)")
            if pair not in adjacency:
                adjacency[pair] = (idx, keys[key], eta, sigma)

    # canonical vertex order relative to a deterministic anchor choice
    anchor_reps = sorted(
        (
            (eta, sigma)
            for eta, sigma, cls in sphere_pair_representations(cfg, y)
            if cls is SigmaClass.SIGMA2
        ),
        key=lambda r: (round(r[1][0], 12), round(r[1][1], 12)),
    )
    eta0, sigma0 = anchor_reps[0]
    h_eta0 = householder_reflect(cfg.nu, eta0)
    h_sigma0 = householder_reflect(cfg.nu, sigma0)
    named = [y, eta0 - h_sigma0, h_eta0 - sigma0, h_eta0 - h_sigma0]
    order = []
    seen = set()
    for p in named:
        key = _quantize(cfg, p)
        if key in keys and key not in seen:
            order.append(keys[key])
            seen.add(key)
    if len(order) != len(points):
        raise InconsistentComponent("vertices found by search do not match the anchor naming")
    rank = {old: new for new, old in enumerate(order)}
    vertices = tuple(points[old] for old in order)
    edges = tuple(
        Edge(i=rank[i0], j=rank[j0], eta=eta, sigma=sigma)
        for (i0, j0, eta, sigma) in adjacency.values()
    )

    counts = (len(vertices), len(edges))
    if counts not in _SHAPE_BY_COUNTS:
        raise InconsistentComponent(f"impossible component with {counts[0]} vertices, {counts[1]} edges")
    shape = _SHAPE_BY_COUNTS[counts]

    # classification route: the case conditions over every representation
    fired = {}
    min_margin = np.inf
    for v in vertices:
        for eta, sigma, cls in sphere_pair_representations(cfg, v):
            if cls is not SigmaClass.SIGMA2:
                continue
            conds, margin = _case_conditions(cfg, eta, sigma)
            min_margin = min(min_margin, margin)
            case = _fired_case(conds)
            if case is not None and case not in fired:
                fired[case] = (eta, sigma)
    boundary = min_margin <= BOUNDARY_RTOL * cfg.k0
    if len(fired) > 1:
        if boundary:
            candidates = tuple(sorted({_SHAPE_BY_CASE[c].value for c in fired}))
            return Component(
                vertices=vertices,
                edges=edges,
                shape=shape,
                anchor=(eta0, sigma0),
                case_fired=max(fired),
                case_rep=fired[max(fired)],
                boundary=True,
                candidate_shapes=candidates,
            )
        raise InconsistentComponent(f"multiple classification cases fired: {sorted(fired)}")
    case = next(iter(fired)) if fired else 1
    case_rep = fired.get(case, (eta0, sigma0))
    if _SHAPE_BY_CASE[case] is not shape:
        if boundary:
            candidates = tuple(sorted({shape.value, _SHAPE_BY_CASE[case].value}))
            return Component(
                vertices=vertices,
                edges=edges,
                shape=shape,
                anchor=(eta0, sigma0),
                case_fired=case,
                case_rep=case_rep,
                boundary=True,
                candidate_shapes=candidates,
            )
        raise InconsistentComponent(
            f"search found {shape.value} but case {case} fired"
        )
    return Component(
        vertices=vertices,
        edges=edges,
        shape=shape,
        anchor=(eta0, sigma0),
        case_fired=case,
        case_rep=case_rep,
        boundary=boundary,
        candidate_shapes=(shape.value,) if boundary else (),
    )


# --------------------------------------------------------------------------
# linear systems on components


def nullspace_by_elimination(matrix, rel_tol=1e-10):
    """Null-space basis by complex Gaussian elimination with partial pivoting.

    Free columns seed the basis vectors; each returned vector is normalized
    so its first nonzero entry equals one. Written out explicitly (rather
    than through a factorization library) so the tiny component systems stay
    inspectable; tests cross-check against an SVD-based null space.
    """
    a = np.array(matrix, dtype=complex)
    if a.ndim != 2:
        raise ValueError("matrix must be two-dimensional")
    m, n = a.shape
    tol = rel_tol * max(1.0, float(np.max(np.abs(a))) if a.size else 0.0)
    pivots = []
    row = 0
    for col in range(n):
        if row >= m:
            break
        p = int(np.argmax(np.abs(a[row:, col]))) + row
        if abs(a[p, col]) <= tol:
            continue
        if p != row:
            a[[row, p]] = a[[p, row]]
        a[row] = a[row] / a[row, col]
        for r in range(m):
            if r != row and a[r, col] != 0:
                a[r] = a[r] - a[r, col] * a[row]
        pivots.append(col)
        row += 1
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for fc in free:
        v = np.zeros(n, dtype=complex)
        v[fc] = 1.0
        for r, pc in enumerate(pivots):
            v[pc] = -a[r, fc]
        first = next(idx for idx in range(n) if v[idx] != 0)
        v = v / v[first]
        v[first] = 1.0
        basis.append(v)
    return basis


@dataclasses.dataclass(frozen=True)
class ComponentSystem:
    """The linear system a component imposes on the unknown values.

    One row per edge, two nonzero entries per row: the coupling value at the
    generating direction against the ``v_i`` unknown and one against
    ``v_j``. ``rhs`` is populated when a measurement source is supplied,
    dividing each measured value by the density at the reflected direction.
    """

    component: Component
    matrix: np.ndarray
    kernel: tuple
    rhs: np.ndarray | None = None


def component_system(cfg, component, bc, source=None):
    """Assemble the coupling equations of a component.

    Parameters
    ----------
    bc : CouplingCoefficient
        Supplies the coupling values (and the density for scaling
        measurements).
    source : callable, optional
        Measurement map ``(eta, sigma) -> complex``; when given, the
        returned system carries the inhomogeneous right-hand side.
    """
    n = len(component.vertices)
    m = len(component.edges)
    matrix = np.zeros((m, n), dtype=complex)
    rhs = np.zeros(m, dtype=complex) if source is not None else None
    for r, e in enumerate(component.edges):
        matrix[r, e.i] += bc(e.sigma)
        matrix[r, e.j] += 1.0
        if source is not None:
            h_sigma = householder_reflect(cfg.nu, e.sigma)
            rhs[r] = source(e.eta, e.sigma) / bc.density(h_sigma)
    kernel = tuple(nullspace_by_elimination(matrix))
    if matrix.size:
        matrix.flags.writeable = False
    return ComponentSystem(component=component, matrix=matrix, kernel=kernel, rhs=rhs)


def cycle_kernel_values(cfg, bc, component):
    """Closed-form null-space values on a four-cycle, keyed by vertex index.

    At the case-4 representation ``(eta, sigma)`` the null direction takes
    value 1 at ``eta - sigma``, ``-b(sigma)`` at ``eta - H sigma``,
    ``-b(-eta)`` at ``H eta - sigma`` and ``b(sigma) b(-eta)`` at
    ``H eta - H sigma``.
    """
    if component.shape is not ComponentShape.FOUR_VERTEX_CYCLE:
        raise InconsistentComponent("closed-form null values exist on four-cycles only")
    eta, sigma = component.case_rep
    h_eta = householder_reflect(cfg.nu, eta)
    h_sigma = householder_reflect(cfg.nu, sigma)
    b_sigma = bc(sigma)
    b_minus_eta = bc(-eta)
    spots = [
        (eta - sigma, 1.0 + 0.0j),
        (eta - h_sigma, -b_sigma),
        (h_eta - sigma, -b_minus_eta),
        (h_eta - h_sigma, b_sigma * b_minus_eta),
    ]
    keyed = {_quantize(cfg, p): val for p, val in spots}
    values = {}
    for idx, v in enumerate(component.vertices):
        key = _quantize(cfg, v)
        if key not in keyed:
            raise InconsistentComponent("cycle vertices do not match the firing representation")
        values[idx] = keyed[key]
    return values


def unique_vertices(cfg, component):
    """Indices of component vertices that are directly recoverable.

    A directly recoverable vertex forces the component to be a two-vertex
    path; anything else violates the structure theory and raises
    :class:`InconsistentComponent`.
    """
    out = tuple(
        idx
        for idx, v in enumerate(component.vertices)
        if membership_flags(cfg, v).in_y1
    )
    if out and component.shape is not ComponentShape.TWO_VERTEX_PATH:
        raise InconsistentComponent(
            "a directly recoverable vertex appeared in a component with more than two vertices"
        )
    return out
