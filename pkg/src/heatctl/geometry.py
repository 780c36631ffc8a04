"""Observability sets and their geometric parameters.

Sets are unions of axis-aligned boxes, either tiled periodically by a cell
or stored as a finite family (equidistributed ball substitutes).  Keeping
everything box-shaped makes measures, window densities and Gram matrices
against a :class:`~heatctl.spectral.SpectralBasis` available in closed form.
"""

import hashlib
import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

_EPS = 1e-12


@dataclass(frozen=True)
class ThickParams:
    """Density ``gamma`` over windows of edge lengths ``a``."""

    gamma: float
    a: tuple

    def __post_init__(self):
        if not (0 < self.gamma <= 1):
            raise ParameterError("gamma must be in (0, 1]")
        a = tuple(float(x) for x in self.a)
        if any(x <= 0 for x in a):
            raise ParameterError("window lengths must be positive")
        object.__setattr__(self, "a", a)


@dataclass(frozen=True)
class EquidistributedSpec:
    """One ball of radius ``delta`` in every cube cell of side ``G``."""

    G: float
    delta: float
    seed: int = None
    mode: str = "uniform"
    centers: tuple = None

    def __post_init__(self):
        if self.G <= 0:
            raise ParameterError("G must be positive")
        if not (0 < self.delta < self.G / 2):
            raise ParameterError("delta must lie in (0, G/2)")
        if self.mode not in ("uniform", "centered"):
            raise ParameterError("mode must be 'uniform' or 'centered'")


def _merge_intervals(intervals):
    ivs = sorted((float(a), float(b)) for a, b in intervals if b - a > _EPS)
    out = []
    for a, b in ivs:
        if out and a <= out[-1][1] + _EPS:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def _canonicalize_boxes(boxes, cell):
    """Wrap boxes into [0, cell) per axis and merge overlaps exactly."""
    d = len(cell)
    pieces = []
    for box in boxes:
        if len(box) != d:
            raise ParameterError("box dimension does not match cell")
        axis_parts = []
        for (a, b), c in zip(box, cell):
            if b <= a:
                raise ParameterError("box has non-positive extent")
            if b - a >= c - _EPS:
                axis_parts.append([(0.0, c)])
                continue
            a_mod = a % c
            b_mod = a_mod + (b - a)
            if b_mod <= c + _EPS:
                axis_parts.append([(a_mod, min(b_mod, c))])
            else:
                axis_parts.append([(a_mod, c), (0.0, b_mod - c)])
        for combo in itertools.product(*axis_parts):
            pieces.append(tuple(combo))
    if d == 1:
        return tuple(((a, b),) for a, b in _merge_intervals([p[0] for p in pieces]))
    if d == 2:
        return _canonicalize_boxes_2d(pieces)
    raise ParameterError("box sets support dimensions 1 and 2 only")


def _canonicalize_boxes_2d(pieces):
    """Slab decomposition of a 2D box union into disjoint boxes."""
    xs = sorted({e for p in pieces for e in p[0]})
    out = []
    for x0, x1 in zip(xs[:-1], xs[1:]):
        if x1 - x0 <= _EPS:
            continue
        mid = 0.5 * (x0 + x1)
        ys = _merge_intervals([p[1] for p in pieces if p[0][0] <= mid <= p[0][1]])
        for y0, y1 in ys:
            out.append(((x0, x1), (y0, y1)))
    # coalesce x-adjacent slabs with identical y-interval
    out.sort(key=lambda b: (b[1], b[0]))
    merged = []
    for box in out:
        if merged and merged[-1][1] == box[1] and abs(merged[-1][0][1] - box[0][0]) <= _EPS:
            merged[-1] = ((merged[-1][0][0], box[0][1]), box[1])
        else:
            merged.append(box)
    return tuple(tuple(b) for b in merged)


@dataclass(frozen=True)
class ObservabilitySet:
    """Union of boxes, periodic under ``cell`` or a finite family.

    ``kind`` is one of ``full``, ``empty``, ``periodic_boxes``,
    ``equidistributed_balls``.  Periodic boxes are stored reduced modulo the
    cell and pairwise disjoint; equidistributed families store the inscribed
    boxes in absolute coordinates together with their generating data.
    """

    kind: str
    cell: tuple = None
    boxes: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("full", "empty", "periodic_boxes", "equidistributed_balls"):
            raise ParameterError(f"unknown set kind {self.kind!r}")
        if self.kind == "periodic_boxes":
            cell = tuple(float(c) for c in self.cell)
            if any(c <= 0 for c in cell):
                raise ParameterError("cell lengths must be positive")
            object.__setattr__(self, "cell", cell)
            object.__setattr__(self, "boxes", _canonicalize_boxes(self.boxes, cell))

    @property
    def dimension(self):
        if self.kind == "periodic_boxes":
            return len(self.cell)
        if self.boxes:
            return len(self.boxes[0])
        return None

    @classmethod
    def full(cls):
        return cls(kind="full")

    @classmethod
    def empty(cls):
        return cls(kind="empty")

    @classmethod
    def periodic(cls, cell, boxes):
        return cls(kind="periodic_boxes", cell=tuple(cell),
                   boxes=tuple(tuple(tuple(e) for e in b) for b in boxes))

    def union(self, other):
        if self.kind != "periodic_boxes" or other.kind != "periodic_boxes":
            raise ParameterError("union is defined for periodic box sets")
        if self.cell != other.cell:
            raise ParameterError("union requires matching cells")
        return ObservabilitySet.periodic(self.cell, self.boxes + other.boxes)

    def measure_per_cell(self):
        if self.kind != "periodic_boxes":
            raise ParameterError("per-cell measure needs a periodic set")
        return float(sum(np.prod([b - a for a, b in box]) for box in self.boxes))

    def density(self):
        if self.kind == "full":
            return 1.0
        if self.kind == "empty":
            return 0.0
        if self.kind == "periodic_boxes":
            return self.measure_per_cell() / float(np.prod(self.cell))
        raise ParameterError("density needs a periodic set")

    def boxes_in_region(self, region):
        """Disjoint absolute boxes covering ``S`` intersected with ``region``."""
        region = [(float(a), float(b)) for a, b in region]
        if self.kind == "empty":
            return []
        if self.kind == "full":
            return [tuple(region)]
        if self.kind == "equidistributed_balls":
            return _clip_boxes(self.boxes, region)
        out = []
        ranges = []
        for (lo, hi), c in zip(region, self.cell):
            ranges.append(range(int(np.floor(lo / c)), int(np.ceil(hi / c))))
        for j in itertools.product(*ranges):
            shift = [jj * c for jj, c in zip(j, self.cell)]
            shifted = [tuple((a + s, b + s) for (a, b), s in zip(box, shift))
                       for box in self.boxes]
            out.extend(_clip_boxes(shifted, region))
        return out

    def measure_in(self, region):
        return float(sum(np.prod([b - a for a, b in box])
                         for box in self.boxes_in_region(region)))

    def to_json(self):
        data = {"schema": "heatctl-set/1", "kind": self.kind}
        if self.kind == "periodic_boxes":
            data["cell"] = list(self.cell)
            data["boxes"] = [[list(e) for e in b] for b in self.boxes]
        if self.kind == "equidistributed_balls":
            data["boxes"] = [[list(e) for e in b] for b in self.boxes]
            data["meta"] = {k: v for k, v in sorted(self.meta.items())}
        return data

    @classmethod
    def from_json(cls, data):
        kind = data["kind"]
        if kind in ("full", "empty"):
            return cls(kind=kind)
        if kind == "periodic_boxes":
            return cls.periodic(data["cell"], data["boxes"])
        return cls(kind=kind,
                   boxes=tuple(tuple(tuple(e) for e in b) for b in data["boxes"]),
                   meta=dict(data.get("meta", {})))

    def descriptor_hash(self):
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _clip_boxes(boxes, region):
    out = []
    for box in boxes:
        clipped = []
        ok = True
        for (a, b), (lo, hi) in zip(box, region):
            a2, b2 = max(a, lo), min(b, hi)
            if b2 - a2 <= _EPS:
                ok = False
                break
            clipped.append((a2, b2))
        if ok:
            out.append(tuple(clipped))
    return out


def gram_matrix(basis, S):
    """Matrix of ``int_{S ∩ domain} phi_i phi_j`` for the basis modes.

    Entries come from closed-form trigonometric antiderivatives per box, so
    the result is exact up to rounding; eigenvalues lie in [0, 1].
    """
    if S.kind == "full":
        return np.eye(basis.n)
    if S.kind == "empty":
        return np.zeros((basis.n, basis.n))
    dom = basis.domain
    if S.dimension != dom.dimension:
        raise ParameterError("set dimension does not match the domain")
    if S.kind == "periodic_boxes" and dom.boundary == "periodic":
        for side, c in zip(dom.sides, S.cell):
            ratio = side / c
            if abs(ratio - round(ratio)) > 1e-9:
                raise ParameterError("set period does not tile the torus")
    M = np.zeros((basis.n, basis.n))
    for box in S.boxes_in_region(dom.box()):
        M += basis.box_pair_integrals(box)
    return 0.5 * (M + M.T)


def _axis_offsets(S, a_len, axis, grid):
    """Candidate window offsets along one axis: uniform grid + kink points."""
    c = S.cell[axis]
    pts = set(np.linspace(0.0, c, grid, endpoint=False))
    for box in S.boxes:
        for e in box[axis]:
            pts.add(e % c)
            pts.add((e - a_len) % c)
    return sorted(pts)


def thickness_estimate(S, a, grid=64):
    """Infimum over window translates of ``|S ∩ (x + [0,a])| / prod(a)``.

    For periodic box sets the window measure is piecewise multilinear in the
    offset, so scanning the uniform grid together with all box-edge
    breakpoints gives the exact infimum.  Finite (non-periodic) families are
    scanned over their bounding extent only; the result is then a heuristic
    upper estimate.
    """
    a = [float(x) for x in np.atleast_1d(a)]
    if any(x <= 0 for x in a):
        raise ParameterError("window lengths must be positive")
    if S.kind == "full":
        return 1.0
    if S.kind == "empty":
        return 0.0
    vol = float(np.prod(a))
    if S.kind == "periodic_boxes":
        axes = [_axis_offsets(S, a[i], i, grid) for i in range(len(S.cell))]
        best = np.inf
        for x in itertools.product(*axes):
            window = [(xi, xi + ai) for xi, ai in zip(x, a)]
            best = min(best, S.measure_in(window) / vol)
        return float(best)
    # finite family: slide inside the bounding extent
    lo = [min(b[i][0] for b in S.boxes) for i in range(S.dimension)]
    hi = [max(b[i][1] for b in S.boxes) for i in range(S.dimension)]
    axes = []
    for i in range(S.dimension):
        top = max(hi[i] - a[i], lo[i])
        axes.append(np.linspace(lo[i], top, grid))
    best = np.inf
    for x in itertools.product(*axes):
        window = [(xi, xi + ai) for xi, ai in zip(x, a)]
        best = min(best, S.measure_in(window) / vol)
    return float(best)


def _disk_quadrant_area(x, y, r):
    """Area of ``{u<=x, v<=y} ∩ disk(0, r)`` (vector-free, scalar args)."""
    x = max(-r, min(x, r))
    if y <= -r:
        return 0.0
    if x <= -r:
        return 0.0

    def H(u):
        # antiderivative of sqrt(r^2 - u^2)
        u = max(-r, min(u, r))
        return 0.5 * (u * np.sqrt(max(r * r - u * u, 0.0)) + r * r * np.arcsin(u / r))

    if y >= r:
        # full vertical extent: integral of (h(u) - (-h(u)))
        return 2.0 * (H(x) - H(-r))
    ystar = np.sqrt(max(r * r - y * y, 0.0))
    if y >= 0:
        # left of -ystar the whole disk section lies below y
        area = 2.0 * (H(min(x, -ystar)) - H(-r))
        # between -ystar and ystar the section is cut by the chord at y
        lo, hi = -ystar, min(x, ystar)
        if hi > lo:
            area += (H(hi) - H(lo)) + y * (hi - lo)
        if x > ystar:
            area += 2.0 * (H(x) - H(ystar))
        return area
    # y < 0: only the sliver between -h(u) and y, present for |u| < ystar
    lo, hi = -ystar, min(x, ystar)
    if hi <= lo:
        return 0.0
    return (H(hi) - H(lo)) + y * (hi - lo)


def disk_box_area(center, r, box):
    """Exact area of ``disk(center, r) ∩ box`` in 2D."""
    (x1, x2), (y1, y2) = box
    x1, x2, y1, y2 = x1 - center[0], x2 - center[0], y1 - center[1], y2 - center[1]
    return (_disk_quadrant_area(x2, y2, r) - _disk_quadrant_area(x1, y2, r)
            - _disk_quadrant_area(x2, y1, r) + _disk_quadrant_area(x1, y1, r))


def beta_complement(S, radii, grid=64):
    """Per radius, ``sup_x |S^c ∩ B(x, r)| / |B(x, r)|`` over a center grid.

    Whole-cell decomposition keeps the 1D case exact (interval measures) and
    the 2D case exact via closed-form disk/box intersection areas.  Returns a
    list of ``(r, beta_est)`` pairs in the order given.
    """
    radii = [float(r) for r in np.atleast_1d(radii)]
    if any(r <= 0 for r in radii):
        raise ParameterError("radii must be positive")
    if sorted(radii) != radii:
        raise ParameterError("radii must be increasing")
    if S.kind == "full":
        return [(r, 0.0) for r in radii]
    if S.kind == "empty":
        return [(r, 1.0) for r in radii]
    if S.kind != "periodic_boxes":
        raise ParameterError("complement density needs a periodic set")
    d = len(S.cell)
    out = []
    for r in radii:
        best = 0.0
        centers = [np.linspace(0.0, c, grid, endpoint=False) for c in S.cell]
        for x in itertools.product(*centers):
            if d == 1:
                ball_measure = 2.0 * r
                inter = S.measure_in([(x[0] - r, x[0] + r)])
            else:
                ball_measure = np.pi * r * r
                region = [(xi - r, xi + r) for xi in x]
                inter = sum(disk_box_area(x, r, box)
                            for box in S.boxes_in_region(region))
            best = max(best, (ball_measure - inter) / ball_measure)
        out.append((r, float(best)))
    return out


def make_equidistributed(spec, extent):
    """Materialize the ball family of ``spec`` over ``extent`` as boxes.

    Cells are ``[jG, (j+1)G)^d``.  In 1D the balls are exact intervals; in
    2D each ball is replaced by its inscribed axis-aligned square (half-width
    ``delta/sqrt(2)``), recorded in the metadata, which is itself an
    equidistributed family.  Centers are deterministic given the seed.
    """
    extent = [(float(a), float(b)) for a, b in extent]
    d = len(extent)
    if d > 2:
        raise ParameterError("equidistributed families support d <= 2")
    G, delta = spec.G, spec.delta
    ranges = [range(int(np.floor(lo / G)), int(np.ceil(hi / G))) for lo, hi in extent]
    cells = sorted(itertools.product(*ranges))
    if spec.centers is not None:
        centers = [tuple(map(float, z)) for z in spec.centers]
        if len(centers) != len(cells):
            raise ParameterError(f"expected {len(cells)} centers, got {len(centers)}")
        for j, z in zip(cells, centers):
            for ji, zi in zip(j, z):
                if not (ji * G + delta - _EPS <= zi <= (ji + 1) * G - delta + _EPS):
                    raise ParameterError("a center violates ball-in-cell containment")
    elif spec.mode == "centered":
        centers = [tuple((ji + 0.5) * G for ji in j) for j in cells]
    else:
        rng = np.random.default_rng(spec.seed)
        centers = [tuple(rng.uniform(ji * G + delta, (ji + 1) * G - delta)
                         for ji in j) for j in cells]
    half = delta if d == 1 else delta / np.sqrt(2.0)
    boxes = tuple(tuple((zi - half, zi + half) for zi in z) for z in centers)
    meta = {
        "G": G,
        "delta": delta,
        "seed": spec.seed,
        "mode": spec.mode,
        "centers": [list(z) for z in centers],
        "substitution": "exact interval" if d == 1 else "inscribed square, half-width delta/sqrt(2)",
    }
    return ObservabilitySet(kind="equidistributed_balls", boxes=boxes, meta=meta)


def periodic_band(period, gamma, d=1):
    """Periodic product set of density ``gamma``: one centered band per cell.

    Per axis the band has width ``gamma**(1/d) * period``, so the set is
    ``(gamma, (period,...))``-thick.
    """
    if not (0 < gamma < 1):
        raise ParameterError("gamma must be in (0, 1)")
    if period <= 0:
        raise ParameterError("period must be positive")
    eps = gamma ** (1.0 / d)
    band = (period * (1 - eps) / 2, period * (1 + eps) / 2)
    return ObservabilitySet.periodic((period,) * d, [tuple(band for _ in range(d))])


def example_set(name, **params):
    """Constructors for the three reference periodic sets.

    ``centered_bands(eps, d)``: 1-periodic product of bands of width
    ``eps`` centered in each unit cell (density ``eps**d``).
    ``corner_interval(gamma)``: 1-periodic set with cell trace ``[0, gamma]``.
    ``edge_bands(gamma, d)``: 1-periodic set with two edge bands of
    width ``gamma/2`` against the centered unit cell, crossed with full
    axes in higher dimension.
    """
    key = name.replace("-", "_")
    if key == "centered_bands":
        eps = params["eps"]
        d = int(params.get("d", 1))
        if not (0 < eps < 1):
            raise ParameterError("eps must be in (0, 1)")
        return periodic_band(1.0, eps ** d, d)
    if key == "corner_interval":
        gamma = params["gamma"]
        if not (0 < gamma < 1):
            raise ParameterError("gamma must be in (0, 1)")
        return ObservabilitySet.periodic((1.0,), [((0.0, gamma),)])
    if key == "edge_bands":
        gamma = params["gamma"]
        d = int(params.get("d", 1))
        if not (0 < gamma < 1):
            raise ParameterError("gamma must be in (0, 1)")
        # edge bands of the centered cell wrap to one centered band mod [0,1)
        band = ((1 - gamma) / 2, (1 + gamma) / 2)
        if d == 1:
            return ObservabilitySet.periodic((1.0,), [(band,)])
        box = (band,) + tuple((0.0, 1.0) for _ in range(d - 1))
        return ObservabilitySet.periodic((1.0,) * d, [box])
    raise ParameterError(f"unknown example set {name!r}")
