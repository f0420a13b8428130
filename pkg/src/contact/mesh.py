"""
Structured P1 triangulation of a rectangle with tagged boundary parts.

Tags:
    gamma1  left edge, clamped
    gamma2  top edge and right edge, traction
    gamma3  bottom edge with x <= length/2, unilateral contact and friction
    gamma4  bottom edge with x >= length/2, normal compliance and Coulomb friction

The node at x = length/2 on the bottom edge belongs to both contact parts.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Tuple

import numpy as np

from ..core.errors import MeshError

logger = logging.getLogger(__name__)

TAGS = ("gamma1", "gamma2", "gamma3", "gamma4")

# outward normals of the reference rectangle's sides
SIDE_NORMALS = {
    "bottom": np.array([0.0, -1.0]),
    "top": np.array([0.0, 1.0]),
    "left": np.array([-1.0, 0.0]),
    "right": np.array([1.0, 0.0]),
}


def element_geometry(points: np.ndarray, triangles: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Areas (n_el,) and shape-function gradients (n_el, 3, 2) of P1 triangles.

    Raises MeshError for elements with area <= 0 (degenerate or clockwise).
    """
    xy = np.asarray(points, dtype=float)[np.asarray(triangles, dtype=int)]
    e1 = xy[:, 1] - xy[:, 0]
    e2 = xy[:, 2] - xy[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    areas = det / 2.0
    bad = np.flatnonzero(areas <= 1e-14 * max(1.0, float(np.max(np.abs(xy)))) ** 2)
    if bad.size:
        raise MeshError(f"{bad.size} degenerate element(s), first is element {int(bad[0])}")
    # gradients of barycentric coordinates
    grads = np.empty((xy.shape[0], 3, 2))
    for i in range(3):
        a, b = xy[:, (i + 1) % 3], xy[:, (i + 2) % 3]
        grads[:, i, 0] = (a[:, 1] - b[:, 1]) / det
        grads[:, i, 1] = (b[:, 0] - a[:, 0]) / det
    return areas, grads


@dataclass(frozen=True, eq=False)
class RectMesh:
    """nx x ny cells on [0, length] x [0, height], each split along its diagonal.

    rotation_deg rotates the body about the origin; only multiples of 90
    degrees are accepted so contact normals stay aligned with the DoF axes.
    """

    length: float = 2.0
    height: float = 1.0
    nx: int = 8
    ny: int = 4
    rotation_deg: float = 0.0

    def __post_init__(self):
        if not (self.length > 0 and self.height > 0):
            raise MeshError(f"rectangle extents must be positive, got {self.length} x {self.height}")
        if int(self.nx) != self.nx or int(self.ny) != self.ny or self.nx < 1 or self.ny < 1:
            raise MeshError(f"element counts must be positive integers, got {self.nx} x {self.ny}")
        if self.nx < 2:
            raise MeshError("nx must be at least 2 so both contact parts have a segment")
        if float(self.rotation_deg) % 90.0 != 0.0:
            raise MeshError(f"rotation must be a multiple of 90 degrees, got {self.rotation_deg}")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))

    def node_id(self, i: int, j: int) -> int:
        return j * (self.nx + 1) + i

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @cached_property
    def rotation(self) -> np.ndarray:
        quarter = int(round(float(self.rotation_deg) / 90.0)) % 4
        c, s = [(1, 0), (0, 1), (-1, 0), (0, -1)][quarter]
        return np.array([[c, -s], [s, c]], dtype=float)

    @cached_property
    def reference_points(self) -> np.ndarray:
        """Node coordinates before rotation, (n_nodes, 2)."""
        xs = np.linspace(0.0, self.length, self.nx + 1)
        ys = np.linspace(0.0, self.height, self.ny + 1)
        gx, gy = np.meshgrid(xs, ys)
        return np.column_stack([gx.ravel(), gy.ravel()])

    @cached_property
    def points(self) -> np.ndarray:
        return self.reference_points @ self.rotation.T

    @cached_property
    def triangles(self) -> np.ndarray:
        tris = []
        for j in range(self.ny):
            for i in range(self.nx):
                n00, n10 = self.node_id(i, j), self.node_id(i + 1, j)
                n01, n11 = self.node_id(i, j + 1), self.node_id(i + 1, j + 1)
                tris.append((n00, n10, n11))
                tris.append((n00, n11, n01))
        return np.array(tris, dtype=int)

    @cached_property
    def geometry(self) -> Tuple[np.ndarray, np.ndarray]:
        return element_geometry(self.points, self.triangles)

    @property
    def areas(self) -> np.ndarray:
        return self.geometry[0]

    @property
    def gradients(self) -> np.ndarray:
        return self.geometry[1]

    @cached_property
    def side_edges(self) -> Dict[str, List[Tuple[int, int]]]:
        nx, ny = self.nx, self.ny
        return {
            "bottom": [(self.node_id(i, 0), self.node_id(i + 1, 0)) for i in range(nx)],
            "top": [(self.node_id(i, ny), self.node_id(i + 1, ny)) for i in range(nx)],
            "left": [(self.node_id(0, j), self.node_id(0, j + 1)) for j in range(ny)],
            "right": [(self.node_id(nx, j), self.node_id(nx, j + 1)) for j in range(ny)],
        }

    @cached_property
    def tagged_edges(self) -> Dict[str, List[Tuple[int, int]]]:
        half = self.length / 2.0
        ref = self.reference_points
        bottom = self.side_edges["bottom"]
        mid = [(ref[a, 0] + ref[b, 0]) / 2.0 for a, b in bottom]
        return {
            "gamma1": list(self.side_edges["left"]),
            "gamma2": self.side_edges["top"] + self.side_edges["right"],
            "gamma3": [e for e, m in zip(bottom, mid) if m <= half],
            "gamma4": [e for e, m in zip(bottom, mid) if m > half],
        }

    def edge_length(self, a: int, b: int) -> float:
        return float(np.linalg.norm(self.points[b] - self.points[a]))

    def lumped_weights(self, tag: str) -> np.ndarray:
        """Row sums of the boundary mass matrix of `tag`: half of every segment per endpoint."""
        if tag not in TAGS:
            raise MeshError(f"unknown boundary tag {tag!r}")
        w = np.zeros(self.n_nodes)
        for a, b in self.tagged_edges[tag]:
            half = self.edge_length(a, b) / 2.0
            w[a] += half
            w[b] += half
        return w

    def measure(self, tag: str) -> float:
        return float(sum(self.edge_length(a, b) for a, b in self.tagged_edges[tag]))

    def boundary_weights(self) -> np.ndarray:
        """Lumped weights of the whole boundary."""
        return sum(self.lumped_weights(tag) for tag in TAGS)

    @cached_property
    def clamped_nodes(self) -> np.ndarray:
        return np.array(sorted({n for e in self.tagged_edges["gamma1"] for n in e}), dtype=int)

    def side_normal(self, side: str) -> np.ndarray:
        return self.rotation @ SIDE_NORMALS[side]

    def contact_normal(self) -> np.ndarray:
        """Outward unit normal of the bottom edge (gamma3 and gamma4)."""
        return self.side_normal("bottom")

    def contact_tangent(self) -> np.ndarray:
        """Unit tangent of the bottom edge, pointing toward increasing reference x."""
        return self.rotation @ np.array([1.0, 0.0])

    def node_normals(self) -> Dict[int, np.ndarray]:
        """Unit outward normal per boundary node; corners get the normalized sum."""
        acc: Dict[int, np.ndarray] = {}
        for side, edges in self.side_edges.items():
            nrm = self.side_normal(side)
            for a, b in edges:
                for n in (a, b):
                    acc[n] = acc.get(n, np.zeros(2)) + nrm
        out = {}
        for n, v in acc.items():
            norm = np.linalg.norm(v)
            if norm == 0.0:
                raise MeshError(f"boundary node {n} has no well-defined normal")
            out[n] = v / norm
        return out

    def check_partition(self):
        """Every boundary segment carries exactly one tag and gamma1 has positive measure."""
        tagged = [e for tag in TAGS for e in self.tagged_edges[tag]]
        sides = [e for edges in self.side_edges.values() for e in edges]
        if sorted(tagged) != sorted(sides):
            raise MeshError("boundary tags do not partition the boundary")
        if self.measure("gamma1") <= 0.0:
            raise MeshError("clamped part gamma1 must have positive measure")
        if not self.tagged_edges["gamma3"] or not self.tagged_edges["gamma4"]:
            raise MeshError("both contact parts need at least one segment")

    def to_dict(self) -> dict:
        return {
            "length": self.length,
            "height": self.height,
            "nx": self.nx,
            "ny": self.ny,
            "rotation_deg": float(self.rotation_deg),
        }
