"""Surface reconstruction from point clouds via rotation systems.

The pipeline builds a filtered kNN graph over the input points, orders each
vertex's neighbors counterclockwise in its tangent plane, and grows a mesh
by inserting edges into a rotation system, which defines faces purely
combinatorially. Topology, geometry, and quality tests keep every insertion
genus-preserving and embeddable; an optional handle stage raises genus where
the data demands it, and a final ear-clipping pass triangulates what is left.
"""

from .cloud import PointCloud, load
from .core import Params
from .errors import (
    ConfigError,
    DegenerateProjection,
    DegenerateTriangle,
    EmptyInput,
    InconsistentState,
    IoError,
    IsolatedVertex,
    ParseError,
    RotmeshError,
    UnknownHalfedge,
    UnsupportedFormat,
)
from .mesh import (
    TriangleMesh,
    compute_metrics,
    export,
    extract_triangles,
    load_mesh,
    write_metrics,
)
from .reconstruct import Mesh, reconstruct_cloud

__version__ = "0.1.0"

__all__ = [
    "Params",
    "PointCloud",
    "load",
    "Mesh",
    "reconstruct_cloud",
    "TriangleMesh",
    "extract_triangles",
    "compute_metrics",
    "export",
    "load_mesh",
    "write_metrics",
    "IoError",
    "RotmeshError",
    "ConfigError",
    "EmptyInput",
    "ParseError",
    "UnsupportedFormat",
    "DegenerateProjection",
    "DegenerateTriangle",
    "IsolatedVertex",
    "UnknownHalfedge",
    "InconsistentState",
    "__version__",
]
