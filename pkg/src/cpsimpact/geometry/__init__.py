"""Convex polytope toolkit: H/V representations, unions, LP substrate."""
from .lp import INFEASIBLE, OPTIMAL, UNBOUNDED, LPResult, lp_solve
from .polytope import (HPolytope, VPolytope, affine_image, affine_preimage,
                       bounding_box, cartesian_product, contains_point,
                       contains_set, erode, hull, intersect,
                       intersect_halfspaces, is_empty, minkowski_distance,
                       minkowski_sum, remove_redundancy, slice_, support,
                       support_many, vertices, volume)
from .tolerances import DEFAULT_TOL, Tolerances
from .union import (EXACT, MONTE_CARLO, STATISTICAL, Equality, PolyUnion,
                    disjoint_decomposition, multiset_equal,
                    polytope_difference, union_bounding_box,
                    union_contains_point, union_difference, union_intersect,
                    union_expand, union_merge, union_prune, union_subset, union_volume)

slice = slice_  # noqa: A001  public name matching the operation

__all__ = [
    "INFEASIBLE", "OPTIMAL", "UNBOUNDED", "LPResult", "lp_solve",
    "HPolytope", "VPolytope", "affine_image", "affine_preimage", "bounding_box",
    "cartesian_product", "contains_point", "contains_set", "erode", "hull",
    "intersect", "intersect_halfspaces", "is_empty", "minkowski_distance",
    "minkowski_sum", "remove_redundancy", "slice_", "support", "support_many",
    "vertices", "volume", "DEFAULT_TOL", "Tolerances", "EXACT", "MONTE_CARLO",
    "STATISTICAL", "Equality", "PolyUnion", "disjoint_decomposition",
    "multiset_equal", "polytope_difference", "union_bounding_box",
    "union_contains_point", "union_difference", "union_intersect",
    "union_expand", "union_merge", "union_prune", "union_subset", "union_volume",
]
