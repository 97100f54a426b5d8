"""HHS structures, axiom checks, product regions, gates and hierarchy paths."""
from .axioms import AXIOMS, AxiomError, check_all, check_axiom
from .mutations import MUTATIONS
from .paths import PathFit, PathSearch, find_hierarchy_path, hierarchy_path_fit
from .regions import (ProductRegion, RegionError, check_properties_of_F, gate, gates,
                      is_hierarchically_quasiconvex, product_region)
from .structure import CONTAINS, NESTED, ORTH, TRANS, Domain, HhsStructure, StructureError

__all__ = ["AXIOMS", "AxiomError", "CONTAINS", "Domain", "HhsStructure", "MUTATIONS", "NESTED", "ORTH",
           "PathFit", "PathSearch", "ProductRegion", "RegionError", "StructureError", "TRANS",
           "check_all", "check_axiom", "check_properties_of_F", "find_hierarchy_path", "gate", "gates",
           "hierarchy_path_fit", "is_hierarchically_quasiconvex", "product_region"]
