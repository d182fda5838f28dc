"""Markov towers of multi-matrix algebras, their planar algebras and embeddings into graph planar algebras."""

from .embed import (
    RelativeCommutantPA,
    canonical_pa,
    compression_iso,
    embed_module,
    find_standard_level,
    gpa_isomorphism,
    invariance_check,
    pimsner_popa_basis,
    shift_iso,
    strongly_markov_inclusion,
    verify_embedding,
    verify_planar_map,
)
from .gpa import GraphPlanarAlgebra, box_dimension, gpa_as_markov_tower
from .graph import WeightedBipartiteGraph, builtin, frobenius_perron, is_pointed_isomorphic, load_graph, weighted
from .multimatrix import AlgebraElement, MultiMatrixAlgebra, UnitalInclusion
from .projcat import compose, linking_map, module_action, pivotal_trace, simple_objects
from .report import Check, Report
from .tljdiag import TLElement, catalan, diagram, diagram_multiply, generic_dimension, represent
from .tower import (
    MarkovTower,
    build_tower,
    compress,
    multistep,
    principal_graph,
    verify_elementary_properties,
    verify_markov_axioms,
)

__all__ = [
    "AlgebraElement",
    "Check",
    "GraphPlanarAlgebra",
    "MarkovTower",
    "MultiMatrixAlgebra",
    "RelativeCommutantPA",
    "Report",
    "TLElement",
    "UnitalInclusion",
    "WeightedBipartiteGraph",
    "box_dimension",
    "build_tower",
    "builtin",
    "canonical_pa",
    "catalan",
    "compose",
    "compress",
    "compression_iso",
    "diagram",
    "diagram_multiply",
    "embed_module",
    "find_standard_level",
    "frobenius_perron",
    "generic_dimension",
    "gpa_as_markov_tower",
    "gpa_isomorphism",
    "invariance_check",
    "is_pointed_isomorphic",
    "linking_map",
    "load_graph",
    "module_action",
    "multistep",
    "pimsner_popa_basis",
    "pivotal_trace",
    "principal_graph",
    "represent",
    "shift_iso",
    "simple_objects",
    "strongly_markov_inclusion",
    "verify_elementary_properties",
    "verify_embedding",
    "verify_markov_axioms",
    "verify_planar_map",
    "weighted",
]
