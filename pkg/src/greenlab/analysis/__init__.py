"""Reachability estimates, duality checks, deficiency indices and part classification."""

from .duality import (
    DualityCheck,
    check_aux1,
    check_aux2,
    check_auxiliary,
    decay_probe,
    membership_probe,
)
from .parts import (
    OperatorSpec,
    PartClassification,
    classify_part,
    deficiency_indices,
    shooting_indices,
    standard_specs,
)
from .reachability import (
    LEFT,
    RIGHT,
    ReachabilityReport,
    backward_reachable,
    bump_family,
    node_basis,
    polarization_content,
    polarized_basis,
    principal_angles,
    snapshot_reachable,
    tail_fraction,
)

__all__ = [
    "DualityCheck",
    "LEFT",
    "OperatorSpec",
    "PartClassification",
    "RIGHT",
    "ReachabilityReport",
    "backward_reachable",
    "bump_family",
    "check_aux1",
    "check_aux2",
    "check_auxiliary",
    "classify_part",
    "decay_probe",
    "deficiency_indices",
    "membership_probe",
    "node_basis",
    "polarization_content",
    "polarized_basis",
    "principal_angles",
    "shooting_indices",
    "snapshot_reachable",
    "standard_specs",
    "tail_fraction",
]
