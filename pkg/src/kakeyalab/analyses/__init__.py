"""Named analyses run by experiments."""

from typing import List, Type

from ..core.errors import ValidationError
from .base import BaseAnalysis
from .broadness import BroadPiecesAnalysis, BroadScaleAnalysis, RegularityAnalysis
from .constants import EveryScaleAnalysis, LocalKatzTaoAnalysis, SubmultiplicativeAnalysis, WolffAnalysis
from .factoring import (
    BrunnAnalysis,
    ConvexFactoringAnalysis,
    PruningAnalysis,
    RigidAnalysis,
    SlabFactoringAnalysis,
)
from .volumes import (
    CordobaAnalysis,
    DoublingAnalysis,
    HairbrushAnalysis,
    KakeyaAnalysis,
    TangencyAnalysis,
    UnionVolumeAnalysis,
)

# Registry of available analyses
ANALYSES = {
    cls.name: cls
    for cls in (
        WolffAnalysis,
        EveryScaleAnalysis,
        LocalKatzTaoAnalysis,
        SubmultiplicativeAnalysis,
        PruningAnalysis,
        ConvexFactoringAnalysis,
        SlabFactoringAnalysis,
        BrunnAnalysis,
        RigidAnalysis,
        BroadPiecesAnalysis,
        BroadScaleAnalysis,
        RegularityAnalysis,
        UnionVolumeAnalysis,
        CordobaAnalysis,
        KakeyaAnalysis,
        HairbrushAnalysis,
        DoublingAnalysis,
        TangencyAnalysis,
    )
}


def get_analysis(name: str) -> Type[BaseAnalysis]:
    """Get analysis class for given name.

    Args:
        name: Analysis name

    Returns:
        Analysis class

    Raises:
        ValidationError: If the analysis is not registered
    """
    if name not in ANALYSES:
        available = list_analyses()
        raise ValidationError(f"Unknown analysis: {name}. Available: {available}")

    return ANALYSES[name]


def list_analyses() -> List[str]:
    """Get list of available analysis names, sorted."""
    return sorted(ANALYSES)
