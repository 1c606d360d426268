"""Tensegrity statics, modal analysis and nonlinear dynamics in natural coordinates."""

from tensekit.members import (
    CoordType,
    LocalPoint,
    MemberTemplate,
    bar_template,
    body_template,
)

__all__ = [
    "CoordType",
    "LocalPoint",
    "MemberTemplate",
    "bar_template",
    "body_template",
]
