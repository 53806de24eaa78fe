from typing import Literal

ModeIndex = int  # 0-based inside the package
ModeLabel = int  # 1-based in documents and reports
ModePair = tuple[ModeIndex, ModeIndex]
Occupation = tuple[int, ...]
SpinProjections = tuple[float, ...]  # per-pair m values (half-integers)

SpinComponent = Literal["x"] | Literal["y"] | Literal["z"] | Literal["zero"]
MonomialKind = (
    Literal["create2"]  # a_i† a_j†, i <= j
    | Literal["mixed"]  # a_i† a_j
    | Literal["annih2"]  # a_i a_j, i <= j
    | Literal["unit"]
)
MonomialKey = tuple[MonomialKind, ModeIndex, ModeIndex]  # ("unit", -1, -1) for the identity

NullifierKind = Literal["exact"] | Literal["asymptotic"]
FormKind = Literal["squeezed"] | Literal["constant"]
Quadrature = Literal["Q"] | Literal["P"]
