"""Elementary cellular-automaton core: rule tables and exact tape updates.

Rules are integers in [0, 255] under the standard Wolfram numbering: the
output for neighborhood ``(left, center, right)`` is bit ``4*left + 2*center
+ right`` of the rule's binary expansion. Tapes are fixed-length binary
vectors; cell 0 is the leftmost cell and neighborhoods are read
``(left, center, right)``. The default boundary is periodic (wrap-around);
``boundary="fixed_zero"`` treats both out-of-range neighbors as 0.

Tapes are stored as plain integers (cell ``i`` is bit ``i``), which keeps
single steps and equality checks cheap enough for exhaustive enumeration and
for the planners' rollout loops. All functions here are pure; ``Tape`` values
are immutable and hashable.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .errors import DomainError

__all__ = [
    "BOUNDARIES",
    "MIN_LENGTH",
    "Tape",
    "decode_rule",
    "encode_rule",
    "enumerate_orbit",
    "step",
    "step_bits",
]

MIN_LENGTH = 3  # a neighborhood needs three cells
BOUNDARIES = ("periodic", "fixed_zero")


@lru_cache(maxsize=512)
def decode_rule(rule: int) -> tuple[int, ...]:
    """Rule table for ``rule``: entry ``4*left + 2*center + right`` is the output bit."""
    if not isinstance(rule, int) or isinstance(rule, bool):
        raise DomainError(f"rule must be an integer, got {rule!r}")
    if not 0 <= rule <= 255:
        raise DomainError(f"rule must be in [0, 255], got {rule}")
    return tuple((rule >> k) & 1 for k in range(8))


def encode_rule(outputs: tuple[int, ...]) -> int:
    """Inverse of :func:`decode_rule`."""
    if len(outputs) != 8 or any(b not in (0, 1) for b in outputs):
        raise DomainError(f"rule table must be 8 bits, got {outputs!r}")
    return sum(bit << k for k, bit in enumerate(outputs))


@dataclass(frozen=True)
class Tape:
    """Immutable binary tape; cell ``i`` is bit ``i`` of ``bits``."""

    bits: int
    length: int

    def __post_init__(self) -> None:
        if not isinstance(self.length, int) or self.length < MIN_LENGTH:
            raise DomainError(f"tape length must be an integer >= {MIN_LENGTH}, got {self.length!r}")
        if not isinstance(self.bits, int) or not 0 <= self.bits < (1 << self.length):
            raise DomainError(f"tape bits {self.bits!r} out of range for length {self.length}")

    @classmethod
    def from_string(cls, text: str) -> "Tape":
        """Parse the '0'/'1' text form; character 0 is cell 0."""
        if not text or any(c not in "01" for c in text):
            raise DomainError(f"tape string must be nonempty over '0'/'1', got {text!r}")
        bits = sum(1 << i for i, c in enumerate(text) if c == "1")
        return cls(bits, len(text))

    @classmethod
    def from_cells(cls, cells) -> "Tape":
        cells = list(cells)
        if any(c not in (0, 1) for c in cells):
            raise DomainError(f"cells must be 0/1, got {cells!r}")
        return cls(sum(c << i for i, c in enumerate(cells)), len(cells))

    @property
    def cells(self) -> tuple[int, ...]:
        return tuple((self.bits >> i) & 1 for i in range(self.length))

    def cell(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise DomainError(f"cell index {i} out of range for length {self.length}")
        return (self.bits >> i) & 1

    def with_flip(self, i: int) -> "Tape":
        if not 0 <= i < self.length:
            raise DomainError(f"flip index {i} out of range for length {self.length}")
        return Tape(self.bits ^ (1 << i), self.length)

    def __str__(self) -> str:
        return "".join("1" if (self.bits >> i) & 1 else "0" for i in range(self.length))


@lru_cache(maxsize=1 << 20)
def step_bits(bits: int, length: int, rule: int, boundary: str = "periodic") -> int:
    """One synchronous update of a bit-packed tape. Cached: dynamics are a pure lookup."""
    table = decode_rule(rule)
    if boundary not in BOUNDARIES:
        raise DomainError(f"boundary must be one of {BOUNDARIES}, got {boundary!r}")
    out = 0
    last = length - 1
    for i in range(length):
        c = (bits >> i) & 1
        if boundary == "periodic":
            l = (bits >> (last if i == 0 else i - 1)) & 1
            r = (bits >> (0 if i == last else i + 1)) & 1
        else:
            l = 0 if i == 0 else (bits >> (i - 1)) & 1
            r = 0 if i == last else (bits >> (i + 1)) & 1
        if table[(l << 2) | (c << 1) | r]:
            out |= 1 << i
    return out


def step(tape: Tape, rule: int, boundary: str = "periodic") -> Tape:
    """Apply ``rule`` to every neighborhood of ``tape`` simultaneously."""
    return Tape(step_bits(tape.bits, tape.length, rule, boundary), tape.length)


def enumerate_orbit(tape: Tape, rule: int, steps: int, boundary: str = "periodic") -> list[Tape]:
    """The trajectory ``[tape, step(tape), ..., step^steps(tape)]``."""
    if steps < 0:
        raise DomainError(f"steps must be >= 0, got {steps}")
    orbit = [tape]
    for _ in range(steps):
        orbit.append(step(orbit[-1], rule, boundary))
    return orbit
