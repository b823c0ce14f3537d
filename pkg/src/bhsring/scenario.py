"""Scenario specifications: one concrete BHS instance, plus canonical forms."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional


class InvalidSpec(ValueError):
    """Raised when a scenario violates the model's preconditions."""


def default_bound(n: int) -> int:
    return 30 * n + 30


@dataclass(frozen=True)
class ScenarioSpec:
    """A ring of ``n`` nodes, the black hole, homebases and port labels.

    ``labeling[v]`` is the local label (1 or 2) of the clockwise port at
    node ``v``; ``None`` means the oriented labeling (port 1 clockwise
    everywhere).  ``tokens``/``movable`` override the protocol's own budget,
    which is how restricted variants are run.
    """

    n: int
    black_hole: int
    homebases: tuple
    protocol: str = "ring1"
    oriented: bool = True
    labeling: Optional[tuple] = None
    round_bound: Optional[int] = None
    tokens: Optional[int] = None
    movable: Optional[bool] = None

    def __post_init__(self):
        object.__setattr__(self, "homebases", tuple(self.homebases))
        if self.labeling is not None:
            object.__setattr__(self, "labeling", tuple(self.labeling))

    @property
    def k(self) -> int:
        return len(self.homebases)

    @property
    def bound(self) -> int:
        return self.round_bound if self.round_bound is not None else default_bound(self.n)

    @property
    def ports(self) -> tuple:
        if self.oriented or self.labeling is None:
            return (1,) * self.n
        return self.labeling

    def validate(self) -> None:
        if self.n < 3:
            raise InvalidSpec(f"ring needs at least 3 nodes, got {self.n}")
        if not 0 <= self.black_hole < self.n:
            raise InvalidSpec(f"black hole {self.black_hole} outside ring")
        hb = self.homebases
        if len(set(hb)) != len(hb):
            raise InvalidSpec(f"duplicate homebase in {hb}")
        if any(not 0 <= h < self.n for h in hb):
            raise InvalidSpec(f"homebase outside ring in {hb}")
        if self.black_hole in hb:
            raise InvalidSpec("homebase on the black hole")
        if not self.oriented:
            if self.labeling is None or len(self.labeling) != self.n:
                raise InvalidSpec("unoriented ring needs one port label per node")
            if any(x not in (1, 2) for x in self.labeling):
                raise InvalidSpec("port labels must be 1 or 2")
        if self.round_bound is not None and self.round_bound < 1:
            raise InvalidSpec("round bound must be >= 1")

    def rotated(self, shift: int) -> "ScenarioSpec":
        """Same scenario with every node index moved by ``shift``."""
        n = self.n
        lab = None
        if self.labeling is not None:
            lab = tuple(self.labeling[(v - shift) % n] for v in range(n))
        return replace(
            self,
            black_hole=(self.black_hole + shift) % n,
            homebases=tuple(sorted((h + shift) % n for h in self.homebases)),
            labeling=lab,
        )

    def reflected(self) -> "ScenarioSpec":
        """Mirror image around the black hole (clockwise becomes counter)."""
        n, b = self.n, self.black_hole
        lab = None
        if self.labeling is not None:
            lab = [0] * n
            for v, x in enumerate(self.labeling):
                lab[(2 * b - v) % n] = 3 - x
            lab = tuple(lab)
        return replace(
            self,
            homebases=tuple(sorted((2 * b - h) % n for h in self.homebases)),
            labeling=lab,
        )

    def canonical(self) -> "ScenarioSpec":
        """Black hole at 0; unoriented rings also quotient by reflection."""
        c = self.rotated(-self.black_hole)
        c = replace(c, homebases=tuple(sorted(c.homebases)))
        if self.oriented:
            return c
        r = c.reflected()
        return min(c, r, key=lambda s: (s.homebases, s.labeling))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "black_hole": self.black_hole,
            "homebases": list(self.homebases),
            "protocol": self.protocol,
            "oriented": self.oriented,
            "labeling": None if self.labeling is None else list(self.labeling),
            "round_bound": self.round_bound,
            "tokens": self.tokens,
            "movable": self.movable,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        return cls(
            n=d["n"],
            black_hole=d["black_hole"],
            homebases=tuple(d["homebases"]),
            protocol=d.get("protocol", "ring1"),
            oriented=d.get("oriented", True),
            labeling=None if d.get("labeling") is None else tuple(d["labeling"]),
            round_bound=d.get("round_bound"),
            tokens=d.get("tokens"),
            movable=d.get("movable"),
        )

    def effective_key(self) -> tuple:
        """Everything a run can depend on.

        Port labels only reach the agents through the homebase port each
        agent adopts as Left, so labelings that agree on homebases are
        indistinguishable.
        """
        ports = self.ports
        return (self.n, self.black_hole, self.homebases, self.protocol,
                tuple(ports[h] for h in self.homebases), self.bound,
                self.tokens, self.movable)
