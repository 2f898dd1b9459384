"""Multiply-accumulate bookkeeping for empirical complexity checks."""

from dataclasses import dataclass


@dataclass
class OpCounter:
    macs: int = 0

    def add(self, n: int) -> None:
        self.macs += int(n)

    def reset(self) -> None:
        self.macs = 0
