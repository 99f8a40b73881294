"""
Error hierarchy for FedGH Simulator
Every failure raised by the simulator derives from SimulationError
"""

from typing import Optional


class SimulationError(Exception):
    """Base class for all simulator errors"""


class ContractError(SimulationError, ValueError):
    """A precondition of a public operation was violated"""


class DivergenceError(SimulationError):
    """Local training produced a non-finite loss"""

    def __init__(self, client_id: int, step: int, loss: float, round_index: Optional[int] = None):
        self.client_id = client_id
        self.step = step
        self.loss = loss
        self.round_index = round_index
        super().__init__(self._format())

    def _format(self) -> str:
        where = f"client {self.client_id}, step {self.step}"
        if self.round_index is not None:
            where = f"round {self.round_index}, {where}"
        return f"Local training diverged ({where}): loss={self.loss}"

    def with_round(self, round_index: int) -> "DivergenceError":
        """Return a copy carrying the round context"""
        return DivergenceError(self.client_id, self.step, self.loss, round_index)


class PartitionError(SimulationError):
    """Dirichlet partitioning could not give every client at least one sample"""


class ConfigError(SimulationError, ValueError):
    """Invalid experiment configuration, tagged with the offending field path"""

    def __init__(self, field_path: str, message: str):
        self.field_path = field_path
        self.reason = message
        super().__init__(f"{field_path}: {message}")
