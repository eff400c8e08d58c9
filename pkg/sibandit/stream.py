from typing import Protocol, Tuple, runtime_checkable

import numpy as np
from numpy.typing import NDArray

__all__ = ['ArmStream']


@runtime_checkable
class ArmStream(Protocol):
    """Interface for anything that can be pulled arm by arm, of which
    sibandit.environment.EnvironmentSpec is the shipped implementation.
    Replayed logs can be wrapped the same way.
    """

    @property
    def d(self) -> int: ...

    @property
    def K(self) -> int: ...

    def pull(self,
             arm: int,
             n: int,
             random_state=None
             ) -> Tuple[NDArray[np.floating], NDArray[np.floating]]: ...

    def regret(self,
               X: NDArray[np.floating],
               arms: NDArray[np.integer]
               ) -> NDArray[np.floating]: ...
