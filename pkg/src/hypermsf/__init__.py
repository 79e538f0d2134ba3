"""Chemical hypergraphs, their normalized Laplacian, and synchronization stability.

Submodules:

* ``hypercore``  - hyperedges, hypergraphs, incidence matrices, JSON format
* ``spectral``   - Laplacian ``D^-1 S S^T``, Jacobi eigensolver, kernel projector
* ``dynamics``   - vertex dynamics, couplings, RK4 flows and coupled map lattices
* ``stability``  - Lyapunov exponents, master stability rates, sigma windows
* ``io``         - CSV writers and readers
* ``cli``        - ``hypermsf`` command-line tool
"""

from .errors import *  # noqa: F401,F403
from .hypercore import *  # noqa: F401,F403
from .spectral import *  # noqa: F401,F403
from .dynamics import *  # noqa: F401,F403
from .stability import *  # noqa: F401,F403
from . import errors, hypercore, spectral, dynamics, stability

__version__ = "0.1.0"

__all__ = (
    errors.__all__ + hypercore.__all__ + spectral.__all__ + dynamics.__all__ + stability.__all__
)
