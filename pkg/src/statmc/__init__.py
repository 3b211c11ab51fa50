"""Monte Carlo and molecular-simulation toolkit for lattice and particle models.

Subpackage layout:

- ``torus``             periodic-boundary arithmetic
- ``lattice``           Ising / Potts / XY state and potentials
- ``particles``         hard-disk, soft-disk, Lennard-Jones and bonded potentials
- ``exact``             analytic and brute-force reference results
- ``lattice_samplers``  Metropolis, Glauber, Swendsen-Wang, Wolff, event-chain XY
- ``disk_samplers``     hard-disk Metropolis, Jaster chains, hard-disk event chains
- ``md``                event-driven hard-disk molecular dynamics
- ``dynamics``          leapfrog, hybrid Monte Carlo, Langevin integrators
- ``ecmc``              generalized event-chain sampler for smooth pair potentials
- ``observables``       estimators over sample traces
- ``harness``           experiment configs, seeding, multi-chain execution
- ``cli``               ``statmc run/analyze/reference`` entry points
"""

__version__ = "0.1.0"


class SimulationError(Exception):
    """Base class for domain errors raised by samplers and estimators."""


class DegeneracyError(SimulationError):
    """Two events coincide within the time tolerance; the run cannot proceed."""


class SingularityError(SimulationError):
    """A potential or gradient was evaluated at a singular configuration."""


class DivergenceError(SimulationError):
    """A trajectory produced non-finite coordinates or forces."""


class UnsupportedModelError(SimulationError):
    """The requested sampler does not support the supplied model."""


class StateSpaceTooLargeError(SimulationError):
    """Exhaustive enumeration was requested beyond the supported state-space size."""


class RateBoundError(SimulationError):
    """A thinning upper bound was exceeded by the true event rate (internal bug guard)."""
