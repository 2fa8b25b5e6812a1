"""Stochastic simulation and bound verification for dissipatively protected
quantum memories.

Submodules:

- ``engine``:    shared Gillespie machinery, seeded streams, trial orchestration
- ``lattice4d``: incidence combinatorics of the 4D periodic lattice
- ``toric4d``:   sector Monte Carlo of the 4D toric code with the quantum Toom rule
- ``toy2d``:     2D open-boundary majority-vote dissipative memory
- ``concat``:    concatenated-code dissipation, bounds and Pauli-frame Monte Carlo
- ``gadget``:    damped-ancilla dissipation gadget ODEs and deviation bounds
- ``cli``:       experiment runner (CSV + JSON manifest outputs)
"""

__version__ = "0.1.0"
