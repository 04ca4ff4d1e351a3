"""Monte Carlo toolkit for kinetic-type evolution equations built on
continuous-time branching random walks: spectral constants of the
reproduction law, event-driven population simulation, martingale observables,
boundary-case rescaling, fixed-point pools, and statistical verification
suites with a CSV-emitting CLI.
"""

__version__ = "0.1.0"
