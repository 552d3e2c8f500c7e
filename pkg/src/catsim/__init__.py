"""Numerical toolkit for two-photon-dissipative cat qubits.

Modules
-------
hilbert        truncated two-mode Fock-space linear algebra
model          physical parameters, Hamiltonian and dissipator builders
pulse          pulse sequences, protocol builders, compilation
lindblad       master-equation integration and Liouvillian spectra
trajectories   quantum-jump unraveling, heterodyne and telegraph synthesis
semiclassical  mean-field flow, stability and closed-form rates
analysis       Wigner computation, cat observables, curve fitting
cli            config-driven job runner
"""

__version__ = "0.1.0"

from .hilbert import QOperator, QState, SpaceDims  # noqa: F401
from .model import CircuitParams, DriveSpec, PhysicalParams  # noqa: F401
