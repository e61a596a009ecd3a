"""qspcap: quantum-signal-processing Hamiltonian-simulation toolchain.

Phase synthesis, explicit circuit construction and optimization, error
injection, classical simulation on three backends, and simulation-capacity
model fitting.
"""

__version__ = "0.1.0"
