"""noiselab - Numerical verification lab for slightly coloured Gaussian noise."""

__version__ = "0.1.0"
__author__ = "Noiselab Team"
__description__ = "Kernels, spectral asymptotics, Gram defects and Z_n thresholds for log-singular covariances"
