"""Cross-embodiment 2D navigation laboratory.

Subpackages:

* :mod:`cenav.nn` - float64 tape autodiff, layers, Adam, checkpoint I/O
* :mod:`cenav.sim` - procedural worlds, raycasting, kinematic stepping
* :mod:`cenav.dwa` - dynamic-window velocity expert and dataset harvesting
* :mod:`cenav.embodiment` - parametric command-tracking emulators
* :mod:`cenav.flow` - conditional normalizing-flow expert and MSE baseline
* :mod:`cenav.rl` - guided PPO refiner
* :mod:`cenav.evalsuite` - shortest paths, SR/SPL, benchmark and ablation
* :mod:`cenav.cli` - command-line front end

Kept import-light on purpose: the CLI pins thread counts via environment
variables before numpy first loads its BLAS.
"""

__version__ = "0.1.0"
