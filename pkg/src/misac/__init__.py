"""Multimodal mixture-of-experts sensing-and-communication testbed.

Subpackages:

* ``numcore``   float64 tape autodiff, Adam, finite-difference checking
* ``chansim``   synthetic UAV scene, geometric mmWave channel, multimodal sensors
* ``moefusion`` expert/gating networks, dense and sparse top-N fusion
* ``tasks``     task definitions, losses, metrics, training loop
* ``baselines`` concat, static-weight, and unimodal reference models
* ``harness``   experiment configs, CLI, self-test suites
"""

__version__ = "0.1.0"
