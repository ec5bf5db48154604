"""Multi-AUV underwater target-tracking lab.

Planar vehicle physics and sonar models, a multi-agent tracking
environment, potential-field expert demonstration generation, adversarial
imitation training, demonstration-conditioned sequence policies, and an
evaluation harness, behind one CLI (`auvtrack`).
"""

__version__ = "0.1.0"
