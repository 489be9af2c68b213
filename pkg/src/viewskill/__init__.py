"""viewskill: a desk-scale language-conditioned manipulation pipeline.

Synthetic tabletop simulator with scripted experts, adaptive novel-view
synthesis by depth warping, cycle-consistent latent disentanglement,
hierarchical skill policies with distillation, and a task-chain evaluation
harness.
"""

__version__ = "0.1.0"
