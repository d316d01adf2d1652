"""
Disturbance Predictive Control framework.

This package provides the low-level force controller, the latent dynamic
adapter, the high-level disturbance estimator and a trunk-centric simulator
for a quadruped carrying one or two robotic arms.
"""
