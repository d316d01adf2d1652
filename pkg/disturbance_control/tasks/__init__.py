"""
Task scenario modules.

This package contains the scenarios the robot is evaluated and trained on.
Every TaskScenario subclass defined here is registered at runtime.
"""
