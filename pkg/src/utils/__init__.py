"""
Utilities for FedGH Simulator
Contains configuration parsing and validators
"""
