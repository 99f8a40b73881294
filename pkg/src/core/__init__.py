"""
Core modules for FedGH Simulator
Contains interfaces, parameter-vector arithmetic, models and gradient harmonization
"""
