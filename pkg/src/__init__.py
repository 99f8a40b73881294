"""
FedGH Simulator - Federated Learning with Gradient Harmonization
Modular architecture for deterministic federated-learning experiments
"""

__version__ = "1.0.0"
__author__ = "FedGH Simulator Team"
